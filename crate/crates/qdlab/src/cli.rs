//! Command-line front end: configuration-driven runs with stable file
//! outputs (GF1 fields, JSON reports, CSV traces) and reproducible metadata.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::balayage::{auto_spec, partial_balayage, BalayageResult, Rho};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Mask};
use crate::measure::{disk_rect_area, Measure};
use crate::multiphase::{
    construct_via_disjoint_one_phase, minimize_sm, minimize_smmu, point_mass_qd,
    MinimizeOutcome, PhaseProblem, SegregatedState, TAU_POS,
};
use crate::verify::{
    check_fixed_point, check_one_phase_qd, check_quadrature_inequality, check_strong_mqd,
    MqdOptions, VerificationReport,
};

#[derive(Parser, Debug)]
#[command(name = "qdlab", version, about = "Quadrature-domain laboratory", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    /// Override the grid spacing from the config.
    #[arg(long)]
    h: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Random seed for randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One-phase partial balayage of the configured measure.
    Balayage {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Multiphase solve; the algorithm is chosen with --method.
    Multiphase {
        #[command(flatten)]
        common: CommonArgs,
        /// minimize-sm | minimize-smmu | construct | point-mass
        #[arg(long, default_value = "minimize-sm")]
        method: String,
    },
    /// Re-check a saved run directory.
    Verify {
        /// Directory produced by a previous run.
        dir: PathBuf,
    },
    /// Canned end-to-end examples.
    Example {
        /// three-point | radial-energy | equal-energy-root | nonexistence |
        /// junction | symmetric
        name: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Partial balayage of a point mass in a cone.
    Sector {
        #[command(flatten)]
        common: CommonArgs,
    },
}

// ---------------------------------------------------------------------------
// Run configuration

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub measures: Vec<MeasureConfig>,
    #[serde(default)]
    pub seeds: Vec<SeedConfig>,
    /// Mollification radius; default 8h.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sector parameters (sector / junction runs).
    #[serde(default)]
    pub sector: Option<SectorConfig>,
    /// Example-specific knobs.
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub phases: Option<usize>,
    #[serde(default)]
    pub mass: Option<f64>,
    #[serde(default)]
    pub max_cycles: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Explicit box `[x0, x0+width] x [y0, y0+height]`; omit for AUTO sizing.
    #[serde(default)]
    pub x0: Option<f64>,
    #[serde(default)]
    pub y0: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
    #[serde(default)]
    pub density: Option<DensityConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomConfig {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityConfig {
    Disk {
        cx: f64,
        cy: f64,
        radius: f64,
        value: f64,
    },
    GridFile(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedConfig {
    Disk { cx: f64, cy: f64, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub theta0: f64,
    pub c: f64,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(Error::from)
            }
        }
    }

    fn measure(&self, idx: usize, spec: Option<GridSpec>) -> Result<Measure> {
        let mc = self
            .measures
            .get(idx)
            .ok_or_else(|| Error::InvalidArgument(format!("measure {idx} missing from config")))?;
        let mut mu = Measure::from_atoms(mc.atoms.iter().map(|a| (a.x, a.y, a.mass)).collect());
        if let Some(d) = &mc.density {
            let g = match d {
                DensityConfig::GridFile(path) => GridFunction::read_gf1(path)?,
                DensityConfig::Disk { cx, cy, radius, value } => {
                    let spec = spec.ok_or_else(|| {
                        Error::InvalidArgument("disk densities need an explicit grid box".into())
                    })?;
                    let h = spec.h;
                    GridFunction::from_fn(spec, |x, y| {
                        let frac = disk_rect_area(
                            *radius,
                            x - cx - h / 2.0,
                            x - cx + h / 2.0,
                            y - cy - h / 2.0,
                            y - cy + h / 2.0,
                        ) / (h * h);
                        // inclusion-exclusion rounding can leave dust of
                        // either sign on cells fully outside the disk
                        if frac > 1e-12 {
                            value * frac
                        } else {
                            0.0
                        }
                    })
                }
            };
            mu = mu.plus(&Measure::from_density(g))?;
        }
        mu.validate()?;
        Ok(mu)
    }

    fn grid(&self, h_override: Option<f64>) -> Result<(Option<GridSpec>, f64)> {
        let gc = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config needs a grid section".into()))?;
        let h = h_override.unwrap_or(gc.h);
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        match (gc.x0, gc.y0, gc.width, gc.height) {
            (Some(x0), Some(y0), Some(w), Some(hh)) => {
                Ok((Some(GridSpec::covering(x0, y0, w, hh, h)?), h))
            }
            (None, None, None, None) => Ok((None, h)), // AUTO
            _ => Err(Error::InvalidArgument(
                "grid box needs all of x0, y0, width, height (or none for AUTO)".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Entry point

/// Run the CLI; returns the process exit code
/// (0 success, 2 verification failure, 1 error).
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator,
    I::Item: Into<String>,
{
    let mut argv: Vec<String> = vec!["qdlab".into()];
    argv.extend(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // help/version are successful exits
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn set_threads(n: Option<usize>) {
    if let Some(n) = n {
        // ignore the error if a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Balayage { common } => cmd_balayage(&common),
        Command::Multiphase { common, method } => cmd_multiphase(&common, &method),
        Command::Verify { dir } => cmd_verify(&dir),
        Command::Example { name, common } => cmd_example(&name, &common),
        Command::Sector { common } => cmd_sector(&common),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    threads: usize,
    elapsed_ms: u128,
}

fn write_meta(dir: &Path, command: &str, config: &RunConfig, start: Instant) -> Result<()> {
    write_json(
        dir,
        "run_meta.json",
        &RunMeta {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            threads: rayon::current_num_threads(),
            elapsed_ms: start.elapsed().as_millis(),
        },
    )
}

/// Manifest tying saved fields back to their generating problem so that
/// `verify` can re-check a directory.
#[derive(Debug, Serialize, Deserialize)]
struct StateManifest {
    kind: String, // "one-phase" | "multiphase"
    eps: f64,
    tau_pos: f64,
    measures: Vec<MeasureConfig>,
    fields: Vec<String>,
}

fn measure_to_config(mu: &Measure) -> MeasureConfig {
    MeasureConfig {
        atoms: mu
            .atoms
            .iter()
            .map(|&(x, y, mass)| AtomConfig { x, y, mass })
            .collect(),
        density: None, // densities are re-read from saved GF1 files
    }
}

// ---------------------------------------------------------------------------
// balayage

#[derive(Serialize)]
struct BalayageReport {
    residual: f64,
    iterations: usize,
    area_omega: f64,
    mass_mu: f64,
    tau_pos: f64,
}

fn save_balayage(dir: &Path, res: &BalayageResult, mu: &Measure, eps: f64) -> Result<()> {
    res.w.write_gf1(&dir.join("W.gf1"))?;
    res.v.write_gf1(&dir.join("V.gf1"))?;
    res.omega.write_gf1(&dir.join("omega.gf1"))?;
    write_json(
        dir,
        "report.json",
        &BalayageReport {
            residual: res.residual,
            iterations: res.sweeps,
            area_omega: res.area_omega(),
            mass_mu: res.mass_mu,
            tau_pos: res.tau_pos,
        },
    )?;
    let mut mc = measure_to_config(mu);
    if let Some(d) = &mu.density {
        d.write_gf1(&dir.join("mu_density.gf1"))?;
        mc.density = Some(DensityConfig::GridFile(dir.join("mu_density.gf1")));
    }
    write_json(
        dir,
        "state.json",
        &StateManifest {
            kind: "one-phase".into(),
            eps,
            tau_pos: res.tau_pos,
            measures: vec![mc],
            fields: vec!["W.gf1".into()],
        },
    )
}

fn cmd_balayage(common: &CommonArgs) -> Result<i32> {
    let start = Instant::now();
    set_threads(common.threads);
    let config = RunConfig::load(common.config.as_deref())?;
    fs::create_dir_all(&common.out)?;
    let (spec_opt, h) = config.grid(common.h)?;
    let mu = if config.measures.is_empty() {
        Measure::zero()
    } else {
        config.measure(0, spec_opt)?
    };
    let eps = config.eps.unwrap_or(8.0 * h);
    let spec = match spec_opt {
        Some(s) => s,
        None => auto_spec(&mu, h, eps)?,
    };
    if mu.is_zero() {
        // zero measure: zero fields, empty saturated set
        let zero = GridFunction::zeros(spec);
        zero.write_gf1(&common.out.join("W.gf1"))?;
        zero.write_gf1(&common.out.join("V.gf1"))?;
        Mask::empty(spec).write_gf1(&common.out.join("omega.gf1"))?;
        write_json(
            &common.out,
            "report.json",
            &BalayageReport {
                residual: 0.0,
                iterations: 0,
                area_omega: 0.0,
                mass_mu: 0.0,
                tau_pos: TAU_POS,
            },
        )?;
        write_meta(&common.out, "balayage", &config, start)?;
        return Ok(0);
    }
    let res = partial_balayage(&mu, None, &Rho::one(), spec, Some(eps), None)?;
    save_balayage(&common.out, &res, &mu, eps)?;
    write_meta(&common.out, "balayage", &config, start)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// multiphase

fn save_state(
    dir: &Path,
    state: &SegregatedState,
    problem: &PhaseProblem,
    outcome: Option<&MinimizeOutcome>,
    report: &VerificationReport,
) -> Result<()> {
    let masks = state.masks();
    let mut fields = Vec::new();
    for (j, (u, q)) in state.u.iter().zip(&masks).enumerate() {
        let uf = format!("u_{}.gf1", j + 1);
        u.write_gf1(&dir.join(&uf))?;
        q.write_gf1(&dir.join(format!("Q_{}.gf1", j + 1)))?;
        fields.push(uf);
    }
    if let Some(out) = outcome {
        let mut csv = String::from("cycle,energy\n");
        for (k, e) in out.energy_trace.iter().enumerate() {
            csv.push_str(&format!("{k},{e:?}\n"));
        }
        fs::write(dir.join("energy_trace.csv"), csv)?;
    }
    #[derive(Serialize)]
    struct StateReport<'a> {
        phases: usize,
        converged: Option<bool>,
        cycles: Option<usize>,
        final_energy: Option<f64>,
        fixed_point_symdiff: Option<&'a [usize]>,
        areas: Vec<f64>,
        verification: &'a VerificationReport,
    }
    write_json(
        dir,
        "state_report.json",
        &StateReport {
            phases: problem.phase_count(),
            converged: outcome.map(|o| o.converged),
            cycles: outcome.map(|o| o.cycles),
            final_energy: outcome.and_then(|o| o.energy_trace.last().copied()),
            fixed_point_symdiff: outcome.map(|o| o.fixed_point_symdiff.as_slice()),
            areas: masks.iter().map(Mask::area).collect(),
            verification: report,
        },
    )?;
    write_json(dir, "verify_report.json", report)?;
    let measures = problem.measures.iter().map(measure_to_config).collect();
    write_json(
        dir,
        "state.json",
        &StateManifest {
            kind: "multiphase".into(),
            eps: problem.eps,
            tau_pos: state.tau_pos,
            measures,
            fields,
        },
    )
}

fn cmd_multiphase(common: &CommonArgs, method: &str) -> Result<i32> {
    let start = Instant::now();
    set_threads(common.threads);
    let config = RunConfig::load(common.config.as_deref())?;
    fs::create_dir_all(&common.out)?;
    let (spec_opt, h) = config.grid(common.h)?;
    if config.measures.is_empty() {
        return Err(Error::InvalidArgument("multiphase needs at least one measure".into()));
    }
    let measures: Vec<Measure> = (0..config.measures.len())
        .map(|i| config.measure(i, spec_opt))
        .collect::<Result<_>>()?;
    let eps = config.eps.unwrap_or(8.0 * h);
    let spec = match spec_opt {
        Some(s) => s,
        None => {
            let mut all = Measure::zero();
            for m in &measures {
                all = all.plus(m)?;
            }
            auto_spec(&all, h, eps)?
        }
    };
    let mut problem = PhaseProblem::new(measures, spec, Some(eps))?;
    if let Some(n) = config.max_cycles {
        problem.max_cycles = n;
    }
    if !config.seeds.is_empty() {
        let seeds = config
            .seeds
            .iter()
            .map(|SeedConfig::Disk { cx, cy, radius }| {
                Mask::from_fn(spec, |x, y| (x - cx).hypot(y - cy) <= *radius)
            })
            .collect();
        problem = problem.with_seeds(seeds)?;
    }

    let (state, outcome, report) = match method {
        "minimize-sm" => {
            let out = minimize_sm(&problem, None)?;
            let rep = check_strong_mqd(&out.state, &problem, &MqdOptions::default())?;
            (out.state.clone(), Some(out), rep)
        }
        "minimize-smmu" => {
            let out = minimize_smmu(&problem)?;
            let rep = check_strong_mqd(&out.state, &problem, &MqdOptions::default())?;
            (out.state.clone(), Some(out), rep)
        }
        "construct" => {
            let (state, rep) = construct_via_disjoint_one_phase(&problem)?;
            (state, None, rep)
        }
        "point-mass" => {
            let out = point_mass_qd(&problem)?;
            (out.state, Some(out.outcome), out.report)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (minimize-sm | minimize-smmu | construct | point-mass)"
            )))
        }
    };
    let pass = report.overall;
    save_state(&common.out, &state, &problem, outcome.as_ref(), &report)?;
    write_meta(&common.out, "multiphase", &config, start)?;
    Ok(if pass { 0 } else { 2 })
}

// ---------------------------------------------------------------------------
// verify

fn cmd_verify(dir: &Path) -> Result<i32> {
    let text = fs::read_to_string(dir.join("state.json"))?;
    let manifest: StateManifest = serde_json::from_str(&text)?;
    let measures: Vec<Measure> = manifest
        .measures
        .iter()
        .map(|mc| {
            let mut mu = Measure::from_atoms(mc.atoms.iter().map(|a| (a.x, a.y, a.mass)).collect());
            if let Some(DensityConfig::GridFile(p)) = &mc.density {
                mu = mu.plus(&Measure::from_density(GridFunction::read_gf1(p)?))?;
            }
            Ok(mu)
        })
        .collect::<Result<_>>()?;

    let report = match manifest.kind.as_str() {
        "one-phase" => {
            let u = GridFunction::read_gf1(&dir.join(&manifest.fields[0]))?;
            let q = Mask::positivity(&u, manifest.tau_pos);
            let mut rep = check_one_phase_qd(&q, &measures[0], &u, manifest.eps, manifest.tau_pos)?;
            let quad = check_quadrature_inequality(&q, &measures[0], None, u.spec)?;
            for c in quad.checks {
                rep.checks.push(c);
            }
            rep.finish();
            rep
        }
        "multiphase" => {
            let u: Vec<GridFunction> = manifest
                .fields
                .iter()
                .map(|f| GridFunction::read_gf1(&dir.join(f)))
                .collect::<Result<_>>()?;
            let spec = u[0].spec;
            let state = SegregatedState {
                u,
                tau_pos: manifest.tau_pos,
            };
            let problem = PhaseProblem::new(measures, spec, Some(manifest.eps))?;
            let mut rep = check_strong_mqd(&state, &problem, &MqdOptions::default())?;
            let fp = check_fixed_point(&state, &problem)?;
            for c in fp.checks {
                rep.checks.push(c);
            }
            rep.finish();
            rep
        }
        other => return Err(Error::Format(format!("unknown state kind '{other}'"))),
    };
    write_json(dir, "verify_report.json", &report)?;
    println!("verify: {}", if report.overall { "PASS" } else { "FAIL" });
    Ok(if report.overall { 0 } else { 2 })
}

// ---------------------------------------------------------------------------
// sector

fn sector_params(config: &RunConfig) -> Result<(f64, f64)> {
    let sc = config
        .sector
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("config needs a 'sector' section (theta0, c)".into()))?;
    Ok((sc.theta0, sc.c))
}

fn cmd_sector(common: &CommonArgs) -> Result<i32> {
    let start = Instant::now();
    set_threads(common.threads);
    let config = RunConfig::load(common.config.as_deref())?;
    fs::create_dir_all(&common.out)?;
    let (theta0, c) = sector_params(&config)?;
    let h = common
        .h
        .or_else(|| config.grid.as_ref().map(|g| g.h))
        .unwrap_or(1.0 / 128.0);
    let out = analytic::sector_balayage(&analytic::SectorProblem::new(theta0, c, h)?)?;
    out.bal.w.write_gf1(&common.out.join("W.gf1"))?;
    out.bal.omega.write_gf1(&common.out.join("omega.gf1"))?;
    out.d.write_gf1(&common.out.join("sector.gf1"))?;
    #[derive(Serialize)]
    struct SectorReport {
        theta0: f64,
        c: f64,
        scale: f64,
        junction_distance: f64,
        residual: f64,
        iterations: usize,
        barrier: Option<VerificationReport>,
    }
    let barrier = if theta0 <= std::f64::consts::FRAC_PI_4 + 1e-12 {
        Some(analytic::barrier_certificate(&out, h))
    } else {
        None
    };
    let pass = barrier.as_ref().map_or(true, |b| b.overall);
    write_json(
        &common.out,
        "report.json",
        &SectorReport {
            theta0,
            c,
            scale: out.scale,
            junction_distance: analytic::junction_distance(&out),
            residual: out.bal.residual,
            iterations: out.bal.sweeps,
            barrier,
        },
    )?;
    write_meta(&common.out, "sector", &config, start)?;
    Ok(if pass { 0 } else { 2 })
}

// ---------------------------------------------------------------------------
// examples

fn cmd_example(name: &str, common: &CommonArgs) -> Result<i32> {
    let start = Instant::now();
    set_threads(common.threads);
    let config = RunConfig::load(common.config.as_deref())?;
    fs::create_dir_all(&common.out)?;
    let h = common
        .h
        .or_else(|| config.grid.as_ref().map(|g| g.h))
        .unwrap_or(1.0 / 128.0);
    let code = match name {
        "three-point" => example_three_point(&common.out, h)?,
        "radial-energy" => example_radial_energy(&common.out, h)?,
        "equal-energy-root" => example_equal_energy_root(&common.out)?,
        "nonexistence" => example_nonexistence(&common.out, config.resolution.unwrap_or(200))?,
        "junction" => example_junction(&common.out, h)?,
        "symmetric" => {
            example_symmetric(&common.out, config.phases.unwrap_or(3), config.mass.unwrap_or(50.0), h)?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown example '{other}' (three-point | radial-energy | equal-energy-root | \
                 nonexistence | junction | symmetric)"
            )))
        }
    };
    write_meta(&common.out, &format!("example {name}"), &config, start)?;
    Ok(code)
}

/// Three equal point masses on a line: the middle phase is pinched by its
/// neighbors. Expected runtime: ~1 min at h = 1/128.
fn example_three_point(dir: &Path, h: f64) -> Result<i32> {
    let t = 4.0 * std::f64::consts::PI / 9.0;
    let spec = GridSpec::covering(-1.95, -1.45, 3.9, 2.9, h)?;
    let problem = PhaseProblem::new(
        vec![
            Measure::atom(-1.0, 0.0, t),
            Measure::atom(0.0, 0.0, t),
            Measure::atom(1.0, 0.0, t),
        ],
        spec,
        Some(4.0 * h),
    )?;
    let (state, report) = construct_via_disjoint_one_phase(&problem)?;
    let pass = report.overall;
    save_state(dir, &state, &problem, None, &report)?;
    println!("three-point: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { 2 })
}

/// Radial annulus profile and its closed-form energy. Runs in milliseconds.
fn example_radial_energy(dir: &Path, h: f64) -> Result<i32> {
    let p = analytic::AnnulusProfile::new(4.0, 16.0)?;
    let mut csv = String::from("r,W\n");
    let n = (16.5 / h).ceil() as usize;
    for k in 0..=n {
        let r = k as f64 * h;
        csv.push_str(&format!("{r:?},{:?}\n", p.eval(r)));
    }
    fs::write(dir.join("profile.csv"), csv)?;
    #[derive(Serialize)]
    struct EnergyReport {
        r1: f64,
        r2: f64,
        energy: f64,
        energy_quadrature: f64,
    }
    write_json(
        dir,
        "report.json",
        &EnergyReport {
            r1: 4.0,
            r2: 16.0,
            energy: analytic::radial_energy(4.0, 16.0)?,
            energy_quadrature: analytic::radial_energy_quadrature(4.0, 16.0)?,
        },
    )?;
    println!("radial-energy: J(4,16) = {}", analytic::radial_energy(4.0, 16.0)?);
    Ok(0)
}

/// The equal-energy root R in (5, 5.1). Runs in milliseconds.
fn example_equal_energy_root(dir: &Path) -> Result<i32> {
    let r = analytic::solve_equal_energy()?;
    #[derive(Serialize)]
    struct RootReport {
        root: f64,
        energy: f64,
    }
    write_json(
        dir,
        "report.json",
        &RootReport {
            root: r,
            energy: analytic::radial_energy(r, 17.0)?,
        },
    )?;
    println!("equal-energy-root: R = {r}");
    Ok(0)
}

/// Exhaustive residual scan showing the ring system has no solution.
/// Expected runtime: ~1 min at resolution 200.
fn example_nonexistence(dir: &Path, resolution: usize) -> Result<i32> {
    let rep = analytic::nonexistence_search(resolution)?;
    write_json(dir, "report.json", &rep)?;
    println!(
        "nonexistence: min residual {} at {:?}",
        rep.min_residual,
        if rep.positive_branch.min_residual <= rep.zero_branch.min_residual {
            rep.positive_branch.argmin
        } else {
            rep.zero_branch.argmin
        }
    );
    Ok(if rep.min_residual > 0.0 { 0 } else { 2 })
}

/// Junction threshold scan over the cone half-angle.
/// Expected runtime: ~4 min at h = 1/128.
fn example_junction(dir: &Path, h: f64) -> Result<i32> {
    use std::f64::consts::PI;
    #[derive(Serialize)]
    struct Case {
        theta0: f64,
        c: f64,
        junction: bool,
        junction_distance: f64,
        scale: f64,
        barrier: Option<VerificationReport>,
    }
    let eps = 4.0 * h;
    let mut cases = Vec::new();
    let mut ok = true;
    for &(theta0, c, expect) in &[
        (PI / 3.0, 50.0, true),
        (PI / 4.0, 1e2, false),
        (PI / 4.0, 1e3, false),
        (PI / 4.0, 1e4, false),
        (PI / 8.0, 1e3, false),
    ] {
        let out = analytic::sector_balayage(&analytic::SectorProblem::new(theta0, c, h)?)?;
        let dist = analytic::junction_distance(&out);
        // wide cones are decided by the grid distance; at and below pi/4
        // the gap is sub-grid and the f_s barrier is the certificate
        let (junction, barrier) = if theta0 > PI / 4.0 {
            (dist <= eps, None)
        } else {
            let b = analytic::barrier_certificate(&out, h);
            ok &= b.overall;
            (false, Some(b))
        };
        ok &= junction == expect;
        if (theta0 - PI / 3.0).abs() < 1e-9 {
            out.bal.omega.write_gf1(&dir.join("omega_pi3.gf1"))?;
        }
        println!(
            "junction(theta0={theta0:.4}, C={c}): dist = {dist:.5} -> {}",
            if junction { "reaches the tip" } else { "stays away" }
        );
        cases.push(Case {
            theta0,
            c,
            junction,
            junction_distance: dist,
            scale: out.scale,
            barrier,
        });
    }
    write_json(dir, "report.json", &cases)?;
    Ok(if ok { 0 } else { 2 })
}

/// Symmetric m-phase configuration from one rotated sector solve.
/// Expected runtime: ~1 min at h = 1/128.
fn example_symmetric(dir: &Path, m: usize, c: f64, h: f64) -> Result<i32> {
    let (state, report) = analytic::symmetric_mqd(m, c, h)?;
    let spec = state.u[0].spec;
    let atoms: Vec<Measure> = (0..m)
        .map(|j| {
            let ang = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            Measure::atom(ang.cos(), ang.sin(), c)
        })
        .collect();
    let problem = PhaseProblem::new(atoms, spec, Some(8.0 * h))?;
    let pass = report.overall;
    save_state(dir, &state, &problem, None, &report)?;
    // origin clearance (positive iff theta0 < pi/4, i.e. m > 4 ... m >= 5;
    // for m = 3 the phases meet at the tip)
    let mut dist = f64::INFINITY;
    let union = state
        .masks()
        .iter()
        .fold(Mask::empty(spec), |acc, q| acc.union(q));
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if union.inside[spec.idx(i, j)] {
                let (x, y) = spec.node_ij(i, j);
                dist = dist.min(x.hypot(y));
            }
        }
    }
    println!(
        "symmetric m={m}: {} (origin clearance {dist:.5})",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { 0 } else { 2 })
}

// ---------------------------------------------------------------------------
