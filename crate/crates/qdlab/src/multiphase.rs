//! Segregated-state energy minimization over several phases, the disjoint
//! one-phase construction with its two-phase membrane upgrade, and the
//! sufficient-mass constant for seeded phases.

use rayon::prelude::*;

use crate::balayage::{partial_balayage, Rho};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Mask};
use crate::measure::{concentration_ok, mollify, Measure};
use crate::potential::{
    disk_potential, fundamental_solution, green_potential, self_term_radius, solver_density,
    unit_ball_volume,
};
use crate::verify::{check_strong_mqd, MqdOptions, VerificationReport};

/// Positivity cutoff for phase masks (`1e-7 * (1 + rho)` with `rho = 1`).
pub const TAU_POS: f64 = 2e-7;

/// A multiphase problem: `m` measures with pairwise-disjoint supports
/// competing against background density 1 on a shared grid.
#[derive(Debug, Clone)]
pub struct PhaseProblem {
    pub measures: Vec<Measure>,
    pub spec: GridSpec,
    /// Mollification radius for atoms (also the interface margin unit).
    pub eps: f64,
    /// Seed sets for the constrained minimization, one per phase.
    pub seeds: Option<Vec<Mask>>,
    pub max_cycles: usize,
}

impl PhaseProblem {
    pub fn new(measures: Vec<Measure>, spec: GridSpec, eps: Option<f64>) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::InvalidArgument("need at least one phase".into()));
        }
        let eps = eps.unwrap_or(8.0 * spec.h);
        for m in &measures {
            m.validate()?;
        }
        // supports pairwise disjoint with positive distance, wide enough that
        // mollified supports stay disjoint
        let pts: Vec<Vec<(f64, f64)>> = measures.iter().map(|m| m.support_points()).collect();
        for i in 0..measures.len() {
            for j in i + 1..measures.len() {
                for &(ax, ay) in &pts[i] {
                    for &(bx, by) in &pts[j] {
                        let d = (ax - bx).hypot(ay - by);
                        if d <= 2.0 * eps {
                            return Err(Error::InvalidArgument(format!(
                                "supports of phases {i} and {j} are only {d} apart (need > 2 eps = {})",
                                2.0 * eps
                            )));
                        }
                    }
                }
            }
        }
        Ok(PhaseProblem {
            measures,
            spec,
            eps,
            seeds: None,
            max_cycles: 500,
        })
    }

    pub fn with_seeds(mut self, seeds: Vec<Mask>) -> Result<Self> {
        if seeds.len() != self.measures.len() {
            return Err(Error::InvalidArgument("one seed mask per phase".into()));
        }
        for s in &seeds {
            if !s.spec.same_layout(&self.spec) {
                return Err(Error::GridMismatch("seed grid must match the problem grid".into()));
            }
        }
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                if seeds[i].intersect(&seeds[j]).count() > 0 {
                    return Err(Error::InvalidArgument(format!("seeds {i} and {j} overlap")));
                }
            }
        }
        self.seeds = Some(seeds);
        Ok(self)
    }

    pub fn phase_count(&self) -> usize {
        self.measures.len()
    }

    /// Grid forms of the measures as used by the solver.
    pub fn solver_densities(&self) -> Result<Vec<GridFunction>> {
        self.measures
            .iter()
            .map(|m| {
                if m.is_zero() {
                    Ok(GridFunction::zeros(self.spec))
                } else {
                    solver_density(m, self.eps, self.spec)
                }
            })
            .collect()
    }

    /// Plain mollified densities (non-negative).
    pub fn mollified_densities(&self) -> Result<Vec<GridFunction>> {
        self.measures
            .iter()
            .map(|m| {
                if m.is_zero() {
                    Ok(GridFunction::zeros(self.spec))
                } else {
                    Ok(mollify(m, self.eps, self.spec)?.density)
                }
            })
            .collect()
    }
}

/// Tuple of non-negative phase functions with pairwise-disjoint positivity
/// sets.
#[derive(Debug, Clone)]
pub struct SegregatedState {
    pub u: Vec<GridFunction>,
    pub tau_pos: f64,
}

impl SegregatedState {
    pub fn zeros(spec: GridSpec, m: usize) -> Self {
        SegregatedState {
            u: (0..m).map(|_| GridFunction::zeros(spec)).collect(),
            tau_pos: TAU_POS,
        }
    }

    pub fn masks(&self) -> Vec<Mask> {
        self.u.iter().map(|g| Mask::positivity(g, self.tau_pos)).collect()
    }

    /// Nodewise segregation: at most one phase positive per node.
    pub fn validate(&self) -> Result<()> {
        let masks = self.masks();
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                let n = masks[i].intersect(&masks[j]).count();
                if n > 0 {
                    return Err(Error::VerificationFailed(format!(
                        "phases {i} and {j} overlap on {n} nodes"
                    )));
                }
            }
        }
        for g in &self.u {
            if g.values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::VerificationFailed("phase functions must be >= 0 and finite".into()));
            }
        }
        Ok(())
    }
}

/// Segregation energy `sum_i h^2 (|grad u_i|^2 - 2 f_i u_i)` with
/// `f_i = mu_i - 1` in solver grid form. Summation is serial.
pub fn energy(state: &SegregatedState, problem: &PhaseProblem) -> Result<f64> {
    if state.u.len() != problem.phase_count() {
        return Err(Error::InvalidArgument("state and problem phase counts differ".into()));
    }
    let fs = problem.solver_densities()?;
    let h2 = problem.spec.h * problem.spec.h;
    let mut e = 0.0;
    for (u, mu) in state.u.iter().zip(&fs) {
        if !u.spec.same_layout(&problem.spec) {
            return Err(Error::GridMismatch("state grid must match the problem grid".into()));
        }
        e += u.dirichlet_energy();
        let mut lin = 0.0;
        for (uv, mv) in u.values.iter().zip(&mu.values) {
            lin += (mv - 1.0) * uv;
        }
        e -= 2.0 * h2 * lin;
    }
    Ok(e)
}

/// One-phase solutions `W^{mu_i}` truncated to a segregated state: contested
/// nodes go to the phase with the larger value, ties to the lowest index.
pub fn default_init(problem: &PhaseProblem) -> Result<SegregatedState> {
    let mut u: Vec<GridFunction> = Vec::with_capacity(problem.phase_count());
    for mu in &problem.measures {
        u.push(partial_balayage(mu, None, &Rho::one(), problem.spec, Some(problem.eps), None)?.w);
    }
    for k in 0..problem.spec.len() {
        let mut best = 0usize;
        for i in 1..u.len() {
            if u[i].values[k] > u[best].values[k] {
                best = i;
            }
        }
        for (i, g) in u.iter_mut().enumerate() {
            if i != best {
                g.values[k] = 0.0;
            }
        }
    }
    Ok(SegregatedState { u, tau_pos: TAU_POS })
}

#[derive(Debug, Clone)]
pub struct SmmuInfo {
    /// Seed density lower bound (Assumption-style constant, > 1).
    pub c: f64,
    /// Worst violation of `u_j >= (c-1) G_{A_j}` on the seeds (<= 0 is clean).
    pub barrier_violation: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub state: SegregatedState,
    /// Energy after init (index 0) and after each full cycle.
    pub energy_trace: Vec<f64>,
    pub cycles: usize,
    pub converged: bool,
    /// Per phase: `#(Q_j symdiff omega_{Q_j}(mu_j))` at the final state.
    pub fixed_point_symdiff: Vec<usize>,
    pub smmu: Option<SmmuInfo>,
}

fn gauss_seidel(
    problem: &PhaseProblem,
    init: SegregatedState,
    seeds: Option<&[Mask]>,
) -> Result<MinimizeOutcome> {
    let m = problem.phase_count();
    let spec = problem.spec;
    let mut u = init.u;
    let mut trace = vec![energy(&SegregatedState { u: u.clone(), tau_pos: TAU_POS }, problem)?];
    let mut converged = false;
    let mut cycles = 0;

    while cycles < problem.max_cycles {
        for j in 0..m {
            // D_j: everything not claimed by another phase (nor by another
            // phase's seed), always including phase j's own seed
            let mut claimed = Mask::empty(spec);
            for l in 0..m {
                if l == j {
                    continue;
                }
                claimed = claimed.union(&Mask::positivity(&u[l], TAU_POS));
                if let Some(s) = seeds {
                    claimed = claimed.union(&s[l]);
                }
            }
            let d_j = claimed.complement();
            let warm = u[j].clone();
            u[j] = partial_balayage(
                &problem.measures[j],
                Some(&d_j),
                &Rho::one(),
                spec,
                Some(problem.eps),
                Some(&warm),
            )?
            .w;
        }
        cycles += 1;
        let e = energy(&SegregatedState { u: u.clone(), tau_pos: TAU_POS }, problem)?;
        let prev = *trace.last().unwrap();
        trace.push(e);
        if prev - e < 1e-9 * (1.0 + e.abs()) {
            converged = true;
            break;
        }
    }

    let state = SegregatedState { u, tau_pos: TAU_POS };
    state.validate()?;

    // fixed-point residual: recompute omega with D = Q_j
    let masks = state.masks();
    let mut fixed_point_symdiff = Vec::with_capacity(m);
    for j in 0..m {
        if masks[j].count() == 0 {
            fixed_point_symdiff.push(0);
            continue;
        }
        let re = partial_balayage(
            &problem.measures[j],
            Some(&masks[j]),
            &Rho::one(),
            spec,
            Some(problem.eps),
            Some(&state.u[j]),
        )?;
        fixed_point_symdiff.push(masks[j].symdiff_count(&re.omega));
    }

    Ok(MinimizeOutcome {
        state,
        energy_trace: trace,
        cycles,
        converged,
        fixed_point_symdiff,
        smmu: None,
    })
}

/// Phase-wise Gauss–Seidel descent: `u_j := W_{D_j}^{mu_j}` with
/// `D_j = grid minus the other phases' claims`, cycled until the energy
/// decrease over a full cycle drops below `1e-9 (1 + |E|)`.
pub fn minimize_sm(problem: &PhaseProblem, init: Option<SegregatedState>) -> Result<MinimizeOutcome> {
    let init = match init {
        Some(s) => {
            s.validate()?;
            s
        }
        None => default_init(problem)?,
    };
    gauss_seidel(problem, init, None)
}

/// Constrained variant: each `D_j` always contains the seed `A_j`, so phase
/// `j` can never be evicted from its seed. Verifies the seed hypothesis
/// (mollified density >= c > 1 on the seed, vanishing away from it) and the
/// Green-potential lower barrier `u_j >= (c - 1) G_{A_j}` a posteriori.
pub fn minimize_smmu(problem: &PhaseProblem) -> Result<MinimizeOutcome> {
    let seeds = problem
        .seeds
        .clone()
        .ok_or_else(|| Error::InvalidArgument("minimize_smmu needs seed masks".into()))?;
    let dens = problem.mollified_densities()?;

    // seed hypothesis: density >= c > 1 on A_j, ~0 off a small dilation of
    // A_j (the mollified rim smears over a few cells)
    let mut c = f64::INFINITY;
    for (j, (a, d)) in seeds.iter().zip(&dens).enumerate() {
        if a.count() == 0 {
            return Err(Error::InvalidArgument(format!("seed {j} is empty")));
        }
        let mut on_min = f64::INFINITY;
        for k in 0..problem.spec.len() {
            if a.inside[k] {
                on_min = on_min.min(d.values[k]);
            }
        }
        let mut slack = a.clone();
        // mollification smears the rim over eps (an L1 dilation needs a
        // sqrt(2) factor to cover that Euclidean distance) plus slack for
        // the support sitting slightly outside the seed
        let rim = (1.5 * (problem.eps / problem.spec.h + 2.0)).ceil() as usize + 1;
        for _ in 0..rim {
            slack = slack.dilate();
        }
        let mut off_max = 0.0f64;
        for k in 0..problem.spec.len() {
            if !slack.inside[k] {
                off_max = off_max.max(d.values[k]);
            }
        }
        if off_max > 1e-9 * (1.0 + d.max_abs()) {
            return Err(Error::InvalidArgument(format!(
                "measure {j} charges nodes away from its seed (density {off_max})"
            )));
        }
        if on_min <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "seed {j}: density lower bound {on_min} <= 1; the seed hypothesis fails"
            )));
        }
        c = c.min(on_min);
    }

    let init = default_init(problem)?;
    // the default init may not cover the seeds; hand out seed nodes to their
    // owners before the first cycle
    let mut u = init.u;
    for (j, a) in seeds.iter().enumerate() {
        for l in 0..u.len() {
            if l != j {
                for k in 0..problem.spec.len() {
                    if a.inside[k] {
                        u[l].values[k] = 0.0;
                    }
                }
            }
        }
    }
    let mut out = gauss_seidel(problem, SegregatedState { u, tau_pos: TAU_POS }, Some(&seeds))?;

    // lower barrier on each seed
    let mut worst = f64::NEG_INFINITY;
    for (j, a) in seeds.iter().enumerate() {
        let g = green_potential(a, problem.spec)?;
        for k in 0..problem.spec.len() {
            if a.inside[k] {
                worst = worst.max((c - 1.0) * g.values[k] - out.state.u[j].values[k]);
            }
        }
    }
    let tol = 1e-6 * (1.0 + c);
    if worst > tol {
        return Err(Error::VerificationFailed(format!(
            "seed barrier violated by {worst} (tol {tol})"
        )));
    }
    out.smmu = Some(SmmuInfo {
        c,
        barrier_violation: worst,
    });
    Ok(out)
}

/// Options for the two-phase membrane solve.
pub struct MembraneOptions {
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for MembraneOptions {
    fn default() -> Self {
        MembraneOptions {
            omega: 1.8,
            tol: 1e-8,
            max_sweeps: 0, // 0 = 200 * max(nx, ny)
        }
    }
}

/// Minimizer of the two-phase membrane functional
/// `sum h^2 (|grad w|^2 - 2 f w + 2 |w|)` with zero boundary values
/// (convex, unique). Nodewise optimality is the soft-threshold rule
/// `4w = nb + h^2 f - h^2 sign(w)`, swept red-black with over-relaxation.
pub fn membrane_two_phase(f: &GridFunction, opts: &MembraneOptions) -> Result<GridFunction> {
    let spec = f.spec;
    let (nx, ny) = (spec.nx, spec.ny);
    let h2 = spec.h * spec.h;
    let max_sweeps = if opts.max_sweeps == 0 {
        200 * nx.max(ny)
    } else {
        opts.max_sweeps
    };

    let target = |nb: f64, fk: f64| -> f64 {
        let b = nb + h2 * fk;
        if b > h2 {
            (b - h2) / 4.0
        } else if b < -h2 {
            (b + h2) / 4.0
        } else {
            0.0
        }
    };

    let mut cur = vec![0.0f64; spec.len()];
    let mut nxt = cur.clone();

    let update_color = |src: &[f64], dst: &mut [f64], color: usize| {
        dst.par_chunks_mut(nx)
            .enumerate()
            .skip(1)
            .take(ny.saturating_sub(2))
            .for_each(|(j, row)| {
                let start = 1 + (j + 1 + color) % 2;
                let base = j * nx;
                let mut i = start;
                while i < nx - 1 {
                    let k = base + i;
                    let nb = src[k - 1] + src[k + 1] + src[k - nx] + src[k + nx];
                    let t = target(nb, f.values[k]);
                    row[i] = src[k] + opts.omega * (t - src[k]);
                    i += 2;
                }
            });
    };

    let residual = |v: &[f64]| -> f64 {
        (1..ny - 1)
            .into_par_iter()
            .map(|j| {
                let mut worst = 0.0f64;
                for i in 1..nx - 1 {
                    let k = j * nx + i;
                    let nb = v[k - 1] + v[k + 1] + v[k - nx] + v[k + nx];
                    let t = target(nb, f.values[k]);
                    worst = worst.max((v[k] - t).abs() * 4.0 / h2);
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    };

    let tol = opts.tol * (1.0 + f.max_abs() + 1.0);
    let mut sweeps = 0;
    let mut res = residual(&cur);
    while res > tol && sweeps < max_sweeps {
        for _ in 0..16usize.min(max_sweeps - sweeps) {
            for color in 0..2 {
                update_color(&cur, &mut nxt, color);
                std::mem::swap(&mut cur, &mut nxt);
                nxt.copy_from_slice(&cur);
            }
            sweeps += 1;
        }
        res = residual(&cur);
    }
    if res > tol {
        return Err(Error::NonConvergence(format!(
            "membrane residual {res} after {sweeps} sweeps (tol {tol})"
        )));
    }
    Ok(GridFunction { spec, values: cur })
}

/// Two-coloring of the overlap graph; `None` if an odd cycle exists.
fn two_color(adj: &[Vec<usize>]) -> Option<Vec<u8>> {
    let n = adj.len();
    let mut color = vec![u8::MAX; n];
    for start in 0..n {
        if color[start] != u8::MAX {
            continue;
        }
        color[start] = 0;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if color[w] == u8::MAX {
                    color[w] = 1 - color[v];
                    stack.push(w);
                } else if color[w] == color[v] {
                    return None;
                }
            }
        }
    }
    Some(color)
}

/// Existence construction from free one-phase domains.
///
/// Each phase is first solved alone. When the free domains are pairwise
/// disjoint, the tuple `u_i = W_{D_i}^{mu_i}` with
/// `D_i = grid minus the other free domains` is already the answer. When
/// free domains overlap, the overlapping group is re-solved through the
/// two-phase membrane functional (possible whenever the overlap graph is
/// two-colorable), which resolves the shared interfaces with matched
/// gradients. The returned state carries its certification report.
pub fn construct_via_disjoint_one_phase(
    problem: &PhaseProblem,
) -> Result<(SegregatedState, VerificationReport)> {
    let m = problem.phase_count();
    let spec = problem.spec;

    let mut frees = Vec::with_capacity(m);
    for mu in &problem.measures {
        frees.push(partial_balayage(mu, None, &Rho::one(), spec, Some(problem.eps), None)?);
    }
    let dens = problem.mollified_densities()?;

    // preconditions: mollified supports clear of the other free domains
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let dilated = frees[j].omega.dilate();
            for k in 0..spec.len() {
                if dens[i].values[k] > 0.0 && dilated.inside[k] {
                    return Err(Error::NotApplicable(format!(
                        "support of phase {i} meets the closure of the free domain of phase {j}"
                    )));
                }
            }
        }
        // concentration criterion on (a sample of) the support
        let pts = problem.measures[i].support_points();
        let stride = (pts.len() / 16).max(1);
        for p in pts.iter().step_by(stride) {
            if !concentration_ok(&problem.measures[i], p.0, p.1)? {
                return Err(Error::NotApplicable(format!(
                    "phase {i} fails the concentration criterion at ({}, {})",
                    p.0, p.1
                )));
            }
        }
    }

    // literal tuple
    let literal = {
        let mut u = Vec::with_capacity(m);
        for i in 0..m {
            let mut others = Mask::empty(spec);
            for (j, fj) in frees.iter().enumerate() {
                if j != i {
                    others = others.union(&fj.omega.dilate());
                }
            }
            let d_i = others.complement();
            let res = partial_balayage(
                &problem.measures[i],
                Some(&d_i),
                &Rho::one(),
                spec,
                Some(problem.eps),
                Some(&frees[i].w),
            )?;
            for (px, py) in problem.measures[i].support_points() {
                let (pi, pj) = spec
                    .nearest(px, py)
                    .ok_or_else(|| Error::BoxTooSmall("support outside the grid".into()))?;
                if !res.omega.inside[spec.idx(pi, pj)] {
                    return Err(Error::NotApplicable(format!(
                        "support of phase {i} not swallowed by its constrained domain"
                    )));
                }
            }
            u.push(res.w);
        }
        SegregatedState { u, tau_pos: TAU_POS }
    };
    let report = check_strong_mqd(&literal, problem, &MqdOptions::default())?;
    if report.overall {
        return Ok((literal, report));
    }

    // overlapping free domains: membrane upgrade per connected group
    let mut adj = vec![Vec::new(); m];
    for i in 0..m {
        for j in i + 1..m {
            if frees[i].omega.intersect(&frees[j].omega).count() > 0 {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let color = two_color(&adj).ok_or_else(|| {
        Error::NotApplicable("free domains overlap in an odd cycle; no two-sided split exists".into())
    })?;

    // connected components of the overlap graph
    let mut comp_id = vec![usize::MAX; m];
    let mut ncomp = 0;
    for s in 0..m {
        if comp_id[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp_id[s] = ncomp;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if comp_id[w] == usize::MAX {
                    comp_id[w] = ncomp;
                    stack.push(w);
                }
            }
        }
        ncomp += 1;
    }

    let solver_dens = problem.solver_densities()?;
    let mut u: Vec<GridFunction> = (0..m).map(|_| GridFunction::zeros(spec)).collect();
    for comp in 0..ncomp {
        let members: Vec<usize> = (0..m).filter(|&i| comp_id[i] == comp).collect();
        if members.len() == 1 {
            u[members[0]] = frees[members[0]].w.clone();
            continue;
        }
        // signed source: side-0 measures positive, side-1 negative
        let mut f = GridFunction::zeros(spec);
        for &i in &members {
            let sign = if color[i] == 0 { 1.0 } else { -1.0 };
            for (fv, dv) in f.values.iter_mut().zip(&solver_dens[i].values) {
                *fv += sign * dv;
            }
        }
        let w = membrane_two_phase(&f, &MembraneOptions::default())?;
        for side in 0..2u8 {
            let sgn = if side == 0 { 1.0 } else { -1.0 };
            let part = GridFunction {
                spec,
                values: w.values.iter().map(|v| (sgn * v).max(0.0)).collect(),
            };
            for piece in Mask::positivity(&part, TAU_POS).components() {
                // owner: the unique side member whose support lies in the piece
                let mut owner = None;
                for &i in &members {
                    if color[i] != side {
                        continue;
                    }
                    let inside = problem.measures[i].support_points().iter().any(|&(px, py)| {
                        spec.nearest(px, py)
                            .map_or(false, |(pi, pj)| piece.inside[spec.idx(pi, pj)])
                    });
                    if inside {
                        if owner.is_some() {
                            return Err(Error::NotApplicable(
                                "two same-side phases merged in the membrane solution".into(),
                            ));
                        }
                        owner = Some(i);
                    }
                }
                if let Some(i) = owner {
                    for k in 0..spec.len() {
                        if piece.inside[k] {
                            u[i].values[k] = part.values[k];
                        }
                    }
                }
            }
        }
    }

    let state = SegregatedState { u, tau_pos: TAU_POS };
    state.validate()?;
    let report = check_strong_mqd(&state, problem, &MqdOptions::default())?;
    Ok((state, report))
}

/// Sufficient seed density from the support-bound estimate:
/// `C > 1 + M (psi(R) - psi(2 R2)) / (psi(delta) - psi(R)) / |B_delta|`
/// with `R2 = R1 + (M / |B_1|)^{1/n}`. A measure with density >= this value
/// on `B_delta(x)` keeps `B_delta(x)` inside its phase.
pub fn support_bound_constant(r: f64, delta: f64, r1: f64, m: f64, n: u32) -> Result<f64> {
    if !(delta > 0.0 && delta < r) {
        return Err(Error::InvalidArgument(format!("need 0 < delta < R, got delta = {delta}, R = {r}")));
    }
    if !(r1 > 0.0 && m > 0.0) {
        return Err(Error::InvalidArgument("R1 and M must be positive".into()));
    }
    let b1 = unit_ball_volume(n);
    let r2 = r1 + (m / b1).powf(1.0 / f64::from(n));
    let psi = |t: f64| fundamental_solution(t, n);
    let num = psi(r)? - psi(2.0 * r2)?;
    let den = psi(delta)? - psi(r)?;
    Ok(1.0 + m * num / den / (b1 * delta.powi(n as i32)))
}

#[derive(Debug)]
pub struct PointMassOutcome {
    pub state: SegregatedState,
    pub report: VerificationReport,
    pub outcome: MinimizeOutcome,
    /// Seed-disk radius chosen for the run.
    pub delta: f64,
}

/// Quadrature domains for tuples of pure point masses: mollify at a seed
/// radius `delta` small enough that the support-bound constant certifies
/// every seed disk, run the seeded minimization, then restore the point-mass
/// potential inside the seed disks.
pub fn point_mass_qd(problem: &PhaseProblem) -> Result<PointMassOutcome> {
    let spec = problem.spec;
    let h = spec.h;
    for (i, mu) in problem.measures.iter().enumerate() {
        if mu.density.is_some() {
            return Err(Error::InvalidArgument(format!("phase {i} is not a pure sum of atoms")));
        }
        if mu.atoms.is_empty() {
            return Err(Error::InvalidArgument(format!("phase {i} has no atoms")));
        }
    }

    let all: Vec<(f64, f64, f64)> = problem.measures.iter().flat_map(|m| m.atoms.clone()).collect();
    let mut dmin = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            dmin = dmin.min((all[i].0 - all[j].0).hypot(all[i].1 - all[j].1));
        }
    }
    let r_ball = if dmin.is_finite() { dmin / 2.0 } else { 1.0 };
    let m_max = problem
        .measures
        .iter()
        .map(Measure::total_mass)
        .fold(0.0, f64::max);
    let (cx, cy) = Measure::from_atoms(all.clone())
        .center_of_mass()
        .ok_or_else(|| Error::InvalidArgument("empty atom list".into()))?;
    let r1 = all
        .iter()
        .map(|a| (a.0 - cx).hypot(a.1 - cy))
        .fold(0.0, f64::max)
        + r_ball;
    let min_mass = all.iter().map(|a| a.2).fold(f64::INFINITY, f64::min);

    // largest delta >= 4h whose seed density clears the sufficient constant;
    // halve downward but clamp the last candidate to 4h so a feasible window
    // narrower than one octave is not skipped
    let mut delta = r_ball / 2.0;
    loop {
        let c_req = support_bound_constant(r_ball, delta, r1, m_max, 2)?;
        let density = min_mass / (std::f64::consts::PI * delta * delta);
        if density >= c_req.max(1.5) {
            break;
        }
        if delta <= 4.0 * h {
            return Err(Error::InvalidArgument(format!(
                "no admissible seed radius above 4h = {}; refine the grid",
                4.0 * h
            )));
        }
        delta = (delta / 2.0).max(4.0 * h);
    }

    // seeded problem at mollification radius delta
    let seeds: Vec<Mask> = problem
        .measures
        .iter()
        .map(|mu| {
            Mask::from_fn(spec, |x, y| {
                mu.atoms
                    .iter()
                    .any(|&(ax, ay, _)| (ax - x).hypot(ay - y) <= delta - 2.0 * h)
            })
        })
        .collect();
    let seeded = PhaseProblem {
        measures: problem.measures.clone(),
        spec,
        eps: delta,
        seeds: None,
        max_cycles: problem.max_cycles,
    }
    .with_seeds(seeds)?;
    let outcome = minimize_smmu(&seeded)?;

    // point-mass potential correction: only acts inside the delta-disks, so
    // segregation is untouched
    let mut state = outcome.state.clone();
    let r_self = self_term_radius(h);
    for (u, mu) in state.u.iter_mut().zip(&problem.measures) {
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let (x, y) = (spec.x(i), spec.y(j));
                let mut corr = 0.0;
                for &(ax, ay, mass) in &mu.atoms {
                    let r = (ax - x).hypot(ay - y);
                    if r < delta {
                        let psi = -(r.max(r_self)).ln() / (2.0 * std::f64::consts::PI);
                        corr += mass * (psi - disk_potential(r, delta));
                    }
                }
                *u.at_mut(i, j) += corr;
            }
        }
    }

    let exclusions: Vec<(f64, f64, f64)> = all.iter().map(|a| (a.0, a.1, 2.0 * delta)).collect();
    let report = check_strong_mqd(
        &state,
        &seeded,
        &MqdOptions {
            exclusions,
            ..MqdOptions::default()
        },
    )?;
    Ok(PointMassOutcome {
        state,
        report,
        outcome,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balayage::auto_spec;
    use std::f64::consts::PI;

    fn t() -> f64 {
        4.0 * PI / 9.0
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let spec = GridSpec::new(-1.0, -1.0, 33, 33, 1.0 / 16.0).unwrap();
        let p = PhaseProblem::new(vec![Measure::atom(0.0, 0.0, t())], spec, Some(0.25)).unwrap();
        let e = energy(&SegregatedState::zeros(spec, 1), &p).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn one_phase_energy_identity() {
        // J_f(W) = -h^2 sum |grad W|^2 up to the complementarity residual
        let h = 1.0 / 64.0;
        let mu = Measure::atom(0.0, 0.0, PI);
        let spec = auto_spec(&mu, h, 8.0 * h).unwrap();
        let res = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        let p = PhaseProblem::new(vec![mu], spec, Some(8.0 * h)).unwrap();
        let st = SegregatedState {
            u: vec![res.w.clone()],
            tau_pos: TAU_POS,
        };
        let e = energy(&st, &p).unwrap();
        let grad = res.w.dirichlet_energy();
        let wsum = res.w.cell_sum();
        let slack = 2.0 * res.residual * wsum + 1e-12 * (e.abs() + grad);
        assert!((e + grad).abs() <= slack, "e = {e}, -grad = {}", -grad);
    }

    #[test]
    fn single_phase_minimize_matches_balayage() {
        let h = 1.0 / 32.0;
        let mu = Measure::atom(0.0, 0.0, t());
        let spec = auto_spec(&mu, h, 8.0 * h).unwrap();
        let p = PhaseProblem::new(vec![mu.clone()], spec, None).unwrap();
        let out = minimize_sm(&p, None).unwrap();
        assert!(out.converged);
        let one = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        assert_eq!(out.state.masks()[0].symdiff_count(&one.omega), 0);
        assert_eq!(out.fixed_point_symdiff.len(), 1);
        assert!(out.fixed_point_symdiff[0] <= 2 * one.omega.perimeter_nodes());
    }

    #[test]
    fn far_apart_phases_do_not_interact() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::new(-2.0, -1.25, 129, 81, h).unwrap();
        let mu1 = Measure::atom(-1.0, 0.0, t());
        let mu2 = Measure::atom(1.0, 0.0, t());
        let p = PhaseProblem::new(vec![mu1.clone(), mu2], spec, None).unwrap();
        let out = minimize_sm(&p, None).unwrap();
        assert!(out.converged);
        // each phase is the free 2/3-ball; energy = 2x one-phase energy
        let p1 = PhaseProblem::new(vec![mu1], spec, None).unwrap();
        let e1 = {
            let o = minimize_sm(&p1, None).unwrap();
            *o.energy_trace.last().unwrap()
        };
        let e = *out.energy_trace.last().unwrap();
        assert!((e - 2.0 * e1).abs() <= 1e-6 * e1.abs(), "e = {e}, 2 e1 = {}", 2.0 * e1);
        // trace nonincreasing
        for w in out.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn membrane_with_one_sign_matches_obstacle_solve() {
        let h = 1.0 / 32.0;
        let mu = Measure::atom(0.0, 0.0, t());
        let spec = auto_spec(&mu, h, 8.0 * h).unwrap();
        let f = solver_density(&mu, 8.0 * h, spec).unwrap();
        let w = membrane_two_phase(&f, &MembraneOptions::default()).unwrap();
        let res = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        let dv = w
            .values
            .iter()
            .zip(&res.w.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(dv <= 1e-6, "dv = {dv}");
    }

    #[test]
    fn membrane_antisymmetric_dipole() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::new(-1.6, -1.2, 105, 79, h).unwrap();
        let a = Measure::atom(-0.45, 0.0, t());
        let b = Measure::atom(0.45, 0.0, t());
        let mut f = solver_density(&a, 4.0 * h, spec).unwrap();
        let fb = solver_density(&b, 4.0 * h, spec).unwrap();
        for (x, y) in f.values.iter_mut().zip(&fb.values) {
            *x -= y;
        }
        let w = membrane_two_phase(&f, &MembraneOptions::default()).unwrap();
        // odd in x across the midline (the grid is symmetric about x = 0.0375
        // only approximately; check w(x) ~ -w(-x) at mirrored node pairs)
        let mid = |x: f64| -x;
        let mut worst = 0.0f64;
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let x = spec.x(i);
                if let Some((mi, mj)) = spec.nearest(mid(x), spec.y(j)) {
                    if (spec.x(mi) + x).abs() < 1e-12 {
                        worst = worst.max((w.at(i, j) + w.at(mi, mj)).abs());
                    }
                }
            }
        }
        assert!(worst <= 1e-6, "asymmetry {worst}");
        // both phases alive
        assert!(w.max() > 0.01);
        assert!(w.values.iter().cloned().fold(f64::INFINITY, f64::min) < -0.01);
    }

    #[test]
    fn construct_disjoint_case_is_the_free_tuple() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::new(-2.0, -1.25, 129, 81, h).unwrap();
        let p = PhaseProblem::new(
            vec![Measure::atom(-1.0, 0.0, t()), Measure::atom(1.0, 0.0, t())],
            spec,
            None,
        )
        .unwrap();
        let (state, report) = construct_via_disjoint_one_phase(&p).unwrap();
        assert!(report.overall, "{:?}", report.checks);
        let free = partial_balayage(&p.measures[0], None, &Rho::one(), spec, None, None).unwrap();
        assert_eq!(state.masks()[0].symdiff_count(&free.omega), 0);
    }

    #[test]
    fn construct_three_point_coarse() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::covering(-1.95, -1.45, 3.9, 2.9, h).unwrap();
        let p = PhaseProblem::new(
            vec![
                Measure::atom(-1.0, 0.0, t()),
                Measure::atom(0.0, 0.0, t()),
                Measure::atom(1.0, 0.0, t()),
            ],
            spec,
            Some(4.0 * h),
        )
        .unwrap();
        let (state, report) = construct_via_disjoint_one_phase(&p).unwrap();
        assert!(report.overall, "{:#?}", report.checks);
        let masks = state.masks();
        assert!(masks.iter().all(|m| m.count() > 0));
        // middle phase pinched below its free area
        let free_mid = partial_balayage(&p.measures[1], None, &Rho::one(), spec, None, None).unwrap();
        assert!(masks[1].area() < free_mid.omega.area());
    }

    #[test]
    fn overlapping_same_phase_balls_not_applicable() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::new(-2.5, -1.8, 161, 117, h).unwrap();
        // masses pi -> unit balls at distance 1: supports inside each other's
        // free domains
        let p = PhaseProblem::new(
            vec![Measure::atom(-0.5, 0.0, PI), Measure::atom(0.5, 0.0, PI)],
            spec,
            None,
        )
        .unwrap();
        assert!(matches!(
            construct_via_disjoint_one_phase(&p),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn support_bound_constant_values() {
        // independent re-derivation of the same expression
        let (r, delta, r1, m) = (1.0, 0.1, 2.0, 3.0);
        let got = support_bound_constant(r, delta, r1, m, 2).unwrap();
        let psi = |t: f64| -(t as f64).ln() / (2.0 * PI);
        let r2 = r1 + (m / PI).sqrt();
        let expect = 1.0 + m * (psi(r) - psi(2.0 * r2)) / (psi(delta) - psi(r)) / (PI * delta * delta);
        assert!((got - expect).abs() <= 1e-12 * expect.abs());
        // required mass -> 0 as delta -> 0, but only logarithmically
        // (like 1/ln(1/delta)), so sample delta = exp(-2^k)
        let mut prev = f64::INFINITY;
        for k in 2..=7 {
            let d = (-(2f64.powi(k))).exp();
            let mass = support_bound_constant(r, d, r1, m, 2).unwrap() * PI * d * d;
            assert!(mass < prev);
            prev = mass;
        }
        assert!(prev < 0.05, "mass {prev}");
        assert!(support_bound_constant(1.0, 1.0, 2.0, 3.0, 2).is_err());
    }

    #[test]
    fn smmu_one_phase_barrier() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::new(-1.5, -1.5, 97, 97, h).unwrap();
        // density 3 on B_0.3: above the background, seed = the disk
        let d = GridFunction::from_fn(spec, |x, y| if x.hypot(y) <= 0.3 { 3.0 } else { 0.0 });
        let p = PhaseProblem::new(vec![Measure::from_density(d)], spec, Some(4.0 * h)).unwrap();
        let seed = Mask::from_fn(spec, |x, y| x.hypot(y) <= 0.3 - 2.0 * h);
        let p = p.with_seeds(vec![seed]).unwrap();
        let out = minimize_smmu(&p).unwrap();
        let info = out.smmu.unwrap();
        assert!(info.c > 1.0);
        assert!(info.barrier_violation <= 1e-6 * (1.0 + info.c));
    }

    #[test]
    fn point_mass_single_atom_matches_radial_profile() {
        let h = 1.0 / 64.0;
        let mu = Measure::atom(0.0, 0.0, PI);
        let spec = auto_spec(&mu, h, 8.0 * h).unwrap();
        let p = PhaseProblem::new(vec![mu], spec, None).unwrap();
        let out = point_mass_qd(&p).unwrap();
        assert!(out.report.overall, "{:#?}", out.report.checks);
        // corrected u ~ exact point-mass profile away from the singular node
        let rr = 1.0; // R = sqrt(pi/pi)
        let mut worst = 0.0f64;
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let r = spec.x(i).hypot(spec.y(j));
                if r >= 4.0 * h {
                    let exact = if r >= rr {
                        0.0
                    } else {
                        (rr / r).ln() / 2.0 + (r * r - rr * rr) / 4.0
                    };
                    worst = worst.max((out.state.u[0].at(i, j) - exact).abs());
                }
            }
        }
        assert!(worst <= 4.0 * h, "worst = {worst}");
    }
}
