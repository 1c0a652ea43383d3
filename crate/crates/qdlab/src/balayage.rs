//! One-phase partial balayage via the obstacle problem.
//!
//! `W` is the smallest non-negative function with `-lap W >= mu - rho` in
//! `D` (zero outside), computed by projected SOR. The swept measure
//! decomposes as `rho` on the non-contact set `omega = {W > 0}`, the
//! untouched part of `mu` off `omega`, and a boundary layer `nu` where
//! `omega` is pinched against the boundary of `D`.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Mask};
use crate::measure::{mollify, Measure};
use crate::potential::{mollified_atom_potential, solver_density, unit_ball_volume};
use crate::solver::{sor_solve, sor_solve_cascade, SorOptions};
use crate::verify::{CheckResult, ReportStatus, VerificationReport};

/// Background density swept to: a constant or a full grid field.
#[derive(Debug, Clone)]
pub enum Rho {
    Const(f64),
    Field(GridFunction),
}

impl Rho {
    pub fn one() -> Self {
        Rho::Const(1.0)
    }

    pub fn as_field(&self, spec: GridSpec) -> Result<GridFunction> {
        match self {
            Rho::Const(c) => Ok(GridFunction::from_fn(spec, |_, _| *c)),
            Rho::Field(g) => {
                if !g.spec.same_layout(&spec) {
                    return Err(Error::GridMismatch("rho grid must match the solve grid".into()));
                }
                Ok(g.clone())
            }
        }
    }

    pub fn max_abs(&self, spec: GridSpec) -> f64 {
        match self {
            Rho::Const(c) => c.abs(),
            Rho::Field(g) => {
                let _ = spec;
                g.max_abs()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BalayageResult {
    /// Obstacle-problem solution `W >= 0`, zero outside `D`.
    pub w: GridFunction,
    /// `V = U^mu - W`.
    pub v: GridFunction,
    /// Non-contact set `{W > tau_pos}`.
    pub omega: Mask,
    /// The `rho * chi_omega` part of the swept measure.
    pub bal_density: GridFunction,
    /// The part of `mu` left untouched off `omega`.
    pub bal_untouched: Measure,
    /// Boundary layer on the nodes just outside `D` along `omega`.
    pub bal_boundary: Measure,
    /// Positivity cutoff used for `omega`.
    pub tau_pos: f64,
    /// Final complementarity residual and sweep count of the solve.
    pub residual: f64,
    pub sweeps: usize,
    /// Mollification radius used for atoms.
    pub epsilon: f64,
    /// Grid form of `mu` used by the solver (atoms rasterized so that the
    /// discrete potential matches the closed-form disk potential).
    pub mu_solver: GridFunction,
    /// Plain mollified density of `mu` (non-negative), for mass accounting.
    pub mu_mollified: GridFunction,
    /// The background density as a field.
    pub rho: GridFunction,
    /// Total mass of `mu`.
    pub mass_mu: f64,
}

impl BalayageResult {
    /// Area `h^2 * #omega`.
    pub fn area_omega(&self) -> f64 {
        self.omega.area()
    }
}

/// Smallest grid box guaranteed not to clip the non-contact set: center of
/// mass of `mu` plus-minus `R2 + 4 eps`, where `R2 = R1 + sqrt(M / pi)`
/// bounds the one-phase domain of any measure of mass `M` supported in
/// `B_{R1}`.
pub fn auto_spec(mu: &Measure, h: f64, eps: f64) -> Result<GridSpec> {
    let (cx, cy) = mu
        .center_of_mass()
        .ok_or_else(|| Error::InvalidArgument("auto box needs a nonzero measure".into()))?;
    let r1 = mu.support_radius_about(cx, cy) + eps;
    let r2 = r1 + (mu.total_mass() / unit_ball_volume(2)).sqrt();
    let half = r2 + 4.0 * eps;
    let n = (2.0 * half / h).ceil() as usize + 1;
    GridSpec::new(cx - (n - 1) as f64 * h / 2.0, cy - (n - 1) as f64 * h / 2.0, n, n, h)
}

/// Partial balayage of `mu` in `d` (None = the whole grid) against `rho`.
///
/// Atoms are mollified to radius `eps` (default `8h`). `init` warm-starts
/// the solver; the solution does not depend on it.
pub fn partial_balayage(
    mu: &Measure,
    d: Option<&Mask>,
    rho: &Rho,
    spec: GridSpec,
    eps: Option<f64>,
    init: Option<&GridFunction>,
) -> Result<BalayageResult> {
    mu.validate()?;
    let eps = eps.unwrap_or(8.0 * spec.h);
    if let Some(m) = d {
        if !m.spec.same_layout(&spec) {
            return Err(Error::GridMismatch("domain mask grid must match the solve grid".into()));
        }
    }

    let rho_field = rho.as_field(spec)?;
    let mu_solver = if mu.is_zero() {
        GridFunction::zeros(spec)
    } else {
        solver_density(mu, eps, spec)?
    };
    let mu_mollified = if mu.is_zero() {
        GridFunction::zeros(spec)
    } else {
        mollify(mu, eps, spec)?.density
    };

    // f = mu - rho on the solve grid
    let mut f = mu_solver.clone();
    for (v, r) in f.values.iter_mut().zip(&rho_field.values) {
        *v -= r;
    }

    let scale = f.max_abs();
    let tol = 1e-8 * (1.0 + scale);
    let active = match d {
        Some(m) => m.clone(),
        None => Mask::full(spec),
    };
    let opts = SorOptions {
        omega: 1.8,
        tol,
        max_sweeps: 200 * spec.nx.max(spec.ny),
        project: true,
    };
    let mut w;
    let out = match init {
        Some(g) if g.spec.same_layout(&spec) => {
            w = g.clone();
            sor_solve(&f, &active, &mut w, &opts)
        }
        _ => {
            w = GridFunction::zeros(spec);
            sor_solve_cascade(&f, &active, &mut w, &opts)
        }
    };
    if !out.converged {
        return Err(Error::NonConvergence(format!(
            "partial balayage residual {} after {} sweeps (tol {tol})",
            out.residual, out.sweeps
        )));
    }

    let tau_pos = 1e-7 * (1.0 + rho.max_abs(spec));
    let omega = Mask::positivity(&w, tau_pos);
    // the outermost ring is clamped to zero, so "touching" means the
    // non-contact set reaches the ring next to it
    if d.is_none() && omega.dilate().touches_box_boundary() {
        return Err(Error::BoxTooSmall(
            "non-contact set reaches the box boundary; enlarge the grid".into(),
        ));
    }

    // V = U^mu - W with the closed-form mollified potential
    let u_pot = if mu.is_zero() {
        GridFunction::zeros(spec)
    } else {
        mollified_atom_potential(mu, eps, spec)?
    };
    let mut v = u_pot;
    for (a, b) in v.values.iter_mut().zip(&w.values) {
        *a -= b;
    }

    // decomposition: rho on omega ...
    let mut bal_density = GridFunction::zeros(spec);
    for k in 0..spec.len() {
        if omega.inside[k] {
            bal_density.values[k] = rho_field.values[k];
        }
    }
    // ... untouched mu off omega ...
    let mut untouched = GridFunction::zeros(spec);
    for k in 0..spec.len() {
        if !omega.inside[k] {
            untouched.values[k] = mu_mollified.values[k];
        }
    }
    // ... and the layer just outside D where omega is pinched against the
    // domain boundary: nu = (mu - rho + lap W)^+ there.
    let lap_w = w.laplacian();
    let mut nu_atoms = Vec::new();
    if d.is_some() {
        let h2 = spec.h * spec.h;
        for j in 1..spec.ny - 1 {
            for i in 1..spec.nx - 1 {
                let k = spec.idx(i, j);
                if active.inside[k] {
                    continue;
                }
                let near_omega = omega.inside[k - 1]
                    || omega.inside[k + 1]
                    || omega.inside[k - spec.nx]
                    || omega.inside[k + spec.nx];
                if !near_omega {
                    continue;
                }
                let val = mu_solver.values[k] - rho_field.values[k] + lap_w.values[k];
                if val > 0.0 {
                    nu_atoms.push((spec.x(i), spec.y(j), val * h2));
                }
            }
        }
    }

    Ok(BalayageResult {
        w,
        v,
        omega,
        bal_density,
        bal_untouched: Measure::from_density(untouched),
        bal_boundary: Measure::from_atoms(nu_atoms),
        tau_pos,
        residual: out.residual,
        sweeps: out.sweeps,
        epsilon: eps,
        mu_solver,
        mu_mollified,
        rho: rho_field,
        mass_mu: mu.total_mass(),
    })
}

/// The non-contact set `{W > tau_pos}`.
pub fn noncontact_set(result: &BalayageResult) -> Mask {
    result.omega.clone()
}

/// Assemble the three decomposition parts into one measure.
pub fn balayage_measure(result: &BalayageResult) -> Result<Measure> {
    let swept = Measure::from_density(result.bal_density.clone());
    swept.plus(&result.bal_untouched)?.plus(&result.bal_boundary)
}

/// Mollification stability: `V` and `omega` must not depend on the
/// mollification radius while the mollified support stays inside `omega`.
pub fn check_mollification_stability(
    mu: &Measure,
    d: Option<&Mask>,
    rho: &Rho,
    spec: GridSpec,
    eps_list: &[f64],
) -> Result<VerificationReport> {
    let base = partial_balayage(mu, d, rho, spec, None, None)?;

    // precondition: supp(mu) strictly inside omega
    let mut margin = f64::INFINITY;
    for (px, py) in mu.support_points() {
        let outside = base.omega.complement();
        if let Some(dist) = outside.distance_to(px, py) {
            margin = margin.min(dist);
        }
        if base
            .omega
            .spec
            .nearest(px, py)
            .map_or(true, |(i, j)| !base.omega.inside[base.omega.spec.idx(i, j)])
        {
            margin = 0.0;
        }
    }
    let mut report = VerificationReport::new();
    if !(margin > 0.0) || eps_list.iter().any(|e| *e >= margin / 2.0) {
        report.status = ReportStatus::NotApplicable;
        report.checks.push(CheckResult {
            name: "mollification-margin".into(),
            worst_residual: margin,
            threshold: 2.0 * eps_list.iter().cloned().fold(0.0, f64::max),
            pass: false,
            worst_node: None,
        });
        return Ok(report);
    }

    let v_scale = 1e-6 * (1.0 + base.v.max_abs());
    for &eps in eps_list {
        let run = partial_balayage(mu, d, rho, spec, Some(eps), None)?;
        let sup_dv = base
            .v
            .values
            .iter()
            .zip(&run.v.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        report.push_check(
            &format!("V-stability eps={eps}"),
            sup_dv,
            v_scale,
            sup_dv <= v_scale,
            None,
        );
        let sd = base.omega.symdiff_count(&run.omega);
        report.push_check(
            &format!("omega-stability eps={eps}"),
            sd as f64,
            0.0,
            sd == 0,
            None,
        );
    }
    report.finish();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn t() -> f64 {
        4.0 * PI / 9.0
    }

    /// One-phase profile of `t * delta_0` against rho = 1:
    /// `W(r) = (t/2pi) ln(R/r) + (r^2 - R^2)/4` inside `R = sqrt(t/pi)`.
    fn radial_w(tmass: f64, r: f64) -> f64 {
        let rr = (tmass / PI).sqrt();
        if r >= rr {
            0.0
        } else {
            tmass / (2.0 * PI) * (rr / r).ln() + (r * r - rr * rr) / 4.0
        }
    }

    #[test]
    fn ball_radius_two_thirds() {
        let h = 1.0 / 64.0;
        let spec = auto_spec(&Measure::atom(0.0, 0.0, t()), h, 8.0 * h).unwrap();
        let res = partial_balayage(&Measure::atom(0.0, 0.0, t()), None, &Rho::one(), spec, None, None).unwrap();
        let r_meas = (res.area_omega() / PI).sqrt();
        assert!((r_meas - 2.0 / 3.0).abs() <= 2.0 * h, "r = {r_meas}");
        // boundary deviation from the circle r = 2/3
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let k = spec.idx(i, j);
                let r = spec.x(i).hypot(spec.y(j));
                if res.omega.inside[k] {
                    assert!(r <= 2.0 / 3.0 + 3.0 * h);
                } else {
                    // outside nodes may not sit deep inside the disk
                    assert!(r >= 2.0 / 3.0 - 3.0 * h || !res.omega.inside[k]);
                }
            }
        }
        // mass/area law
        assert!((res.area_omega() - t()).abs() <= 0.05 * t());
    }

    #[test]
    fn subcritical_density_is_untouched() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::new(-1.0, -1.0, 65, 65, h).unwrap();
        let d = GridFunction::from_fn(spec, |x, y| if x.hypot(y) < 0.5 { 0.8 } else { 0.0 });
        let mu = Measure::from_density(d);
        let res = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        assert!(res.w.max_abs() == 0.0);
        assert_eq!(res.omega.count(), 0);
        let bal = balayage_measure(&res).unwrap();
        assert!((bal.total_mass() - mu.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn radial_oracle_for_pi_atom() {
        // t = pi: R = 1
        let h = 1.0 / 64.0;
        let eps = 8.0 * h;
        let mu = Measure::atom(0.0, 0.0, PI);
        let spec = auto_spec(&mu, h, eps).unwrap();
        let res = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        let mut worst = 0.0f64;
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let r = spec.x(i).hypot(spec.y(j));
                if r >= 2.0 * eps {
                    worst = worst.max((res.w.at(i, j) - radial_w(PI, r)).abs());
                }
            }
        }
        assert!(worst <= 3.0 * h, "worst = {worst}");
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let h = 1.0 / 32.0;
        let mu = Measure::atom(0.0, 0.0, t());
        let spec = auto_spec(&mu, h, 8.0 * h).unwrap();
        let cold = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        let warm = partial_balayage(&mu, None, &Rho::one(), spec, None, Some(&cold.w)).unwrap();
        assert_eq!(cold.omega.symdiff_count(&warm.omega), 0);
        let dv: f64 = cold
            .w
            .values
            .iter()
            .zip(&warm.w.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dv < 1e-6);
    }

    #[test]
    fn constrained_domain_produces_boundary_layer() {
        // D = B_0.5: the 2/3-ball cannot fit, mass piles up on the rim
        let h = 1.0 / 64.0;
        let mu = Measure::atom(0.0, 0.0, t());
        let spec = GridSpec::new(-1.0, -1.0, 129, 129, h).unwrap();
        let d = Mask::from_fn(spec, |x, y| x.hypot(y) < 0.5);
        let res = partial_balayage(&mu, Some(&d), &Rho::one(), spec, None, None).unwrap();
        assert!(res.omega.is_subset_of(&d));
        let nu = res.bal_boundary.total_mass();
        assert!(nu > 0.0, "expected a boundary layer");
        // mass accounting: nu ~ |mu| - |omega| up to an O(h) rim layer
        let gap = (nu - (t() - res.area_omega())).abs();
        assert!(gap <= 0.15 * t(), "nu = {nu}, |omega| = {}", res.area_omega());
        // nu sits on nodes just outside D
        for &(x, y, _) in &res.bal_boundary.atoms {
            let r = x.hypot(y);
            assert!((r - 0.5).abs() <= 2.0 * h, "nu node at r = {r}");
        }
    }

    #[test]
    fn complementarity_residual_is_small() {
        let h = 1.0 / 32.0;
        let mu = Measure::atom(0.1, -0.05, 1.0);
        let spec = auto_spec(&mu, h, 8.0 * h).unwrap();
        let res = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        let scale = res
            .mu_solver
            .values
            .iter()
            .zip(&res.rho.values)
            .map(|(m, r)| (m - r).abs())
            .fold(0.0f64, f64::max);
        assert!(res.residual <= 1e-7 * (1.0 + scale));
    }

    #[test]
    fn monotone_in_measure_and_domain() {
        let h = 1.0 / 32.0;
        let spec = GridSpec::new(-1.5, -1.5, 97, 97, h).unwrap();
        let small = Measure::atom(0.0, 0.0, 0.8);
        let big = Measure::from_atoms(vec![(0.0, 0.0, 0.8), (0.3, 0.2, 0.5)]);
        let rs = partial_balayage(&small, None, &Rho::one(), spec, None, None).unwrap();
        let rb = partial_balayage(&big, None, &Rho::one(), spec, None, None).unwrap();
        for k in 0..spec.len() {
            assert!(rs.w.values[k] <= rb.w.values[k] + 1e-7);
        }
        assert!(rs.omega.is_subset_of(&rb.omega));

        let d2 = Mask::from_fn(spec, |x, y| x.hypot(y) < 0.6);
        let d1 = Mask::from_fn(spec, |x, y| x.hypot(y) < 1.0);
        let r2 = partial_balayage(&small, Some(&d2), &Rho::one(), spec, None, None).unwrap();
        let r1 = partial_balayage(&small, Some(&d1), &Rho::one(), spec, None, None).unwrap();
        for k in 0..spec.len() {
            assert!(r1.w.values[k] >= r2.w.values[k] - 1e-7);
        }
        assert!(r2.omega.is_subset_of(&r1.omega.intersect(&d2)));
    }

    #[test]
    fn mollification_stability_report() {
        let h = 1.0 / 64.0;
        let mu = Measure::atom(0.0, 0.0, t());
        let spec = auto_spec(&mu, h, 16.0 * h).unwrap();
        let rep = check_mollification_stability(
            &mu,
            None,
            &Rho::one(),
            spec,
            &[4.0 * h, 8.0 * h, 16.0 * h],
        )
        .unwrap();
        assert!(rep.overall, "{:?}", rep.checks);

        // eps too large for the margin -> NOT_APPLICABLE
        let rep2 =
            check_mollification_stability(&mu, None, &Rho::one(), spec, &[1.0]).unwrap();
        assert_eq!(rep2.status, ReportStatus::NotApplicable);
    }

    #[test]
    fn ball_criterion_nodes_land_in_omega() {
        let h = 1.0 / 64.0;
        let mu = Measure::atom(0.0, 0.0, t());
        let spec = auto_spec(&mu, h, 8.0 * h).unwrap();
        assert!(crate::measure::ball_criterion(&mu, 0.0, 0.0, 0.3));
        let res = partial_balayage(&mu, None, &Rho::one(), spec, None, None).unwrap();
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                if spec.x(i).hypot(spec.y(j)) <= 0.3 {
                    assert!(res.omega.inside[spec.idx(i, j)]);
                }
            }
        }
    }

    #[test]
    fn box_too_small_is_detected() {
        let spec = GridSpec::new(-0.5, -0.5, 65, 65, 1.0 / 64.0).unwrap();
        let err = partial_balayage(&Measure::atom(0.0, 0.0, t()), None, &Rho::one(), spec, None, None);
        assert!(matches!(err, Err(Error::BoxTooSmall(_))));
    }
}
