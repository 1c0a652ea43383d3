//! Closed-form machinery for the planar examples: radial annulus profiles
//! and their energies, the equal-energy root, the ring-system nonexistence
//! search, and the sector junction threshold with its angular barrier.

use rayon::prelude::*;
use serde::Serialize;

use crate::balayage::{partial_balayage, BalayageResult, Rho};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Mask};
use crate::measure::Measure;
use crate::multiphase::{minimize_sm, PhaseProblem, SegregatedState, TAU_POS};
use crate::verify::{check_strong_mqd, MqdOptions, VerificationReport};

use std::f64::consts::PI;

/// Radial annulus profile: `W(R1,R2,|x|)` is the one-phase balayage of the
/// ring measure `(R2^2 / 2 R1) H^1|_{partial B_{R1}}`, supported on
/// `B_{R2}` and vanishing to second order at `R2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnnulusProfile {
    pub r1: f64,
    pub r2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl AnnulusProfile {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(0.0 < r1 && r1 < r2) {
            return Err(Error::InvalidArgument(format!("need 0 < R1 < R2, got ({r1}, {r2})")));
        }
        Ok(AnnulusProfile {
            r1,
            r2,
            c1: (r2 * r2 / 2.0) * (r2 / r1).ln() - r2 * r2 / 4.0,
            c2: -r2 * r2 / 2.0,
            c3: (r2 * r2 / 2.0) * r2.ln() - r2 * r2 / 4.0,
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < self.r1 {
            r * r / 4.0 + self.c1
        } else if r < self.r2 {
            r * r / 4.0 + self.c2 * r.ln() + self.c3
        } else {
            0.0
        }
    }

    /// Radial derivative (one-sided from the left at the branch points).
    pub fn deriv(&self, r: f64) -> f64 {
        if r < self.r1 {
            r / 2.0
        } else if r < self.r2 {
            r / 2.0 + self.c2 / r
        } else {
            0.0
        }
    }

    /// The generating ring measure's total mass, `pi R2^2`.
    pub fn mass(&self) -> f64 {
        PI * self.r2 * self.r2
    }
}

/// `W(R1, R2, r)` — the three-branch piecewise profile.
pub fn radial_w(r1: f64, r2: f64, r: f64) -> Result<f64> {
    Ok(AnnulusProfile::new(r1, r2)?.eval(r))
}

/// Energy of the annulus profile,
/// `J = pi/8 (3 R2^4 - 4 R2^4 ln(R2/R1) - 4 R1^2 R2^2)`.
pub fn radial_energy(r1: f64, r2: f64) -> Result<f64> {
    if !(0.0 < r1 && r1 < r2) {
        return Err(Error::InvalidArgument(format!("need 0 < R1 < R2, got ({r1}, {r2})")));
    }
    let r2_4 = r2.powi(4);
    Ok(PI / 8.0 * (3.0 * r2_4 - 4.0 * r2_4 * (r2 / r1).ln() - 4.0 * r1 * r1 * r2 * r2))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, fa, m, fm, flm, left, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, frm, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, fa, b, fb, fm);
    rec(f, a, fa, b, fb, fm, whole, tol, 40)
}

/// Independent quadrature oracle for the energy:
/// `-2 pi int_0^{R2} r W'(r)^2 dr`, integrated branch by branch with
/// adaptive Simpson.
pub fn radial_energy_quadrature(r1: f64, r2: f64) -> Result<f64> {
    let p = AnnulusProfile::new(r1, r2)?;
    let g = move |r: f64| {
        let d = p.deriv(r);
        r * d * d
    };
    let scale = r2.powi(4);
    let inner = adaptive_simpson(&g, 0.0, r1, 1e-12 * scale);
    let outer = adaptive_simpson(&g, r1, r2, 1e-12 * scale);
    Ok(-2.0 * PI * (inner + outer))
}

/// Root `R` of `radial_energy(R, 17) = radial_energy(4, 16)` in `(5, 5.1)`,
/// bisected to the given interval width.
pub fn solve_equal_energy_tol(tol: f64) -> Result<f64> {
    let target = radial_energy(4.0, 16.0)?;
    let g = |r: f64| radial_energy(r, 17.0).map(|e| e - target);
    let (mut lo, mut hi) = (5.0, 5.1);
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if glo.signum() == ghi.signum() {
        return Err(Error::VerificationFailed(format!(
            "no sign change on [5, 5.1]: g(5) = {glo}, g(5.1) = {ghi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid)?.signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Equal-energy root at the default interval tolerance `1e-10`.
pub fn solve_equal_energy() -> Result<f64> {
    solve_equal_energy_tol(1e-10)
}

/// Residual vector of the ring system for the pair
/// `mu_1 = mu_(4,16)`, `mu_2 = mu_(R,17)` at radii `0 <= r1 < 4 < r2 < R <
/// r3 <= 17`: the two jump conditions, the interface gradient relation, and
/// the area match, after eliminating the branch constants `d1..d8`.
pub fn ring_residual_vec(r1: f64, r2: f64, r3: f64, r: f64) -> [f64; 4] {
    // r1^2 ln(...) terms extend continuously to r1 = 0
    let r1l = if r1 > 0.0 {
        2.0 * r1 * r1 * (r2 / r1).ln()
    } else {
        0.0
    };
    let f1 = r1l + r1 * r1 - r2 * r2 + 512.0 * (r2 / 4.0).ln();
    let d3 = {
        let num = if r1 > 0.0 {
            2.0 * r1 * r1 * (4.0 / r1).ln() + r1 * r1 - r2 * r2
        } else {
            -r2 * r2
        };
        num / (4.0 * (r2 / 4.0).ln())
    };
    let d5 = (2.0 * r3 * r3 * (r3 / r).ln() + r2 * r2 - r3 * r3) / (4.0 * (r / r2).ln());
    let f2 = d3 + d5 + r2 * r2;
    let f3 = -2.0 * r3 * r3 * (r3 / r2).ln() + r3 * r3 - r2 * r2 + 578.0 * (r / r2).ln();
    let f4 = PI * (r3 * r3 - 2.0 * r2 * r2 + r1 * r1 - 33.0);
    [f1, f2, f3, f4]
}

/// Euclidean norm of [`ring_residual_vec`].
pub fn ring_residual(r1: f64, r2: f64, r3: f64, r: f64) -> f64 {
    let v = ring_residual_vec(r1, r2, r3, r);
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    pub min_residual: f64,
    pub argmin: (f64, f64, f64),
    pub rounds: usize,
    /// Largest `r2` seen among scanned triples whose first jump-condition
    /// residual is within `1e-3` (must stay below 4.2).
    pub max_r2_near_jump: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceReport {
    pub resolution: usize,
    pub equal_energy_root: f64,
    /// `r1 > 0` branch.
    pub positive_branch: BranchReport,
    /// `r1 = 0` branch (area constraint `r3^2 = 33 + 2 r2^2` enters the
    /// residual the same way).
    pub zero_branch: BranchReport,
    /// Overall minimum residual norm; strictly positive means the system
    /// has no solution in the admissible box.
    pub min_residual: f64,
}

struct ScanBest {
    res: f64,
    at: (f64, f64, f64),
    max_r2: Option<f64>,
}

fn scan_branch(
    ranges: [(f64, f64); 3],
    resolution: [usize; 3],
    r: f64,
) -> ScanBest {
    let coord = |(lo, hi): (f64, f64), n: usize, t: usize| lo + (hi - lo) * (t as f64 + 0.5) / n as f64;
    (0..resolution[0])
        .into_par_iter()
        .map(|i| {
            let r1 = coord(ranges[0], resolution[0], i);
            let mut best = ScanBest {
                res: f64::INFINITY,
                at: (0.0, 0.0, 0.0),
                max_r2: None,
            };
            for j in 0..resolution[1] {
                let r2 = coord(ranges[1], resolution[1], j);
                let f1 = ring_residual_vec(r1, r2, r + 1.0, r)[0]; // f1 is r3-free
                if f1.abs() <= 1e-3 {
                    best.max_r2 = Some(best.max_r2.map_or(r2, |m: f64| m.max(r2)));
                }
                for k in 0..resolution[2] {
                    let r3 = coord(ranges[2], resolution[2], k);
                    let v = ring_residual(r1, r2, r3, r);
                    if v < best.res {
                        best.res = v;
                        best.at = (r1, r2, r3);
                    }
                }
            }
            best
        })
        .reduce(
            || ScanBest {
                res: f64::INFINITY,
                at: (0.0, 0.0, 0.0),
                max_r2: None,
            },
            |a, b| {
                let max_r2 = match (a.max_r2, b.max_r2) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, None) => x,
                    (None, y) => y,
                };
                // deterministic tie-break: smaller residual, then lexicographic
                let pick_a = a.res < b.res
                    || (a.res == b.res
                        && (a.at.0, a.at.1, a.at.2) <= (b.at.0, b.at.1, b.at.2));
                let mut out = if pick_a { a } else { b };
                out.max_r2 = max_r2;
                out
            },
        )
}

fn refine(
    mut ranges: [(f64, f64); 3],
    outer: [(f64, f64); 3],
    resolution: [usize; 3],
    r: f64,
    rounds: usize,
) -> BranchReport {
    let mut best = scan_branch(ranges, resolution, r);
    let mut max_r2 = best.max_r2;
    for _ in 0..rounds {
        for c in 0..3 {
            let step = (ranges[c].1 - ranges[c].0) / resolution[c] as f64;
            let center = [best.at.0, best.at.1, best.at.2][c];
            ranges[c] = (
                (center - 1.5 * step).max(outer[c].0),
                (center + 1.5 * step).min(outer[c].1),
            );
        }
        let b = scan_branch(ranges, resolution, r);
        if b.res < best.res {
            best = b;
        }
        if let Some(m) = best.max_r2 {
            max_r2 = Some(max_r2.map_or(m, |x: f64| x.max(m)));
        }
    }
    BranchReport {
        min_residual: best.res,
        argmin: best.at,
        rounds,
        max_r2_near_jump: max_r2,
    }
}

/// Exhaustive residual scan of the ring system over
/// `(r1, r2, r3) in [0, 4) x (4, R) x (R, 17]` (cell centers) at the given
/// per-axis resolution, with two local refinement rounds around the
/// minimum, for both the `r1 > 0` and `r1 = 0` branches. A strictly
/// positive minimum certifies that no two-phase quadrature domain exists
/// for the equal-energy ring pair.
pub fn nonexistence_search(resolution: usize) -> Result<NonexistenceReport> {
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    let r = solve_equal_energy()?;
    let outer = [(0.0, 4.0), (4.0, r), (r, 17.0)];
    let positive = refine(outer, outer, [resolution; 3], r, 2);

    // r1 = 0: two-dimensional scan (degenerate first axis)
    let outer0 = [(0.0, 0.0), (4.0, r), (r, 17.0)];
    let zero = refine(outer0, outer0, [1, resolution, resolution], r, 2);

    let min_residual = positive.min_residual.min(zero.min_residual);
    Ok(NonexistenceReport {
        resolution,
        equal_energy_root: r,
        positive_branch: positive,
        zero_branch: zero,
        min_residual,
    })
}

/// The barrier radial profile
/// `h_s(r) = (1/4) r^2 ln(r/s) - r^2/16 + s^4/(16 r^2)` on `[s, 1]`.
pub fn barrier_h(s: f64, r: f64) -> Result<f64> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::InvalidArgument(format!("need s in (0,1), got {s}")));
    }
    if !(s <= r && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("need r in [s,1], got {r}")));
    }
    Ok(0.25 * r * r * (r / s).ln() - r * r / 16.0 + s.powi(4) / (16.0 * r * r))
}

/// `h_s'(1) = (1/2) ln(1/s) + 1/8 - s^4/8`, which tends to infinity as
/// `s -> 0`: the barrier's boundary flux can dominate any point mass.
pub fn barrier_hprime1(s: f64) -> Result<f64> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::InvalidArgument(format!("need s in (0,1), got {s}")));
    }
    Ok(0.5 * (1.0 / s).ln() + 0.125 - s.powi(4) / 8.0)
}

/// `f_s` in scaled coordinates for the `s` matched to mass `c` via
/// `h_s'(1) = c`, evaluated in log space so that astronomically small `s`
/// (`ln(1/s) = 2(c - 1/8)`, far below the double-precision floor for large
/// `c`) costs no accuracy. `a` is the scale: the barrier lives on `B_a` and
/// is capped at its `r = a` value outside.
fn fs_matched(c: f64, a: f64, x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    let cos2t = if r > 0.0 {
        (x * x - y * y) / (r * r)
    } else {
        1.0
    };
    let ln1s = 2.0 * (c - 0.125); // s^4 term below the f64 floor for c >= 1
    let rr = (r / a).max(1e-300);
    let hs = if rr <= 1.0 {
        0.25 * rr * rr * (rr.ln() + ln1s) - rr * rr / 16.0
    } else {
        0.25 * ln1s - 1.0 / 16.0
    };
    a * a * hs * cos2t
}

/// A cone problem: mass `c` at `z = 1` in the sector `|theta| < theta0`.
#[derive(Debug, Clone, Copy)]
pub struct SectorProblem {
    pub theta0: f64,
    pub c: f64,
    pub h: f64,
    /// Mollification radius (default `8h`).
    pub eps: Option<f64>,
    /// Masses above this are solved in rescaled coordinates
    /// (`W^{C delta_1}(x) = lambda^2 W^{(C/lambda^2) delta_{1/lambda}}(x/lambda)`),
    /// capping the box size. Default 50.
    pub cap: Option<f64>,
}

impl SectorProblem {
    pub fn new(theta0: f64, c: f64, h: f64) -> Result<Self> {
        if !(0.0 < theta0 && theta0 < PI / 2.0) {
            return Err(Error::InvalidArgument(format!("theta0 must be in (0, pi/2), got {theta0}")));
        }
        if !(c > 0.0 && h > 0.0) {
            return Err(Error::InvalidArgument("C and h must be positive".into()));
        }
        Ok(SectorProblem {
            theta0,
            c,
            h,
            eps: None,
            cap: None,
        })
    }
}

/// Outcome of a sector solve. All grid data live in the *scaled* frame; a
/// physical length is `scale` times a grid length.
#[derive(Debug)]
pub struct SectorOutcome {
    pub bal: BalayageResult,
    pub d: Mask,
    pub spec: GridSpec,
    /// Physical length per scaled-grid length (1 when no rescaling).
    pub scale: f64,
    /// Atom location in the scaled frame (`1/scale`, 0).
    pub atom: (f64, f64),
    /// Scaled mass actually solved.
    pub c_scaled: f64,
}

fn sector_grid(theta0: f64, c_s: f64, a: f64, h: f64, margin: f64) -> Result<(GridSpec, Mask)> {
    // domain monotonicity bounds the saturated set by the free one-phase
    // disk of area c_s centered at the atom (excess mass becomes a wall
    // layer, not extra area), so the box only needs that disk plus margin
    let rad = (c_s / PI).sqrt();
    let l = a + rad + margin;
    // narrow sectors stay inside |y| <= x tan(theta0)
    let half = rad.min(l * theta0.tan()) + margin + 0.1;
    // align so that x = 0 and y = 0 are grid lines
    let nxm = (0.5 / h).ceil() as usize;
    let nxp = (l / h).ceil() as usize;
    let nyh = (half / h).ceil() as usize;
    let spec = GridSpec::new(-(nxm as f64) * h, -(nyh as f64) * h, nxm + nxp + 1, 2 * nyh + 1, h)?;
    let d = Mask::from_fn(spec, |x, y| {
        let r = x.hypot(y);
        r > 0.0 && y.atan2(x).abs() < theta0
    });
    Ok((spec, d))
}

/// Partial balayage of `C delta_1` in the open cone of half-angle `theta0`
/// (Dirichlet data 0 on the cone walls, which rasterize to the nodes with
/// `|theta| >= theta0`). Masses above the cap are rescaled so the box stays
/// bounded; the outcome reports the scale factor. Retries once with a
/// doubled margin if the saturated set reaches the box.
pub fn sector_balayage(p: &SectorProblem) -> Result<SectorOutcome> {
    let cap = p.cap.unwrap_or(50.0);
    let (c_s, a, scale) = if p.c > cap {
        let lambda = (p.c / cap).sqrt();
        (cap, 1.0 / lambda, lambda)
    } else {
        (p.c, 1.0, 1.0)
    };
    let eps = p.eps.unwrap_or(8.0 * p.h);
    let mu = Measure::atom(a, 0.0, c_s);

    let mut margin = 0.4;
    for attempt in 0..2 {
        let (spec, d) = sector_grid(p.theta0, c_s, a, p.h, margin)?;
        let bal = partial_balayage(&mu, Some(&d), &Rho::one(), spec, Some(eps), None)?;
        // the Dirichlet walls legitimately clip omega; only the open outer
        // box must stay clear
        if bal.omega.dilate().touches_box_boundary() && attempt == 0 {
            margin *= 2.0;
            continue;
        }
        if bal.omega.dilate().touches_box_boundary() {
            return Err(Error::BoxTooSmall(
                "saturated set still reaches the outer box after one retry".into(),
            ));
        }
        return Ok(SectorOutcome {
            bal,
            d,
            spec,
            scale,
            atom: (a, 0.0),
            c_scaled: c_s,
        });
    }
    unreachable!()
}

/// Physical distance from the cone tip to the saturated set.
pub fn junction_distance(out: &SectorOutcome) -> f64 {
    let spec = out.spec;
    let mut dist = f64::INFINITY;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if out.bal.omega.inside[spec.idx(i, j)] {
                let (x, y) = spec.node_ij(i, j);
                dist = dist.min(x.hypot(y));
            }
        }
    }
    out.scale * dist
}

/// Does the saturated set of `C delta_1` in the cone reach the tip?
///
/// For `theta0 > pi/4` this is decided by the grid: true iff the physical
/// distance from the origin to `omega` is at most `eps`. For
/// `theta0 <= pi/4` the true gap scales like `exp(-2C)` — positive but far
/// below any grid — so the grid distance cannot certify it; instead the
/// angular barrier `f_s` (matched to `C`, which dominates the solution and
/// vanishes at the tip) is verified against the grid solve and the answer
/// is false. A barrier violation is reported as an error rather than a
/// junction.
pub fn junction_test(theta0: f64, c: f64, h: f64, eps: f64) -> Result<bool> {
    if eps < 2.0 * h {
        return Err(Error::InvalidArgument(format!("eps must be >= 2h, got eps = {eps}, h = {h}")));
    }
    let out = sector_balayage(&SectorProblem::new(theta0, c, h)?)?;
    if theta0 > PI / 4.0 {
        return Ok(junction_distance(&out) <= eps);
    }
    let barrier = barrier_certificate(&out, h);
    if !barrier.overall {
        return Err(Error::VerificationFailed(format!(
            "barrier certificate failed at theta0 = {theta0}, C = {c}: {:?}",
            barrier.checks
        )));
    }
    Ok(false)
}

/// Barrier certificate for a sector solve with `theta0 <= pi/4`: the
/// solution must respect the angular barrier `f_s` (which is non-negative
/// on such cones and vanishes at the tip) with `s` matched to the mass via
/// `h_s'(1) = C`. Verified on the grid as `W <= f_s + tol` over the barrier
/// annulus in the scaled frame, excluding the mollified atom disk where `W`
/// carries the (legitimate) logarithmic spike of `C delta_1`.
pub fn barrier_certificate(out: &SectorOutcome, h: f64) -> VerificationReport {
    let mut report = VerificationReport::new();
    let spec = out.spec;
    let a = out.atom.0;
    let eps = out.bal.epsilon;
    // the barrier is matched to the physical mass; fs_matched then maps it
    // into the scaled frame through `a` (W(x) = lambda^2 W'(x/lambda))
    let c_phys = out.scale * out.scale * out.c_scaled;
    // W <= f_s requires distance >~ e^{-pi} from the atom where the log
    // spike of C Psi(r) crosses the barrier's cap level C/2.
    let guard = (a * (-PI).exp() + 2.0 * eps).max(2.0 * eps);
    let mut worst = f64::NEG_INFINITY;
    let mut node = None;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let k = spec.idx(i, j);
            if !out.d.inside[k] {
                continue;
            }
            let (x, y) = spec.node_ij(i, j);
            let r = x.hypot(y);
            if r < 2.0 * h || (x - a).hypot(y) <= guard {
                continue;
            }
            let v = out.bal.w.values[k] - fs_matched(c_phys, a, x, y);
            if v > worst {
                worst = v;
                node = Some((i, j));
            }
        }
    }
    let tol = BARRIER_TOL_C * h * (1.0 + out.c_scaled);
    report.push_check("W-below-fs-barrier", worst, tol, worst <= tol, node);
    report.finish();
    report
}

/// Grid-tolerance constant for the barrier check
/// (`tol = c * h * (1 + C_scaled)`, on the scaled-frame magnitude of `f_s`).
pub const BARRIER_TOL_C: f64 = 0.1;

/// Symmetric `m`-phase quadrature domain for point masses `C` at the `m`-th
/// roots of unity: solve one sector (half-angle `pi/m`), build the phases
/// by rotating the sector solution (bilinear resampling), and relax the
/// assembly with the coupled minimizer. Returns the state on a shared
/// square grid together with its certification report.
pub fn symmetric_mqd(m: usize, c: f64, h: f64) -> Result<(SegregatedState, VerificationReport)> {
    if m < 2 {
        return Err(Error::InvalidArgument("need m >= 2 phases".into()));
    }
    let theta0 = PI / m as f64;
    let out = sector_balayage(&SectorProblem::new(theta0, c, h)?)?;
    if out.scale != 1.0 {
        return Err(Error::InvalidArgument(
            "symmetric_mqd supports masses up to the sector cap (50)".into(),
        ));
    }

    // shared square grid covering the union of all rotated sectors
    let rad = 1.0 + (c / PI).sqrt() + 0.4;
    let nh = (rad / h).ceil() as usize;
    let spec = GridSpec::new(-(nh as f64) * h, -(nh as f64) * h, 2 * nh + 1, 2 * nh + 1, h)?;

    let sample = |x: f64, y: f64| -> f64 {
        // bilinear interpolation of the sector solution, 0 outside its box
        let s = out.spec;
        let fx = (x - s.x0) / s.h;
        let fy = (y - s.y0) / s.h;
        if fx < 0.0 || fy < 0.0 || fx > (s.nx - 1) as f64 || fy > (s.ny - 1) as f64 {
            return 0.0;
        }
        let i0 = (fx.floor() as usize).min(s.nx - 2);
        let j0 = (fy.floor() as usize).min(s.ny - 2);
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let w = &out.bal.w;
        (1.0 - tx) * (1.0 - ty) * w.at(i0, j0)
            + tx * (1.0 - ty) * w.at(i0 + 1, j0)
            + (1.0 - tx) * ty * w.at(i0, j0 + 1)
            + tx * ty * w.at(i0 + 1, j0 + 1)
    };

    let mut u = Vec::with_capacity(m);
    let mut atoms = Vec::with_capacity(m);
    for jph in 0..m {
        let ang = 2.0 * PI * jph as f64 / m as f64;
        let (ca, sa) = (ang.cos(), ang.sin());
        atoms.push(Measure::atom(ca, sa, c));
        let g = GridFunction::from_fn(spec, |x, y| {
            // rotate back into the base sector frame
            let (rx, ry) = (ca * x + sa * y, -sa * x + ca * y);
            sample(rx, ry).max(0.0)
        });
        u.push(g);
    }

    // Make the rotated copies disjoint: phase j keeps a node iff the node's
    // angle is within the sector half-angle of its atom direction. (Wall
    // nodes, at exactly the half-angle, stay zero for every phase.)
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let k = spec.idx(i, j);
            let (x, y) = spec.node_ij(i, j);
            let phi = y.atan2(x);
            for (jph, g) in u.iter_mut().enumerate() {
                let ang = 2.0 * PI * jph as f64 / m as f64;
                let mut d = (phi - ang).rem_euclid(2.0 * PI);
                if d > PI {
                    d = 2.0 * PI - d;
                }
                if d >= theta0 {
                    g.values[k] = 0.0;
                }
            }
        }
    }

    // The rotated copies are only an approximate fixed point: bilinear
    // resampling puts each copy's discrete wall layer on a different jagged
    // band, so the interface measures of adjacent phases do not cancel
    // node-by-node. Relaxing with the coupled minimizer (warm-started, so
    // this costs a couple of cheap cycles) makes adjacent phases share the
    // same rasterized wall, which is what the certificate requires.
    let init = SegregatedState { u, tau_pos: TAU_POS };
    // The walls between adjacent phases are not grid-aligned, so their
    // discrete interface layers cancel only up to a staircase dipole of
    // size O(|grad u| / h). The certificate allowance scales with the
    // mollified atom's sup (~ C / eps^2), so use the finest resolvable
    // mollification (eps = 4h) to keep the allowance above that dipole.
    let problem = PhaseProblem::new(atoms, spec, Some(4.0 * h))?;
    let outcome = minimize_sm(&problem, Some(init))?;
    let report = check_strong_mqd(&outcome.state, &problem, &MqdOptions::default())?;
    Ok((outcome.state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn annulus_profile_normalization() {
        for &(r1, r2) in &[(4.0, 16.0), (1.0, 2.0), (0.3, 5.0)] {
            let p = AnnulusProfile::new(r1, r2).unwrap();
            assert!(p.eval(r2).abs() <= 1e-12 * r2 * r2);
            // W'(R2-) = 0
            let d = p.deriv(r2 - 1e-9);
            assert!(d.abs() <= 1e-6, "d = {d}");
            assert!((p.eval(0.0) - p.c1).abs() == 0.0);
        }
    }

    #[test]
    fn continuity_at_r1_for_random_pairs() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let r1 = rng.gen_range(0.1..8.0);
            let r2 = r1 + rng.gen_range(0.1..8.0);
            let p = AnnulusProfile::new(r1, r2).unwrap();
            let b1 = r1 * r1 / 4.0 + p.c1;
            let b2 = r1 * r1 / 4.0 + p.c2 * r1.ln() + p.c3;
            assert!((b1 - b2).abs() <= 1e-12 * (1.0 + b1.abs()), "{r1} {r2}");
        }
    }

    #[test]
    fn radial_w_solves_the_annulus_ode() {
        // -(W'' + W'/r) = -1 on (R1, R2), via central differences
        let p = AnnulusProfile::new(4.0, 16.0).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        // Richardson-extrapolated central differences: the raw second
        // difference is cancellation-limited near 1e-5 for W = O(100)
        let ode = |r: f64, d: f64| {
            let w2 = (p.eval(r + d) - 2.0 * p.eval(r) + p.eval(r - d)) / (d * d);
            let w1 = (p.eval(r + d) - p.eval(r - d)) / (2.0 * d);
            -(w2 + w1 / r)
        };
        for _ in 0..30 {
            let r = rng.gen_range(4.1..15.9);
            let d = 1e-2;
            let lhs = (4.0 * ode(r, d / 2.0) - ode(r, d)) / 3.0;
            assert!((lhs + 1.0).abs() <= 1e-7, "at r = {r}: {lhs}");
        }
    }

    #[test]
    fn energy_formula_matches_quadrature() {
        for &(r1, r2) in &[(4.0, 16.0), (5.05, 17.0), (1.0, 3.0)] {
            let f = radial_energy(r1, r2).unwrap();
            let q = radial_energy_quadrature(r1, r2).unwrap();
            assert!((f - q).abs() <= 1e-8 * f.abs(), "({r1},{r2}): {f} vs {q}");
            assert!(f < 0.0);
        }
        // R1 -> R2 limit
        let lim = radial_energy(16.0 - 1e-9, 16.0).unwrap();
        assert!((lim + PI * 16.0f64.powi(4) / 8.0).abs() <= 1e-3);
    }

    #[test]
    fn energy_decreasing_in_r2() {
        let mut prev = radial_energy(4.0, 5.0).unwrap();
        for k in 1..40 {
            let e = radial_energy(4.0, 5.0 + 0.3 * k as f64).unwrap();
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn equal_energy_root_in_interval() {
        let r = solve_equal_energy().unwrap();
        assert!(5.0 < r && r < 5.1, "R = {r}");
        let g = radial_energy(r, 17.0).unwrap() - radial_energy(4.0, 16.0).unwrap();
        assert!(g.abs() <= 1e-8 * radial_energy(4.0, 16.0).unwrap().abs());
        let r2 = solve_equal_energy_tol(1e-12).unwrap();
        assert!((r - r2).abs() <= 1e-10);
    }

    #[test]
    fn nonexistence_scan_small_resolution() {
        let rep = nonexistence_search(40).unwrap();
        assert!(rep.min_residual > 0.0, "{rep:#?}");
        if let Some(m) = rep.positive_branch.max_r2_near_jump {
            assert!(m < 4.2, "r2 bound violated: {m}");
        }
        // minimality against random admissible triples
        let mut rng = StdRng::seed_from_u64(3);
        let r = rep.equal_energy_root;
        for _ in 0..100 {
            let r1 = rng.gen_range(0.0..4.0);
            let r2 = rng.gen_range(4.0 + 1e-6..r - 1e-6);
            let r3 = rng.gen_range(r + 1e-6..17.0);
            assert!(ring_residual(r1, r2, r3, r) >= rep.min_residual);
        }
    }

    #[test]
    fn barrier_formulas() {
        for k in 1..=8 {
            let s = 2f64.powi(-k);
            assert!(barrier_h(s, s).unwrap().abs() <= 1e-14);
            // h'_s(s) = 0 by central differences
            let d = 1e-6 * s;
            let hp = (barrier_h(s, s + d).unwrap() - 0.0) / d; // h(s) = 0
            // one-sided; compare with second-order extrapolation
            let hp2 = (barrier_h(s, s + 2.0 * d).unwrap()) / (2.0 * d);
            let limit = 2.0 * hp - hp2;
            assert!(limit.abs() <= 1e-8, "s = {s}: {limit}");
        }
        // h'_s(1) monotone to infinity as s -> 0
        let mut prev = 0.0;
        for k in 1..=40 {
            let v = barrier_hprime1(2f64.powi(-k)).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(prev > 13.0);
        assert!(barrier_h(0.5, 0.2).is_err());
        assert!(barrier_hprime1(1.0).is_err());
    }

    #[test]
    fn wide_sector_small_mass_is_a_free_disk() {
        // theta0 near pi/2, C = 0.5 pi: the free ball of radius sqrt(0.5)
        // around z = 1 fits inside the sector
        let h = 1.0 / 48.0;
        let out = sector_balayage(&SectorProblem::new(PI / 2.0 - 0.01, 0.5 * PI, h).unwrap()).unwrap();
        assert_eq!(out.scale, 1.0);
        let spec = out.spec;
        let r_free = 0.5f64.sqrt();
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let (x, y) = spec.node_ij(i, j);
                let d = (x - 1.0).hypot(y);
                let inside = out.bal.omega.inside[spec.idx(i, j)];
                if d <= r_free - 2.0 * h {
                    assert!(inside, "node ({x},{y}) should be saturated");
                }
                if d >= r_free + 2.0 * h {
                    assert!(!inside, "node ({x},{y}) should be free");
                }
            }
        }
    }

    #[test]
    fn omega_subset_of_sector() {
        let h = 1.0 / 48.0;
        let out = sector_balayage(&SectorProblem::new(PI / 3.0, 10.0, h).unwrap()).unwrap();
        assert!(out.bal.omega.is_subset_of(&out.d));
    }

    #[test]
    fn sector_monotone_in_angle() {
        let h = 1.0 / 48.0;
        let a = sector_balayage(&SectorProblem::new(PI / 5.0, 10.0, h).unwrap()).unwrap();
        let b = sector_balayage(&SectorProblem::new(PI / 3.0, 10.0, h).unwrap()).unwrap();
        // compare on the physical plane: every saturated node of the narrow
        // sector is saturated for the wide one
        let spec = a.spec;
        let mut missing = 0;
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                if a.bal.omega.inside[spec.idx(i, j)] {
                    let (x, y) = spec.node_ij(i, j);
                    let ok = b.spec.nearest(x, y).map_or(false, |(bi, bj)| {
                        b.bal.omega.inside[b.spec.idx(bi, bj)]
                    });
                    if !ok {
                        missing += 1;
                    }
                }
            }
        }
        // rasterization of the two boxes differs; allow a boundary sliver
        assert!(missing <= a.bal.omega.perimeter_nodes(), "missing = {missing}");
    }
}
