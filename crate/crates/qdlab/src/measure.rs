//! Positive measures with compact support: point masses plus an optional
//! bounded density, and their mollifications onto a grid.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

/// A finite positive measure on the plane.
#[derive(Debug, Clone, Default)]
pub struct Measure {
    /// `(x, y, mass)` with `mass > 0`.
    pub atoms: Vec<(f64, f64, f64)>,
    /// Optional non-negative density sampled on a grid (cell value =
    /// density at the node, mass = h^2 * value).
    pub density: Option<GridFunction>,
}

impl Measure {
    pub fn zero() -> Self {
        Measure::default()
    }

    pub fn atom(x: f64, y: f64, mass: f64) -> Self {
        Measure {
            atoms: vec![(x, y, mass)],
            density: None,
        }
    }

    pub fn from_atoms(atoms: Vec<(f64, f64, f64)>) -> Self {
        Measure {
            atoms,
            density: None,
        }
    }

    pub fn from_density(density: GridFunction) -> Self {
        Measure {
            atoms: Vec::new(),
            density: Some(density),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &(x, y, m) in &self.atoms {
            if !(m > 0.0) || !m.is_finite() || !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "atom ({x}, {y}) with mass {m}"
                )));
            }
        }
        if let Some(d) = &self.density {
            if d.values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "density must be non-negative and finite".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
            && self
                .density
                .as_ref()
                .map_or(true, |d| d.values.iter().all(|v| *v == 0.0))
    }

    /// Total mass: atom masses plus the cell sum of the density.
    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.2).sum();
        let dens = self.density.as_ref().map_or(0.0, |d| d.cell_sum());
        atoms + dens
    }

    /// Mass inside the closed ball `B_r(x, y)`.
    pub fn mass_in_ball(&self, x: f64, y: f64, r: f64) -> f64 {
        let mut m: f64 = self
            .atoms
            .iter()
            .filter(|(ax, ay, _)| (ax - x).hypot(ay - y) <= r)
            .map(|a| a.2)
            .sum();
        if let Some(d) = &self.density {
            let h2 = d.spec.h * d.spec.h;
            for j in 0..d.spec.ny {
                for i in 0..d.spec.nx {
                    if (d.spec.x(i) - x).hypot(d.spec.y(j) - y) <= r {
                        m += d.at(i, j) * h2;
                    }
                }
            }
        }
        m
    }

    /// Points spanning the support: atom locations plus nodes where the
    /// density is positive.
    pub fn support_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.atoms.iter().map(|&(x, y, _)| (x, y)).collect();
        if let Some(d) = &self.density {
            for j in 0..d.spec.ny {
                for i in 0..d.spec.nx {
                    if d.at(i, j) > 0.0 {
                        pts.push((d.spec.x(i), d.spec.y(j)));
                    }
                }
            }
        }
        pts
    }

    /// Max distance from `(x, y)` to the support (0 for the zero measure).
    pub fn support_radius_about(&self, x: f64, y: f64) -> f64 {
        self.support_points()
            .iter()
            .map(|(px, py)| (px - x).hypot(py - y))
            .fold(0.0, f64::max)
    }

    pub fn center_of_mass(&self) -> Option<(f64, f64)> {
        let m = self.total_mass();
        if m <= 0.0 {
            return None;
        }
        let mut cx = 0.0;
        let mut cy = 0.0;
        for &(x, y, w) in &self.atoms {
            cx += w * x;
            cy += w * y;
        }
        if let Some(d) = &self.density {
            let h2 = d.spec.h * d.spec.h;
            for j in 0..d.spec.ny {
                for i in 0..d.spec.nx {
                    let w = d.at(i, j) * h2;
                    cx += w * d.spec.x(i);
                    cy += w * d.spec.y(j);
                }
            }
        }
        Some((cx / m, cy / m))
    }

    /// Sum of two measures.
    pub fn plus(&self, other: &Measure) -> Result<Measure> {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(a), Some(b)) => {
                if !a.spec.same_layout(&b.spec) {
                    return Err(Error::GridMismatch(
                        "cannot add densities on different grids".into(),
                    ));
                }
                let mut d = a.clone();
                for (v, w) in d.values.iter_mut().zip(&b.values) {
                    *v += w;
                }
                Some(d)
            }
        };
        Ok(Measure { atoms, density })
    }
}

/// A measure convolved with the normalized indicator of `B_eps`, sampled on
/// a grid.
#[derive(Debug, Clone)]
pub struct MollifiedMeasure {
    pub source: Measure,
    pub epsilon: f64,
    pub density: GridFunction,
}

/// Exact area of the intersection of the disk `B_r(0)` with the axis-aligned
/// rectangle `[x1, x2] x [y1, y2]`.
pub fn disk_rect_area(r: f64, x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    // F(x, y) = signed area of [0,x]x[0,y] inside the disk
    fn g(r: f64, x: f64, y: f64) -> f64 {
        // x, y >= 0
        let x = x.min(r);
        let y = y.min(r);
        if x * x + y * y <= r * r {
            return x * y;
        }
        // boundary crosses the box: split at a = sqrt(r^2 - y^2)
        let a = (r * r - y * y).max(0.0).sqrt();
        let anti = |t: f64| (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).asin()) / 2.0;
        y * a + anti(x) - anti(a)
    }
    fn f(r: f64, x: f64, y: f64) -> f64 {
        x.signum() * y.signum() * g(r, x.abs(), y.abs())
    }
    f(r, x2, y2) - f(r, x1, y2) - f(r, x2, y1) + f(r, x1, y1)
}

/// Convolve `mu` with `(1/|B_eps|) * chi_{B_eps}` and sample on `grid`.
///
/// Atom contributions use the exact area fraction of each cell inside
/// `B_eps(a)`; a density part is convolved cell-by-cell with the same disk
/// kernel. Total mass is preserved to ~1e-10 relative when the grid contains
/// the eps-neighborhood of the support.
pub fn mollify(mu: &Measure, eps: f64, grid: GridSpec) -> Result<MollifiedMeasure> {
    mu.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("mollifier radius {eps}")));
    }
    if grid.h > eps / 4.0 + 1e-14 * eps {
        return Err(Error::InvalidArgument(format!(
            "grid spacing h = {} does not resolve eps = {eps} (need h <= eps/4)",
            grid.h
        )));
    }
    for (px, py) in mu.support_points() {
        if !grid.contains(px - eps, py - eps) || !grid.contains(px + eps, py + eps) {
            return Err(Error::BoxTooSmall(format!(
                "grid does not contain the eps-neighborhood of support point ({px}, {py})"
            )));
        }
    }

    let h = grid.h;
    let ball_area = std::f64::consts::PI * eps * eps;
    let mut out = GridFunction::zeros(grid);

    let deposit = |cx: f64, cy: f64, mass: f64, out: &mut GridFunction| {
        // cells whose square [x-h/2, x+h/2]^2 can intersect B_eps(cx, cy)
        let reach = eps + h;
        let i0 = (((cx - reach) - grid.x0) / h).floor().max(0.0) as usize;
        let j0 = (((cy - reach) - grid.y0) / h).floor().max(0.0) as usize;
        let i1 = ((((cx + reach) - grid.x0) / h).ceil() as usize).min(grid.nx - 1);
        let j1 = ((((cy + reach) - grid.y0) / h).ceil() as usize).min(grid.ny - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let x = grid.x(i) - cx;
                let y = grid.y(j) - cy;
                let a = disk_rect_area(eps, x - h / 2.0, x + h / 2.0, y - h / 2.0, y + h / 2.0);
                if a > 0.0 {
                    // cell carries mass * a / |B_eps|; density = mass / h^2
                    out.values[grid.idx(i, j)] += mass * a / ball_area / (h * h);
                }
            }
        }
    };

    for &(ax, ay, m) in &mu.atoms {
        deposit(ax, ay, m, &mut out);
    }
    if let Some(d) = &mu.density {
        let h2 = d.spec.h * d.spec.h;
        for j in 0..d.spec.ny {
            for i in 0..d.spec.nx {
                let v = d.at(i, j);
                if v > 0.0 {
                    deposit(d.spec.x(i), d.spec.y(j), v * h2, &mut out);
                }
            }
        }
    }

    Ok(MollifiedMeasure {
        source: mu.clone(),
        epsilon: eps,
        density: out,
    })
}

/// Pointwise concentration criterion at a support point.
///
/// True for atoms. For densities, approximated by the max over dyadic radii
/// `r = h * 2^k`, `k = 0..=6`, of the cell-averaged mass ratio against
/// `2^n = 4` (planar case).
pub fn concentration_ok(mu: &Measure, x: f64, y: f64) -> Result<bool> {
    if mu.atoms.iter().any(|&(ax, ay, _)| ax == x && ay == y) {
        return Ok(true);
    }
    let d = mu.density.as_ref().ok_or_else(|| {
        Error::InvalidArgument(format!("({x}, {y}) is not in the support of the measure"))
    })?;
    let on_support = d
        .spec
        .nearest(x, y)
        .map(|(i, j)| d.at(i, j) > 0.0)
        .unwrap_or(false);
    if !on_support {
        return Err(Error::InvalidArgument(format!(
            "({x}, {y}) is not in the support of the measure"
        )));
    }
    let h = d.spec.h;
    for k in 0..=6u32 {
        let r = h * f64::from(1u32 << k);
        let ratio = mu.mass_in_ball(x, y, r) / (std::f64::consts::PI * r * r);
        if ratio > 4.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Ball concentration hypothesis: `supp(mu)` inside `B_r(x)` and
/// `mu(B_r) > 2^n |B_1| r^n` (planar: `> 4 pi r^2`).
pub fn ball_criterion(mu: &Measure, x: f64, y: f64, r: f64) -> bool {
    if mu.is_zero() {
        return false;
    }
    let inside = mu
        .support_points()
        .iter()
        .all(|(px, py)| (px - x).hypot(py - y) <= r);
    inside && mu.total_mass() > 4.0 * std::f64::consts::PI * r * r
}
