//! Fundamental solution, Newtonian potentials on the grid, and Green
//! potentials of node sets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Mask};
use crate::measure::Measure;
use crate::solver::{sor_solve, SorOptions};

/// Fundamental solution of `-lap` in `R^n`:
/// `psi(r) = -(1/2pi) ln r` for n = 2, `1/(n(n-2)|B_1| r^{n-2})` for n >= 3.
pub fn fundamental_solution(r: f64, n: u32) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("psi is singular at r = {r}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension n = {n}")));
    }
    Ok(if n == 2 {
        -r.ln() / (2.0 * std::f64::consts::PI)
    } else {
        let nf = f64::from(n);
        1.0 / (nf * (nf - 2.0) * unit_ball_volume(n) * r.powi(n as i32 - 2))
    })
}

/// Lebesgue volume of the unit ball: `|B_1| = 2 pi^{n/2} / (n Gamma(n/2))`.
pub fn unit_ball_volume(n: u32) -> f64 {
    let pi = std::f64::consts::PI;
    // Gamma(n/2) in closed form: integer or half-integer argument
    let gamma_half_n = if n % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = n / 2;
        (1..k).map(f64::from).product::<f64>()
    } else {
        // Gamma(k + 1/2) = (2k)! / (4^k k!) * sqrt(pi)
        let k = (n - 1) / 2;
        let mut v = pi.sqrt();
        for j in 0..k {
            v *= f64::from(j) + 0.5;
        }
        v
    };
    2.0 * pi.powf(f64::from(n) / 2.0) / (f64::from(n) * gamma_half_n)
}

/// Potential of the uniform unit-mass measure on `B_eps(0)` at distance `r`
/// from the center (planar): equals `psi(r)` outside the disk and
/// `-(1/2pi) [ln eps + (r^2 - eps^2)/(2 eps^2)]` inside.
pub fn disk_potential(r: f64, eps: f64) -> f64 {
    let c = -1.0 / (2.0 * std::f64::consts::PI);
    if r >= eps {
        c * r.ln()
    } else {
        c * (eps.ln() + (r * r - eps * eps) / (2.0 * eps * eps))
    }
}

/// Radius of the disk with the same area as a grid cell, shrunk so that
/// `psi(r_self)` equals the average of `psi` over that disk.
pub fn self_term_radius(h: f64) -> f64 {
    h / (std::f64::consts::PI * std::f64::consts::E).sqrt()
}

/// Newtonian potential `U^mu` by direct summation: atoms exactly, density
/// cells as point sources at cell centers; a node evaluating its own cell
/// (or an atom sitting on a node) uses `psi(self_term_radius(h))`.
pub fn newtonian_potential(mu: &Measure, spec: GridSpec) -> Result<GridFunction> {
    mu.validate()?;
    for (px, py) in mu.support_points() {
        if !spec.contains(px, py) {
            return Err(Error::BoxTooSmall(format!(
                "support point ({px}, {py}) outside the grid box"
            )));
        }
    }
    let r_self = self_term_radius(spec.h);
    let c = -1.0 / (2.0 * std::f64::consts::PI);
    let psi = |r: f64| c * r.max(r_self).ln();

    // gather sources in a fixed order: atoms first, then cells row-major
    let mut sources: Vec<(f64, f64, f64)> = mu.atoms.clone();
    if let Some(d) = &mu.density {
        let h2 = d.spec.h * d.spec.h;
        for j in 0..d.spec.ny {
            for i in 0..d.spec.nx {
                let v = d.at(i, j);
                if v != 0.0 {
                    sources.push((d.spec.x(i), d.spec.y(j), v * h2));
                }
            }
        }
    }

    let mut out = GridFunction::zeros(spec);
    out.values
        .par_chunks_mut(spec.nx)
        .enumerate()
        .for_each(|(j, row)| {
            let y = spec.y(j);
            for (i, slot) in row.iter_mut().enumerate() {
                let x = spec.x(i);
                let mut acc = 0.0;
                for &(sx, sy, m) in &sources {
                    acc += m * psi((sx - x).hypot(sy - y));
                }
                *slot = acc;
            }
        });
    Ok(out)
}

/// Potential of `mu` with atoms replaced by uniform `eps`-disks, evaluated
/// in closed form (no cell summation error for the atom part).
pub fn mollified_atom_potential(mu: &Measure, eps: f64, spec: GridSpec) -> Result<GridFunction> {
    let mut out = if let Some(d) = &mu.density {
        newtonian_potential(&Measure::from_density(d.clone()), spec)?
    } else {
        GridFunction::zeros(spec)
    };
    out.values
        .par_chunks_mut(spec.nx)
        .enumerate()
        .for_each(|(j, row)| {
            let y = spec.y(j);
            for (i, slot) in row.iter_mut().enumerate() {
                let x = spec.x(i);
                for &(ax, ay, m) in &mu.atoms {
                    *slot += m * disk_potential((ax - x).hypot(ay - y), eps);
                }
            }
        });
    Ok(out)
}

/// Grid density whose discrete potential is exactly
/// [`mollified_atom_potential`]: atoms enter as `-lap_h` of their closed-form
/// disk potential, a density part is kept as-is. This makes
/// `V = U - W` independent of `eps` to rounding accuracy (the mollification
/// invariance at the discrete level), which the balayage solves rely on.
pub fn solver_density(mu: &Measure, eps: f64, spec: GridSpec) -> Result<GridFunction> {
    let u = mollified_atom_potential(&Measure::from_atoms(mu.atoms.clone()), eps, spec)?;
    let mut out = u.laplacian();
    for v in out.values.iter_mut() {
        *v = -*v;
    }
    if let Some(d) = &mu.density {
        if !d.spec.same_layout(&spec) {
            return Err(Error::GridMismatch(
                "density grid must match the solve grid".into(),
            ));
        }
        for (o, v) in out.values.iter_mut().zip(&d.values) {
            *o += v;
        }
    }
    Ok(out)
}

/// Discrete Green potential of a node set: `-lap_h G = 1` on `A`, `G = 0`
/// outside, via SOR.
pub fn green_potential(a: &Mask, spec: GridSpec) -> Result<GridFunction> {
    if a.count() == 0 {
        return Err(Error::InvalidArgument("empty node set".into()));
    }
    if a.touches_box_boundary() {
        return Err(Error::InvalidArgument(
            "node set touches the grid boundary".into(),
        ));
    }
    let f = GridFunction::from_fn(spec, |_, _| 1.0);
    let mut g = GridFunction::zeros(spec);
    let out = sor_solve(
        &f,
        a,
        &mut g,
        &SorOptions {
            omega: 1.8,
            tol: 1e-9 * 2.0, // 1e-9 * (1 + max|rhs|)
            max_sweeps: 200 * spec.nx.max(spec.ny),
            project: false,
        },
    );
    if !out.converged {
        return Err(Error::NonConvergence(format!(
            "green potential residual {} after {} sweeps",
            out.residual, out.sweeps
        )));
    }
    Ok(g)
}
