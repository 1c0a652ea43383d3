//! Red-black (projected) successive over-relaxation on the 5-point stencil.
//!
//! Each half-sweep updates one color in place: the 5-point neighbors of a
//! node are all of the other color, so within a half-sweep every read is
//! either the node's own pre-update value or an other-color value that no
//! thread writes. Results are bitwise identical for any thread count.

use rayon::prelude::*;

use crate::grid::{GridFunction, GridSpec, Mask};

pub struct SorOptions {
    pub omega: f64,
    /// Stop when the (complementarity) residual drops below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Clamp iterates at zero (obstacle problem). Without projection this is
    /// a plain Dirichlet solve on the active set.
    pub project: bool,
}

pub struct SorOutcome {
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Solve `-lap_h w = f` on the interior nodes of `active` (zero Dirichlet on
/// everything else), optionally projected to `w >= 0`:
/// `min(w, -lap_h w - f) = 0` in the projected case.
///
/// `w` is used as the initial iterate and holds the solution on return.
pub fn sor_solve(f: &GridFunction, active: &Mask, w: &mut GridFunction, opts: &SorOptions) -> SorOutcome {
    let spec = w.spec;
    let nx = spec.nx;
    let ny = spec.ny;
    let h2 = spec.h * spec.h;

    // zero out inactive and boundary nodes up front
    for j in 0..ny {
        for i in 0..nx {
            let k = spec.idx(i, j);
            if !active.inside[k] || i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                w.values[k] = 0.0;
            }
        }
    }

    let mut cur = std::mem::take(&mut w.values);

    struct SendPtr(*mut f64);
    unsafe impl Send for SendPtr {}
    unsafe impl Sync for SendPtr {}

    // In-place half-sweep over one color. Safety: rows are processed in
    // parallel, but a node of `color` writes only itself and reads only its
    // own old value and other-color neighbors, which this half-sweep never
    // writes — so no two threads touch overlapping memory.
    let update_color = |v: &mut [f64], color: usize| {
        let ptr = SendPtr(v.as_mut_ptr());
        let ptr = &ptr;
        (1..ny.max(1) - 1).into_par_iter().for_each(move |j| {
            let base = j * nx;
            let start = 1 + (j + 1 + color) % 2; // (i + j) % 2 == color
            let mut i = start;
            while i < nx - 1 {
                let k = base + i;
                if active.inside[k] {
                    unsafe {
                        let p = ptr.0;
                        let old = *p.add(k);
                        let nb = *p.add(k - 1) + *p.add(k + 1) + *p.add(k - nx) + *p.add(k + nx);
                        let gs = 0.25 * (nb + h2 * f.values[k]);
                        let mut val = old + opts.omega * (gs - old);
                        if opts.project && val < 0.0 {
                            val = 0.0;
                        }
                        *p.add(k) = val;
                    }
                }
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
                    if !active.inside[k] {
                        continue;
                    }
                    let lap = (v[k - 1] + v[k + 1] + v[k - nx] + v[k + nx] - 4.0 * v[k]) / h2;
                    let r = -lap - f.values[k];
                    let c = if opts.project { v[k].min(r) } else { r };
                    worst = worst.max(c.abs());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    };

    let mut sweeps = 0;
    let mut res = residual(&cur);
    let check_every = 16;
    while res > opts.tol && sweeps < opts.max_sweeps {
        for _ in 0..check_every.min(opts.max_sweeps - sweeps) {
            update_color(&mut cur, 0);
            update_color(&mut cur, 1);
            sweeps += 1;
        }
        res = residual(&cur);
    }

    w.values = cur;
    SorOutcome {
        sweeps,
        residual: res,
        converged: res <= opts.tol,
    }
}

/// `sor_solve` warm-started by nested iteration: the problem is restricted
/// (by injection at every other node) to a hierarchy of 2x-coarsened grids,
/// solved coarsest-first, and each solution is bilinearly prolonged as the
/// initial iterate of the next level. The final fine-level solve uses `opts`
/// unchanged, so the returned outcome satisfies the same stopping criterion
/// as a cold start; only the iteration count changes.
pub fn sor_solve_cascade(
    f: &GridFunction,
    active: &Mask,
    w: &mut GridFunction,
    opts: &SorOptions,
) -> SorOutcome {
    let spec = w.spec;
    if spec.nx.min(spec.ny) >= 65 {
        if let Ok(cspec) = GridSpec::new(
            spec.x0,
            spec.y0,
            (spec.nx + 1) / 2,
            (spec.ny + 1) / 2,
            2.0 * spec.h,
        ) {
            let mut cf = GridFunction::zeros(cspec);
            let mut cactive = Mask::empty(cspec);
            for j in 0..cspec.ny {
                for i in 0..cspec.nx {
                    let k = spec.idx(2 * i, 2 * j);
                    cf.values[cspec.idx(i, j)] = f.values[k];
                    cactive.inside[cspec.idx(i, j)] = active.inside[k];
                }
            }
            let mut cw = GridFunction::zeros(cspec);
            let copts = SorOptions {
                max_sweeps: 200 * cspec.nx.max(cspec.ny),
                ..*opts
            };
            // a non-converged coarse solve still yields a usable iterate
            let _ = sor_solve_cascade(&cf, &cactive, &mut cw, &copts);
            for j in 0..spec.ny {
                for i in 0..spec.nx {
                    let (il, ir) = (i / 2, ((i + 1) / 2).min(cspec.nx - 1));
                    let (jl, jr) = (j / 2, ((j + 1) / 2).min(cspec.ny - 1));
                    let v = 0.25
                        * (cw.at(il, jl) + cw.at(ir, jl) + cw.at(il, jr) + cw.at(ir, jr));
                    w.values[spec.idx(i, j)] = if opts.project { v.max(0.0) } else { v };
                }
            }
        }
    }
    sor_solve(f, active, w, opts)
}
