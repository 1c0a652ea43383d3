//! The equal-energy radius: the inner radius R in (5, 5.1) at which the
//! annulus profile W(R, 17, .) has the same energy as W(4, 16, .). Its
//! existence is what makes the two-phase minimizer non-unique in the
//! unseeded class: swapping the second phase between the two profiles
//! leaves the total energy unchanged.

use qdlab::analytic::{radial_energy, solve_equal_energy};

fn main() -> qdlab::Result<()> {
    let r = solve_equal_energy()?;
    println!("equal-energy root R = {r:.10}");
    assert!(5.0 < r && r < 5.1);

    let e1 = radial_energy(4.0, 16.0)?;
    let e2 = radial_energy(r, 17.0)?;
    println!("J(4, 16)  = {e1:.8}");
    println!("J(R, 17)  = {e2:.8}");
    println!("difference {:.2e}", (e1 - e2).abs());
    assert!((e1 - e2).abs() <= 1e-6 * e1.abs());
    Ok(())
}
