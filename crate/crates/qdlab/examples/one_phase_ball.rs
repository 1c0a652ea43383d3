//! Partial balayage of a single point mass: the saturated set is a disk
//! whose area equals the mass, and the result passes the quadrature-domain
//! certificate and the quadrature inequality for a family of subharmonic
//! test functions.

use std::f64::consts::PI;

use qdlab::balayage::{auto_spec, partial_balayage, Rho};
use qdlab::measure::Measure;
use qdlab::verify::{check_one_phase_qd, check_quadrature_inequality};

fn main() -> qdlab::Result<()> {
    let h = 1.0 / 128.0;
    let mass = 4.0 * PI / 9.0; // free disk of radius 2/3
    let mu = Measure::atom(0.0, 0.0, mass);
    let spec = auto_spec(&mu, h, 8.0 * h)?;

    let res = partial_balayage(&mu, None, &Rho::one(), spec, None, None)?;
    println!(
        "solved on {}x{} grid: residual {:.2e} after {} sweeps",
        spec.nx, spec.ny, res.residual, res.sweeps
    );
    println!(
        "area(omega) = {:.6}  vs  mass = {:.6}  (free radius {:.4})",
        res.area_omega(),
        mass,
        (mass / PI).sqrt()
    );

    let cert = check_one_phase_qd(&res.omega, &mu, &res.w, res.epsilon, res.tau_pos)?;
    for c in &cert.checks {
        println!(
            "  {:<24} worst {:>12.3e}  threshold {:>10.3e}  {}",
            c.name,
            c.worst_residual,
            c.threshold,
            if c.pass { "ok" } else { "FAIL" }
        );
    }

    let quad = check_quadrature_inequality(&res.omega, &mu, None, spec)?;
    let passed = quad.checks.iter().filter(|c| c.pass).count();
    println!(
        "quadrature inequality: {passed}/{} test functions ok",
        quad.checks.len()
    );

    assert!(cert.overall && quad.overall);
    println!("certificate: PASS");
    Ok(())
}
