//! Multiphase quadrature domains for pure point masses: atoms are replaced
//! by equivalent concentrated disks (whose radius the support bound
//! controls), the segregation energy is minimized over the seeded class,
//! and the result carries a Green-potential barrier certificate.

use std::f64::consts::PI;

use qdlab::grid::GridSpec;
use qdlab::measure::Measure;
use qdlab::multiphase::{point_mass_qd, support_bound_constant, PhaseProblem};

fn main() -> qdlab::Result<()> {
    // the admissible seed radius shrinks like exp(-c / mass-margin), so the
    // grid must be fine enough that 4h clears it
    let h = 1.0 / 128.0;
    let t = 4.0 * PI / 9.0;
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

    // the analytic support bound: mass C |B_delta| concentrated on B_delta
    // suffices to keep the phase's support in a controlled ball
    let c_bound = support_bound_constant(1.0, 0.1, 1.0, t, 2)?;
    println!("support-bound constant at delta = 0.1: C = {c_bound:.4}");

    let out = point_mass_qd(&problem)?;
    println!(
        "concentration radius delta = {:.4} ({}h); {} minimization cycles",
        out.delta,
        (out.delta / h).round(),
        out.outcome.cycles
    );
    let info = out.outcome.smmu.as_ref().expect("seeded run reports barrier data");
    println!(
        "seed density c = {:.3} (> 1); worst barrier violation {:.3e}",
        info.c, info.barrier_violation
    );
    for (j, q) in out.state.masks().iter().enumerate() {
        println!("phase {}: area {:.4}", j + 1, q.area());
    }
    assert!(out.report.overall, "{:?}", out.report.checks);
    println!("strong-MQD certificate: PASS");
    Ok(())
}
