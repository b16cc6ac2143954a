//! Stationary elliptic solutions fed to the parabolic solver.

use smp_core::solver::{evolve, NodeKind};

use super::extremes;
use crate::config::Setup;
use crate::error::LabError;
use crate::report::{ExperimentReport, Table};

pub(super) fn run(s: &Setup) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new(s.scenario, s.seed);
    let grid = s.grid()?;
    let u0 = s.sample(&grid, &s.initial);
    let lateral = |x: &[f64], _t: f64| s.initial.eval(x);
    let trace = evolve(&s.spec, &grid, &u0, &lateral, s.t_start, s.t_end)?;

    let boundary = || (0..grid.len()).filter(|&i| grid.kind(i) == NodeKind::Boundary);
    let mut table = Table::new("elliptic_reduction", &["t", "max_drift", "interior_max", "boundary_max"]);
    let mut drift = 0.0f64;
    let mut strict = true;
    for (t, u) in &trace.snapshots {
        let d = u
            .values
            .iter()
            .zip(&u0.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        drift = drift.max(d);
        let (_, inner) = extremes(u, grid.interior_nodes());
        let (_, outer) = extremes(u, boundary());
        strict &= inner < outer - s.tol.zero_tol;
        table.push(vec![*t, d, inner, outer]);
    }
    let (lo, hi) = extremes(&u0, 0..grid.len());
    rep.metric("dt", grid.dt);
    rep.metric("max_time_drift", drift);
    rep.check("zero_time_drift", drift <= s.tol.drift_tol);
    rep.check("non_constant", hi - lo > s.tol.zero_tol);
    rep.check("max_on_boundary_only", strict);
    rep.add_table(table);
    Ok(rep)
}
