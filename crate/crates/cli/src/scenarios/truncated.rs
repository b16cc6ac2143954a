//! A supersolution of the truncated Pucci operator with an interior minimum.

use smp_core::solver::{discrete_operator, residual, EvolutionTrace, ResidualMode, TimeDifference};

use super::extremes;
use crate::config::Setup;
use crate::error::LabError;
use crate::report::{ExperimentReport, Table};

pub(super) fn run(s: &Setup) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new(s.scenario, s.seed);
    let grid = s.grid()?;
    let mid = 0.5 * (s.t_start + s.t_end);
    let trace = EvolutionTrace::from_fn(&grid, &[s.t_start, mid, s.t_end], |x, _| s.initial.eval(x));

    let sup = residual(&s.spec, &trace, ResidualMode::Super, TimeDifference::Backward)?;
    let sub = residual(&s.spec, &trace, ResidualMode::Sub, TimeDifference::Backward)?;
    rep.metric("super_residual", sup.worst);
    rep.metric("sub_residual", sub.worst);
    rep.check("super_residual_exactly_zero", sup.worst == 0.0);

    let u = &trace.snapshots[0].1;
    let (lo, hi) = extremes(u, grid.interior_nodes());
    let (all_lo, _) = extremes(u, 0..grid.len());
    let dim = grid.dim();
    let at_min: Vec<usize> = grid.interior_nodes().filter(|&i| u.values[i] == lo).collect();
    let on_hyperplane = at_min.iter().all(|&i| grid.coords(i)[dim - 1] == 0.0);
    rep.metric("interior_min", lo);
    rep.metric("global_min", all_lo);
    rep.metric("interior_max", hi);
    rep.metric("min_nodes", at_min.len() as f64);
    rep.check("interior_minimum_attained", lo == all_lo && !at_min.is_empty() && on_hyperplane);
    rep.check("non_constant", hi - lo > s.tol.zero_tol);
    // Every check above passing means the strong minimum principle fails for
    // this operator, which is the expected outcome.
    rep.metric(
        "minimum_principle_violated",
        if rep.pass { 1.0 } else { 0.0 },
    );

    let mut header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    header.push("u".into());
    header.push("residual".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new("truncated_counterexample", &refs);
    for i in grid.interior_nodes() {
        let mut row = grid.coords(i);
        row.push(u.values[i]);
        row.push(discrete_operator(&s.spec, &grid, &u.values, i, s.t_start)?);
        table.push(row);
    }
    rep.add_table(table);
    Ok(rep)
}
