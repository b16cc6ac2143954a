//! Maximum propagation along a chain of inclined cylinders.

use smp_core::geometry::cover_broken_line;
use smp_core::solver::{evolve, GridFunction};

use super::config_err;
use crate::config::Setup;
use crate::error::LabError;
use crate::report::{ExperimentReport, Table};
use crate::shapes::Shape;

/// `(t, axis point, center value)` per stored level of every segment.
type AxisSamples = Vec<(usize, f64, Vec<f64>, f64)>;

fn run_chain(s: &Setup, initial: impl Fn(&[f64]) -> f64, cap: f64) -> Result<AxisSamples, LabError> {
    let line = s.broken_line.as_ref().expect("resolved broken line");
    let chain = cover_broken_line(line, s.radius, None, 16)?;
    let mut carried: Option<GridFunction> = None;
    let mut out = Vec::new();
    for (k, seg) in chain.segments.iter().enumerate() {
        let grid = s
            .grid_at(&seg.base.center)?
            .with_frame_velocity(seg.drift.clone())?
            .with_cfl(&s.spec, s.cfl_safety);
        let u0 = match carried.take() {
            Some(u) if u.values.len() == grid.len() => u,
            Some(_) => return Err(config_err("segment grids do not line up")),
            None => grid.sample(&initial),
        };
        let trace = evolve(&s.spec, &grid, &u0, &|_, _| cap, seg.base.t1, seg.base.t2)?;
        let centre = grid.nearest(&seg.base.center);
        for (t, u) in &trace.snapshots {
            out.push((k, *t, seg.axis(*t), u.values[centre]));
        }
        carried = Some(trace.last().1.clone());
    }
    Ok(out)
}

pub(super) fn run(s: &Setup) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new(s.scenario, s.seed);
    let cap = match s.boundary {
        Shape::Constant { value } => value,
        _ => return Err(config_err("broken_line needs constant lateral data (the level M)")),
    };
    let coeffs = s.spec.coefficients();
    if coeffs.c.range() != (0.0, 0.0) || coeffs.f.range() != (0.0, 0.0) {
        return Err(config_err("broken_line needs c = 0 and f = 0 so that constants are solutions"));
    }

    let constant = run_chain(s, |_| cap, cap)?;
    let perturbed = run_chain(s, |x| s.initial.eval(x), cap)?;

    let dim = s.center.len();
    let mut header = vec!["segment".to_string(), "t".to_string()];
    header.extend((0..dim).map(|k| format!("axis_x{k}")));
    header.push("constant_value".into());
    header.push("perturbed_gap".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new("broken_line", &header_refs);

    let mut const_dev = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for (a, b) in constant.iter().zip(&perturbed) {
        const_dev = const_dev.max((a.3 - cap).abs());
        let gap = cap - b.3;
        min_gap = min_gap.min(gap);
        let mut row = vec![a.0 as f64, a.1];
        row.extend(&a.2);
        row.push(a.3);
        row.push(gap);
        table.push(row);
    }
    rep.metric("cap", cap);
    rep.metric("segments", s.broken_line.as_ref().map_or(0, |l| l.vertices().len() - 1) as f64);
    rep.metric("axis_samples", constant.len() as f64);
    rep.metric("constant_max_deviation", const_dev);
    rep.metric("perturbed_min_axis_gap", min_gap);
    rep.check("constant_propagates_exactly", const_dev == 0.0);
    rep.check("strict_gap_on_axis", min_gap > s.tol.zero_tol);
    rep.add_table(table);
    Ok(rep)
}
