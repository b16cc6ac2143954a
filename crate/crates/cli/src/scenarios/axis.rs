//! Strict gap below the maximum on the axis, and the barrier bound.

use smp_core::barrier::{certify_strict_supersolution, compute_k, select_beta, BarrierParams};
use smp_core::solver::{evolve, NodeKind};
use smp_core::SmoothField;

use super::config_err;
use crate::config::{DomainShape, Setup};
use crate::error::LabError;
use crate::report::{ExperimentReport, Table};

pub(super) fn run(s: &Setup) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new(s.scenario, s.seed);
    let grid = s.grid()?;
    let u0 = s.sample(&grid, &s.initial);
    let lateral = |x: &[f64], _t: f64| s.boundary.eval(x);
    let trace = evolve(&s.spec, &grid, &u0, &lateral, s.t_start, s.t_end)?;

    // M: largest value on the parabolic boundary
    let first = &trace.snapshots[0].1;
    let mut cap = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        if grid.kind(i) != NodeKind::Outside {
            cap = cap.max(first.values[i]);
        }
    }
    for (_, u) in &trace.snapshots {
        for i in 0..grid.len() {
            if grid.kind(i) == NodeKind::Boundary {
                cap = cap.max(u.values[i]);
            }
        }
    }
    if !(cap >= 0.0) {
        return Err(config_err("axis_strictness needs a nonnegative maximum on the parabolic boundary"));
    }

    let mut table = Table::new("axis_strictness", &["t", "gap"]);
    let start = s.t_start + s.tol.gap_start;
    let mut min_gap = f64::INFINITY;
    for ((t, _), (max, _)) in trace.snapshots.iter().zip(&trace.max_track) {
        let gap = cap - max;
        table.push(vec![*t, gap]);
        if *t >= start - 1e-12 {
            min_gap = min_gap.min(gap);
        }
    }
    let (t_final, u_final) = trace.last();
    let (max_final, argmax) = *trace.max_track.last().expect("nonempty trace");
    rep.metric("cap", cap);
    rep.metric("dt", grid.dt);
    rep.metric("min_gap_after_start", min_gap);
    rep.metric("final_gap", cap - max_final);
    rep.check("strict_gap", min_gap > s.tol.zero_tol);
    rep.add_table(table);

    // Barrier centered at the final argmax, started at the first level after t'.
    let (k0, (t_prime, u_prime)) = trace
        .snapshots
        .iter()
        .enumerate()
        .find(|(_, (t, _))| *t >= start - 1e-12)
        .map(|(k, (t, u))| (k, (*t, u)))
        .ok_or_else(|| config_err("gap_start lies beyond t_end"))?;
    if !(t_prime < *t_final) {
        return Err(config_err("no time left after gap_start for the barrier"));
    }
    let x0 = grid.coords(argmax);
    let room = match s.domain {
        DomainShape::Ball => {
            s.radius
                - x0.iter()
                    .zip(&s.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
        }
        DomainShape::Box => x0
            .iter()
            .zip(&s.center)
            .map(|(a, b)| s.radius - (a - b).abs())
            .fold(f64::INFINITY, f64::min),
    };
    let r0 = s.r0.min(0.9 * room);
    let inside = |x: &[f64]| -> f64 {
        let rho2: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
        r0 * r0 - rho2
    };
    // largest α with M - α φ ≥ u(·, t') on the ball
    let mut alpha = f64::INFINITY;
    for i in 0..grid.len() {
        let sdist = inside(&grid.coords(i));
        if grid.kind(i) != NodeKind::Outside && sdist > 0.0 {
            alpha = alpha.min((cap - u_prime.values[i]) / (sdist * sdist));
        }
    }
    let ell = s.spec.ellipticity();
    let coeffs = s.spec.coefficients();
    let (b_sup, c_abs) = (coeffs.b_sup(), coeffs.c_abs_sup());
    let k = compute_k(ell, grid.dim(), b_sup, c_abs, r0);
    let beta = select_beta(ell.lower(), k, r0)?.beta;
    rep.metric("barrier_r0", r0);
    rep.metric("barrier_alpha", alpha);
    rep.metric("barrier_k", k);
    rep.metric("barrier_beta", beta);
    rep.metric("barrier_t_prime", t_prime);
    if !(alpha > 0.0 && alpha.is_finite()) {
        rep.check("barrier_alpha_positive", false);
        return Ok(rep);
    }
    rep.check("barrier_alpha_positive", true);

    let params = BarrierParams::new(x0.clone(), t_prime, *t_final, r0, alpha, beta, cap)?;
    let cert = certify_strict_supersolution(&params, ell, b_sup, c_abs, 24)?;
    rep.check("barrier_certificate", cert.passed());
    rep.metric("barrier_margin", cert.margin);
    rep.metric("barrier_k_dominates", if cert.k_dominates() { 1.0 } else { 0.0 });

    let bound = alpha * r0.powi(4) * (-beta * (t_final - t_prime)).exp();
    let top = params.top_center_value();
    let observed = cap - u_final.values[argmax];
    rep.metric("barrier_bound", bound);
    rep.metric("barrier_top_value", top);
    rep.metric("observed_center_gap", observed);
    rep.check("barrier_top_below_cap", top < cap);
    rep.check("gap_exceeds_barrier_bound", observed >= s.tol.barrier_factor * bound);

    // how far the discrete solution ever rises above the barrier
    let mut excess = f64::NEG_INFINITY;
    for (t, u) in &trace.snapshots[k0..] {
        for i in 0..grid.len() {
            let x = grid.coords(i);
            if grid.kind(i) != NodeKind::Outside && inside(&x) >= 0.0 {
                excess = excess.max(u.values[i] - params.value(&x, *t));
            }
        }
    }
    rep.metric("barrier_dominance_excess", excess);
    rep.certificate = Some(cert);
    Ok(rep)
}
