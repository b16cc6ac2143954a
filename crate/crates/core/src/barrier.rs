//! The space-time barrier `v = M - α e^{-β(t-t')} [r0² - |x-x0|²]²` that
//! pushes a maximum down the axis of a parabolic cylinder, together with the
//! constants that make it a strict classical supersolution of
//! `M⁺(D²u) + b|Du| + cu - u_t = 0`.
//!
//! Throughout, `ρ = |x - x0|` and `s = r0² - ρ²`, so `φ = s²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, SmoothField};
use crate::symmat::{pucci_extremal, Ellipticity, Extremal, SymMat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub center: Vec<f64>,
    /// Lower time `t'` of the inner cylinder.
    pub t_prime: f64,
    /// Upper time of the inner cylinder (top of the certified region).
    pub t_upper: f64,
    pub r0: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Cap level `M ≥ 0` (the maximum being propagated).
    pub cap: f64,
}

impl BarrierParams {
    pub fn new(
        center: Vec<f64>,
        t_prime: f64,
        t_upper: f64,
        r0: f64,
        alpha: f64,
        beta: f64,
        cap: f64,
    ) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Barrier("empty center".into()));
        }
        if !(r0 > 0.0 && r0 < 1.0) {
            return Err(Error::Barrier(format!("need 0 < r0 < 1, got {r0}")));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::Barrier("alpha and beta must be positive".into()));
        }
        if !(cap >= 0.0) {
            return Err(Error::Barrier(format!("cap level must be nonnegative, got {cap}")));
        }
        if !(t_upper > t_prime) {
            return Err(Error::Barrier("t_upper must exceed t_prime".into()));
        }
        Ok(Self {
            center,
            t_prime,
            t_upper,
            r0,
            alpha,
            beta,
            cap,
        })
    }

    /// `v(x0, t_upper) = M - α r0⁴ e^{-β(t_upper - t')}`; strictly below `M`.
    pub fn top_center_value(&self) -> f64 {
        self.cap - self.alpha * self.r0.powi(4) * (-self.beta * (self.t_upper - self.t_prime)).exp()
    }
}

impl SmoothField for BarrierParams {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        barrier_eval(self, x, t)
    }
}

/// `D²φ = 8 d⊗d - 4 s I` with `d = x - x0`.
pub fn phi_hessian(center: &[f64], r0: f64, x: &[f64]) -> SymMat {
    let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    let s = r0 * r0 - d.iter().map(|v| v * v).sum::<f64>();
    SymMat::from_fn(d.len(), |i, j| {
        8.0 * d[i] * d[j] - if i == j { 4.0 * s } else { 0.0 }
    })
}

/// Spectrum of `D²φ`: `(-4s, 12ρ² - 4r0²)`, the first with multiplicity `n-1`.
pub fn phi_hessian_eigenvalues(r0: f64, rho2: f64) -> (f64, f64) {
    (-4.0 * (r0 * r0 - rho2), 12.0 * rho2 - 4.0 * r0 * r0)
}

/// Pucci operator of `D²φ` in closed form. For `Plus` this is the two-regime
/// formula: `λ(8ρ² - 4ns)` when `ρ² ≤ r0²/3`, and
/// `8Λρ² - (4λ(n-1) + 4Λ)s` otherwise.
pub fn pucci_phi_closed(sign: Extremal, n: usize, ell: Ellipticity, r0: f64, rho2: f64) -> f64 {
    let (e1, e2) = phi_hessian_eigenvalues(r0, rho2);
    let (pos, neg) = match sign {
        Extremal::Plus => (ell.upper(), ell.lower()),
        Extremal::Minus => (ell.lower(), ell.upper()),
    };
    let w = |e: f64| if e > 0.0 { pos * e } else { neg * e };
    (n as f64 - 1.0) * w(e1) + w(e2)
}

pub fn barrier_eval(params: &BarrierParams, x: &[f64], t: f64) -> Jet {
    let d: Vec<f64> = x.iter().zip(&params.center).map(|(a, b)| a - b).collect();
    let rho2: f64 = d.iter().map(|v| v * v).sum();
    let s = params.r0 * params.r0 - rho2;
    let phi = s * s;
    let decay = params.alpha * (-params.beta * (t - params.t_prime)).exp();
    let hess_phi = phi_hessian(&params.center, params.r0, x);
    Jet {
        value: params.cap - decay * phi,
        // Dφ = -4 s d
        gradient: d.iter().map(|di| 4.0 * decay * s * di).collect(),
        hessian: &hess_phi * -decay,
        time_derivative: params.beta * decay * phi,
    }
}

/// `c_{n,λ,Λ} = 4λ(n-1) + 4Λ`.
pub fn hessian_constant(n: usize, ell: Ellipticity) -> f64 {
    4.0 * ell.lower() * (n as f64 - 1.0) + 4.0 * ell.upper()
}

/// `K = c_{n,λ,Λ} + 4 b_sup r0 + c_abs_sup r0²`.
pub fn compute_k(ell: Ellipticity, n: usize, b_sup: f64, c_abs_sup: f64, r0: f64) -> f64 {
    hessian_constant(n, ell) + 4.0 * b_sup * r0 + c_abs_sup * r0 * r0
}

/// `Ψ(s) = β s² - (8λ + K) s + 8λ r0²`.
pub fn psi(s: f64, lambda: f64, k: f64, beta: f64, r0: f64) -> f64 {
    beta * s * s - (8.0 * lambda + k) * s + 8.0 * lambda * r0 * r0
}

/// Smallest `β` for which `Ψ` has no real root: `(8λ + K)² / (32 λ r0²)`.
pub fn beta_threshold(lambda: f64, k: f64, r0: f64) -> f64 {
    (8.0 * lambda + k).powi(2) / (32.0 * lambda * r0 * r0)
}

/// Exact minimum of `Ψ` over `s ∈ [0, r0²]`.
pub fn psi_min(lambda: f64, k: f64, beta: f64, r0: f64) -> f64 {
    let hi = r0 * r0;
    let vertex = (8.0 * lambda + k) / (2.0 * beta);
    let ends = psi(0.0, lambda, k, beta, r0).min(psi(hi, lambda, k, beta, r0));
    if (0.0..=hi).contains(&vertex) {
        ends.min(psi(vertex, lambda, k, beta, r0))
    } else {
        ends
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaChoice {
    /// Band `s ≤ δ` on which `Ψ > 0` for every `β > 0`.
    pub delta: f64,
    pub beta: f64,
    pub threshold: f64,
}

/// `β = 2 β*` and `δ = 8λr0² / (2(8λ + K))`.
pub fn select_beta(lambda: f64, k: f64, r0: f64) -> Result<BetaChoice> {
    if !(lambda > 0.0 && k >= 0.0 && r0 > 0.0 && r0 < 1.0) {
        return Err(Error::Barrier(format!(
            "select_beta needs lambda > 0, K >= 0, 0 < r0 < 1 (got {lambda}, {k}, {r0})"
        )));
    }
    let threshold = beta_threshold(lambda, k, r0);
    Ok(BetaChoice {
        delta: 8.0 * lambda * r0 * r0 / (2.0 * (8.0 * lambda + k)),
        beta: 2.0 * threshold,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CertificateViolation {
    /// Residual not below zero at a sample.
    Residual { x: Vec<f64>, t: f64, residual: f64 },
    /// Closed-form and eigenvalue-based Pucci values disagree.
    PucciMismatch { x: Vec<f64>, closed_form: f64, eigen: f64 },
}

/// Constants and sampled evidence that the barrier is a strict supersolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCertificate {
    pub k: f64,
    pub c_nll: f64,
    pub delta: f64,
    pub beta: f64,
    pub beta_threshold: f64,
    /// Exact minimum of `Ψ` over `[0, r0²]`.
    pub psi_min: f64,
    /// Minimum over samples of `-residual / (α e^{-β(t-t')})`.
    pub sampled_margin: f64,
    /// `min(psi_min, sampled_margin)`; positive on success.
    pub margin: f64,
    /// Largest bundled first-order coefficient `r(x,t)` seen; the proof
    /// needs it to stay below `K`.
    pub max_bundled_coefficient: f64,
    pub samples: usize,
    pub violation: Option<CertificateViolation>,
}

impl BarrierCertificate {
    pub fn passed(&self) -> bool {
        self.violation.is_none() && self.margin > 0.0 && self.beta > self.beta_threshold
    }

    /// Whether `K` dominated the bundled coefficient at every sample.
    pub fn k_dominates(&self) -> bool {
        self.max_bundled_coefficient <= self.k * (1.0 + 1e-12)
    }
}

/// Sample points of the closed ball `|x - x0| ≤ r0`: a tensor grid clipped to
/// the ball plus the axis-aligned points of the sphere.
fn ball_samples(center: &[f64], r0: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    let per_axis = per_axis.max(2);
    let coord = |k: usize| -r0 + 2.0 * r0 * k as f64 / (per_axis - 1) as f64;
    let mut out = Vec::new();
    let total = per_axis.checked_pow(n as u32).unwrap_or(usize::MAX);
    if total <= 1 << 21 {
        let mut idx = vec![0usize; n];
        'outer: loop {
            let d: Vec<f64> = idx.iter().map(|&k| coord(k)).collect();
            if d.iter().map(|v| v * v).sum::<f64>() <= r0 * r0 {
                out.push(d.iter().zip(center).map(|(a, b)| a + b).collect());
            }
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_axis {
                    continue 'outer;
                }
                *slot = 0;
            }
            break;
        }
    } else {
        // radial lines through the axes and diagonals
        let mut dirs: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        dirs.push(vec![1.0 / (n as f64).sqrt(); n]);
        for dir in dirs {
            for k in 0..per_axis {
                let rad = r0 * k as f64 / (per_axis - 1) as f64;
                out.push(dir.iter().zip(center).map(|(u, c)| c + rad * u).collect());
            }
        }
    }
    for i in 0..n {
        for sgn in [-1.0, 1.0] {
            let mut p = center.to_vec();
            p[i] += sgn * r0;
            out.push(p);
        }
    }
    out
}

struct SampleOutcome {
    normalized: f64,
    bundled: f64,
    violation: Option<CertificateViolation>,
}

fn check_point(
    params: &BarrierParams,
    ell: Ellipticity,
    b_sup: f64,
    c_abs_sup: f64,
    x: &[f64],
    t: f64,
) -> Result<SampleOutcome> {
    let n = params.dim();
    let decay = params.alpha * (-params.beta * (t - params.t_prime)).exp();
    let rho2: f64 = x
        .iter()
        .zip(&params.center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let s = params.r0 * params.r0 - rho2;
    let phi = s * s;

    // Everything below is divided by the decay factor α e^{-β(t-t')}; by
    // positive homogeneity M⁺(D²v) / decay = M⁺(-D²φ) = -M⁻(D²φ).
    let neg_hess = &phi_hessian(&params.center, params.r0, x) * -1.0;
    let eigen = pucci_extremal(Extremal::Plus, ell, &neg_hess)?;
    let closed = -pucci_phi_closed(Extremal::Minus, n, ell, params.r0, rho2);
    if (eigen - closed).abs() > 1e-9 * (1.0 + closed.abs()) {
        return Ok(SampleOutcome {
            normalized: f64::NEG_INFINITY,
            bundled: f64::INFINITY,
            violation: Some(CertificateViolation::PucciMismatch {
                x: x.to_vec(),
                closed_form: closed,
                eigen,
            }),
        });
    }

    let first_order = b_sup * 4.0 * s.abs() * rho2.sqrt();
    let mut worst = f64::NEG_INFINITY;
    let mut bundled = f64::NEG_INFINITY;
    for c in [0.0, -c_abs_sup] {
        // c v / decay = c (M / decay - φ); the cap part only helps when c ≤ 0
        let without_cap = eigen + first_order - c * phi - params.beta * phi;
        let residual = if c == 0.0 || params.cap == 0.0 {
            without_cap
        } else {
            without_cap + c * params.cap / decay
        };
        worst = worst.max(residual);
        if s > 1e-3 * params.r0 * params.r0 {
            let lam = ell.lower();
            let r = (8.0 * lam * rho2 + params.beta * s * s + without_cap) / s;
            bundled = bundled.max(r);
        }
    }
    let violation = (worst >= 0.0).then(|| CertificateViolation::Residual {
        x: x.to_vec(),
        t,
        residual: worst * decay,
    });
    Ok(SampleOutcome {
        normalized: -worst,
        bundled,
        violation,
    })
}

/// Samples `M⁺(D²v) + b_sup|Dv| + c v - v_t` on the closed cylinder
/// `|x - x0| ≤ r0`, `t ∈ [t', t_upper]`, with `c ∈ {0, -c_abs_sup}`, on a grid
/// of `per_axis` points per space and time axis.
pub fn certify_strict_supersolution(
    params: &BarrierParams,
    ell: Ellipticity,
    b_sup: f64,
    c_abs_sup: f64,
    per_axis: usize,
) -> Result<BarrierCertificate> {
    if b_sup < 0.0 || c_abs_sup < 0.0 {
        return Err(Error::Barrier("coefficient bounds must be nonnegative".into()));
    }
    let n = params.dim();
    let k = compute_k(ell, n, b_sup, c_abs_sup, params.r0);
    let choice = select_beta(ell.lower(), k, params.r0)?;
    let psi_lo = psi_min(ell.lower(), k, params.beta, params.r0);

    let points = ball_samples(&params.center, params.r0, per_axis);
    let steps = per_axis.max(2);
    let times: Vec<f64> = (0..steps)
        .map(|i| params.t_prime + (params.t_upper - params.t_prime) * i as f64 / (steps - 1) as f64)
        .collect();
    let outcomes = points
        .par_iter()
        .flat_map_iter(|x| times.iter().map(move |&t| (x, t)))
        .map(|(x, t)| check_point(params, ell, b_sup, c_abs_sup, x, t))
        .collect::<Result<Vec<_>>>()?;

    let mut sampled_margin = f64::INFINITY;
    let mut bundled = f64::NEG_INFINITY;
    let mut violation = None;
    for o in &outcomes {
        sampled_margin = sampled_margin.min(o.normalized);
        bundled = bundled.max(o.bundled);
        if violation.is_none() {
            violation = o.violation.clone();
        }
    }
    Ok(BarrierCertificate {
        k,
        c_nll: hessian_constant(n, ell),
        delta: choice.delta,
        beta: params.beta,
        beta_threshold: choice.threshold,
        psi_min: psi_lo,
        sampled_margin,
        margin: psi_lo.min(sampled_margin),
        max_bundled_coefficient: bundled,
        samples: outcomes.len(),
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::eigenvalues;

    fn band(l: f64, u: f64) -> Ellipticity {
        Ellipticity::new(l, u).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(BarrierParams::new(vec![0.0], 0.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(BarrierParams::new(vec![0.0], 0.0, 1.0, 0.5, 0.0, 1.0, 0.0).is_err());
        assert!(BarrierParams::new(vec![0.0], 0.0, 1.0, 0.5, 1.0, 1.0, -1.0).is_err());
        assert!(BarrierParams::new(vec![0.0], 1.0, 1.0, 0.5, 1.0, 1.0, 0.0).is_err());
        assert!(BarrierParams::new(vec![0.0], 0.0, 1.0, 0.5, 1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn value_at_center_and_lateral_surface() {
        let p = BarrierParams::new(vec![0.1, -0.2], 0.0, 1.0, 0.5, 0.3, 4.0, 1.0).unwrap();
        let jet = barrier_eval(&p, &[0.1, -0.2], 0.0);
        assert!((jet.value - (1.0 - 0.3 * 0.5f64.powi(4))).abs() < 1e-15);
        assert!(jet.gradient.iter().all(|&g| g == 0.0));
        // D²v = -α D²φ = -α (-4 r0² I)
        let expect = &SymMat::identity(2) * (0.3 * 4.0 * 0.25);
        assert!((&jet.hessian - &expect).frobenius_norm() < 1e-15);

        let jet = barrier_eval(&p, &[0.1 + 0.3, -0.2 + 0.4], 0.7);
        assert!((jet.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regime_switch_eigenvalue_vanishes() {
        let r0: f64 = 0.6;
        let rho = r0 / 3f64.sqrt();
        let (_, e2) = phi_hessian_eigenvalues(r0, rho * rho);
        assert!(e2.abs() < 1e-15);
        let h = phi_hessian(&[0.0, 0.0], r0, &[rho, 0.0]);
        let eig = eigenvalues(&h).unwrap();
        assert!(eig.max().abs() < 1e-12);
    }

    #[test]
    fn k_formula() {
        assert_eq!(compute_k(band(1.0, 2.0), 2, 0.0, 0.0, 0.5), 12.0);
        assert_eq!(compute_k(band(1.0, 2.0), 2, 1.0, 1.0, 0.5), 14.25);
        assert_eq!(compute_k(band(1.0, 1.0), 1, 0.0, 0.0, 0.5), 4.0);
    }

    #[test]
    fn beta_selection_example() {
        let c = select_beta(1.0, 12.0, 0.5).unwrap();
        assert!((c.threshold - 50.0).abs() < 1e-12);
        assert!((c.beta - 100.0).abs() < 1e-12);
        assert!(psi_min(1.0, 12.0, c.beta, 0.5) > 0.0);
        assert_eq!(psi(0.0, 1.0, 12.0, c.beta, 0.5), 2.0);
        // Ψ > 0 on s <= δ whatever β is
        for beta in [1e-6, 1.0, 10.0] {
            assert!(psi(c.delta, 1.0, 12.0, beta, 0.5) > 0.0);
        }
        assert!(select_beta(1.0, 12.0, 1.0).is_err());
    }

    #[test]
    fn one_dimensional_certificate() {
        let ell = band(1.0, 1.0);
        let k = compute_k(ell, 1, 0.0, 0.0, 0.5);
        let beta = select_beta(1.0, k, 0.5).unwrap().beta;
        let p = BarrierParams::new(vec![0.0], 0.0, 0.5, 0.5, 1.0, beta, 1.0).unwrap();
        let cert = certify_strict_supersolution(&p, ell, 0.0, 0.0, 200).unwrap();
        assert!(cert.passed(), "{cert:?}");
        assert!(cert.k_dominates());
        assert!(cert.sampled_margin >= cert.psi_min - 1e-9);
    }

    #[test]
    fn low_beta_is_refused() {
        let ell = band(1.0, 2.0);
        let k = compute_k(ell, 2, 0.0, 0.0, 0.5);
        let beta = 0.9 * beta_threshold(1.0, k, 0.5);
        let p = BarrierParams::new(vec![0.0, 0.0], 0.0, 0.2, 0.5, 1.0, beta, 0.0).unwrap();
        let cert = certify_strict_supersolution(&p, ell, 0.0, 0.0, 32).unwrap();
        assert!(!cert.passed());
        assert!(cert.margin < 0.0);
    }
}
