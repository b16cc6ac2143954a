//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smp_core::barrier::{
    certify_strict_supersolution, compute_k, psi, select_beta, BarrierParams,
};
use smp_core::geometry::{pucci_class_residual, Tilted};
use smp_core::operators::{
    check_structure_condition, CoefficientField, GradientTerm, OperatorSpec, Principal, ScalarField,
    ZeroGradient,
};
use smp_core::solver::{discrete_comparison, evolve, Grid};
use smp_core::symmat::{eigenvalues, pucci_extremal, Ellipticity, Extremal, SymMat};
use smp_core::{Jet, SmoothField};
use smplab::{run_experiment, ExperimentConfig, Scenario};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn band(l: f64, u: f64) -> Ellipticity {
    Ellipticity::new(l, u).unwrap()
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMat {
    SymMat::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

/// Brute-force `sup`/`inf` of `Tr(AM)` over `A = R(θ) diag(a, b) R(θ)ᵀ`.
fn brute_pucci(m: &SymMat, lo: f64, hi: f64) -> (f64, f64) {
    let (m11, m12, m22) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
    let grid: Vec<f64> = (0..40).map(|i| lo + (hi - lo) * i as f64 / 39.0).collect();
    let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..200 {
        let th = PI * k as f64 / 200.0;
        let (c, s) = (th.cos(), th.sin());
        // Tr(R diag(a,b) Rᵀ M) = a e1ᵀMe1 + b e2ᵀMe2 with e1 = (c,s), e2 = (-s,c)
        let q1 = c * c * m11 + 2.0 * c * s * m12 + s * s * m22;
        let q2 = s * s * m11 - 2.0 * c * s * m12 + c * c * m22;
        for &a in &grid {
            for &b in &grid {
                let v = a * q1 + b * q2;
                sup = sup.max(v);
                inf = inf.min(v);
            }
        }
    }
    (sup, inf)
}

fn pucci_oracle() -> Outcome {
    let started = Instant::now();
    let ell = band(1.0, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = random_sym(&mut rng, 2, 3.0);
        let (sup, inf) = brute_pucci(&m, 1.0, 2.0);
        let plus = pucci_extremal(Extremal::Plus, ell, &m).unwrap();
        let minus = pucci_extremal(Extremal::Minus, ell, &m).unwrap();
        let scale = |v: f64| v.abs().max(m.frobenius_norm());
        worst = worst
            .max((sup - plus).abs() / scale(plus))
            .max((inf - minus).abs() / scale(minus));
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-2 && secs < 10.0,
        format!("max relative error {worst:.2e}, {secs:.2}s"),
    )
}

fn rank_one() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.gen_range(1..=5);
        let nu = rng.gen_range(-5.0..5.0);
        let xi = rng.gen_range(-5.0..5.0);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let v: Vec<f64> = raw.iter().map(|x| x / len).collect();
        let m = &(&SymMat::identity(n) * nu) + &(&SymMat::outer(&v) * xi);
        let mut expected = vec![nu; n - 1];
        expected.push(nu + xi);
        expected.sort_by(f64::total_cmp);
        let got = eigenvalues(&m).unwrap().values;
        for (a, b) in got.iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max eigenvalue error {worst:.2e} over 500 cases"))
}

fn barrier_certificate() -> Outcome {
    let (lam, big, b, c, r0) = (1.0, 2.0, 1.0, 1.0, 0.4);
    let ell = band(lam, big);
    let k = compute_k(ell, 2, b, c, r0);
    let k_expected = 4.0 * lam * (2.0 - 1.0) + 4.0 * big + 4.0 * b * r0 + c * r0 * r0;
    let choice = select_beta(lam, k, r0).unwrap();
    let beta_expected = 2.0 * (8.0 * lam + k_expected).powi(2) / (32.0 * lam * r0 * r0);
    let formulas = (k - k_expected).abs() < 1e-12 && (choice.beta - beta_expected).abs() < 1e-9 * beta_expected;

    let params = BarrierParams::new(vec![0.0, 0.0], 0.0, 0.1, r0, 1.0, choice.beta, 1.0).unwrap();
    let cert = certify_strict_supersolution(&params, ell, b, c, 64).unwrap();

    // closed-form derivatives against central differences
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fd_err = 0.0f64;
    let value = |x: &[f64], t: f64| params.value(x, t);
    for _ in 0..200 {
        let x = [rng.gen_range(-0.28..0.28), rng.gen_range(-0.28..0.28)];
        let t = rng.gen_range(0.0..0.1);
        let jet = params.jet(&x, t);
        let h1 = 1e-6;
        let h2 = 1e-4;
        for i in 0..2 {
            let mut a = x;
            let mut bb = x;
            a[i] += h1;
            bb[i] -= h1;
            let g = (value(&a, t) - value(&bb, t)) / (2.0 * h1);
            fd_err = fd_err.max((g - jet.gradient[i]).abs());
            for j in 0..2 {
                let mut s = 0.0;
                for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut y = x;
                    y[i] += si * h2;
                    y[j] += sj * h2;
                    s += w * value(&y, t);
                }
                fd_err = fd_err.max((s / (4.0 * h2 * h2) - jet.hessian.get(i, j)).abs());
            }
        }
    }

    let low = BarrierParams::new(vec![0.0, 0.0], 0.0, 0.1, r0, 1.0, 0.9 * choice.threshold, 1.0).unwrap();
    let low_cert = certify_strict_supersolution(&low, ell, b, c, 64).unwrap();
    let pass = formulas && cert.passed() && cert.margin > 0.0 && fd_err <= 1e-5 && !low_cert.passed();
    outcome(
        pass,
        format!(
            "K = {k}, beta = {:.4}, margin {:.3e} on {} samples, fd error {fd_err:.1e}, 0.9x threshold margin {:.3e} rejected = {}, K dominates bundled coefficient = {}",
            choice.beta,
            cert.margin,
            cert.samples,
            low_cert.margin,
            !low_cert.passed(),
            cert.k_dominates()
        ),
    )
}

fn psi_sweep() -> Outcome {
    let (lam, r0) = (1.0, 0.4);
    let k = compute_k(band(1.0, 2.0), 2, 1.0, 1.0, r0);
    let beta = select_beta(lam, k, r0).unwrap().beta;
    let min = (0..100_000)
        .map(|i| psi(r0 * r0 * i as f64 / 99_999.0, lam, k, beta, r0))
        .fold(f64::INFINITY, f64::min);
    let at_zero = psi(0.0, lam, k, beta, r0);
    outcome(
        min > 0.0 && (at_zero - 8.0 * lam * r0 * r0).abs() <= 1e-12,
        format!("min {min:.4e}, psi(0) = {at_zero}"),
    )
}

fn heat_error(h: f64) -> f64 {
    let spec = OperatorSpec::new(1, Principal::Linear(SymMat::identity(1)), band(1.0, 1.0), CoefficientField::zero())
        .unwrap();
    let g = Grid::box_grid(&[0.0], &[1.0], h).unwrap().with_cfl(&spec, 0.9);
    let u0 = g.sample(|x| (PI * x[0]).sin());
    let trace = evolve(&spec, &g, &u0, &|_, _| 0.0, 0.0, 0.1).unwrap();
    let (t, u) = trace.last();
    (0..g.len())
        .map(|i| (u.values[i] - (-PI * PI * t).exp() * (PI * g.coords(i)[0]).sin()).abs())
        .fold(0.0, f64::max)
}

fn heat_convergence() -> Outcome {
    let (e32, e64) = (heat_error(1.0 / 32.0), heat_error(1.0 / 64.0));
    let order = (e32 / e64).log2();
    outcome(order >= 1.8, format!("errors {e32:.3e} / {e64:.3e}, order {order:.3}"))
}

fn discrete_comparison_check() -> Outcome {
    let spec = OperatorSpec::new(
        2,
        Principal::Bellman(vec![
            SymMat::from_diag(&[1.0, 2.0]),
            SymMat::from_diag(&[2.0, 1.0]),
            SymMat::from_diag(&[1.5, 1.5]),
        ]),
        band(1.0, 2.0),
        CoefficientField::zero(),
    )
    .unwrap();
    let g = Grid::box_grid(&[-1.0, -1.0], &[1.0, 1.0], 0.1).unwrap().with_cfl(&spec, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (a, b, p) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..PI));
    let (lift, k) = (rng.gen_range(0.01..0.3), rng.gen_range(0.5..2.0));
    let fu = move |x: &[f64]| (a * x[0] + p).sin() * (b * x[1]).cos();
    let fv = move |x: &[f64]| fu(x) + lift * (1.5 + (k * (x[0] - x[1])).sin());
    let (u0, v0) = (g.sample(fu), g.sample(fv));
    let t_end = 500.0 * g.dt;
    let rep = discrete_comparison(&spec, &g, &u0, &v0, &|x, _| fu(x), &|x, _| fv(x), 0.0, t_end).unwrap();
    let worst = rep.max_gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let fast = g.clone().with_dt(10.0 * g.dt);
    let bad = discrete_comparison(&spec, &fast, &u0, &v0, &|x, _| fu(x), &|x, _| fv(x), 0.0, t_end).unwrap();
    let flagged = !bad.cfl_ok && !bad.ordered();
    outcome(
        rep.steps == 500 && rep.ordered() && worst <= 1e-12 && flagged,
        format!(
            "{} steps, max(u-v) = {worst:.3e}; dt x10 flagged = {flagged} (violation at step {:?})",
            rep.steps,
            bad.violation.as_ref().map(|v| v.step)
        ),
    )
}

/// `a·x + ½ xᵀQx + x₁³ - x₁x₂² + g t + k t |x|²`.
struct Cubic {
    a: [f64; 2],
    q: [f64; 3],
    g: f64,
    k: f64,
}

impl SmoothField for Cubic {
    fn dim(&self) -> usize {
        2
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        let [q11, q12, q22] = self.q;
        let (x1, x2) = (x[0], x[1]);
        let r2 = x1 * x1 + x2 * x2;
        let value = self.a[0] * x1
            + self.a[1] * x2
            + 0.5 * (q11 * x1 * x1 + 2.0 * q12 * x1 * x2 + q22 * x2 * x2)
            + x1.powi(3)
            - x1 * x2 * x2
            + self.g * t
            + self.k * t * r2;
        let mut hess = SymMat::zeros(2);
        hess.set(0, 0, q11 + 6.0 * x1 + 2.0 * self.k * t);
        hess.set(0, 1, q12 - 2.0 * x2);
        hess.set(1, 1, q22 - 2.0 * x1 + 2.0 * self.k * t);
        Jet {
            value,
            gradient: vec![
                self.a[0] + q11 * x1 + q12 * x2 + 3.0 * x1 * x1 - x2 * x2 + 2.0 * self.k * t * x1,
                self.a[1] + q12 * x1 + q22 * x2 - 2.0 * x1 * x2 + 2.0 * self.k * t * x2,
            ],
            hessian: hess,
            time_derivative: self.g + self.k * r2,
        }
    }
}

fn tilt_covariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ell = band(1.0, 2.0);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let mut r = || rng.gen_range(-2.0..2.0);
        let u = Cubic {
            a: [r(), r()],
            q: [r(), r(), r()],
            g: r(),
            k: r(),
        };
        let eta = [r(), r()];
        let (b, c) = (r().abs(), -r().abs());
        let xs = [r() / 2.0, r() / 2.0];
        let t = r().abs();
        let t1 = 0.1;
        let x = [xs[0] + eta[0] * (t - t1), xs[1] + eta[1] * (t - t1)];
        let direct = pucci_class_residual(ell, b, c, &[0.0, 0.0], &u.jet(&x, t)).unwrap();
        let moved = Tilted { field: &u, drift: eta.to_vec(), t1 };
        let tilted = pucci_class_residual(ell, b, c, &eta, &moved.jet(&xs, t)).unwrap();
        worst = worst.max((direct - tilted).abs() / (1.0 + direct.abs()));
    }
    let rep = run_experiment(&ExperimentConfig::new(Scenario::Inclined)).unwrap();
    let m = &rep.metrics;
    let pass = worst <= 1e-10 && rep.pass;
    outcome(
        pass,
        format!(
            "polynomial covariance error {worst:.2e}; traces: discrepancy {:.3e} vs 2 x self-error {:.3e}",
            m["discrepancy"],
            2.0 * m["self_error_straight"].max(m["self_error_tilted"])
        ),
    )
}

fn truncated_failure() -> Outcome {
    let rep = run_experiment(&ExperimentConfig::new(Scenario::TruncatedCounterexample)).unwrap();
    let m = &rep.metrics;
    outcome(
        rep.pass && m["super_residual"] == 0.0 && m["interior_min"] == 0.0 && m["interior_max"] > 0.0,
        format!(
            "super-residual {}, interior min {} at {} nodes, max {}",
            m["super_residual"], m["interior_min"], m["min_nodes"], m["interior_max"]
        ),
    )
}

fn positivity() -> Outcome {
    let rep = run_experiment(&ExperimentConfig::new(Scenario::Positivity)).unwrap();
    let min = rep.metrics["min_interior_after_t_pos"];
    outcome(rep.pass && min > 1e-12, format!("min over interior nodes for t >= 0.05: {min:.4e}"))
}

fn structure_checker() -> Outcome {
    let linear = OperatorSpec::new(
        2,
        Principal::Linear(SymMat::from_rows(&[vec![1.5, 0.3], vec![0.3, 1.2]]).unwrap()),
        band(1.0, 2.0),
        CoefficientField {
            b: ScalarField::Constant(1.0),
            c: ScalarField::Constant(-1.0),
            gradient: GradientTerm::Plus,
            ..CoefficientField::zero()
        },
    )
    .unwrap();
    let plap = OperatorSpec::normalized_p_laplacian(2, 3.0, ZeroGradient::Reject).unwrap();
    let plap_band = (plap.ellipticity().lower(), plap.ellipticity().upper());
    let cubic = OperatorSpec::new(
        2,
        Principal::Custom {
            name: "trace cubed".into(),
            f: Arc::new(|m: &SymMat| m.trace().powi(3)),
        },
        band(1.0, 2.0),
        CoefficientField::zero(),
    )
    .unwrap();
    let r_lin = check_structure_condition(&linear, 10_000, 2.0, 1).unwrap();
    let r_p = check_structure_condition(&plap, 10_000, 2.0, 2).unwrap();
    let r_cubic = check_structure_condition(&cubic, 1000, 2.0, 3).unwrap();
    outcome(
        r_lin.pass() && r_p.pass() && plap_band == (1.0, 2.0) && !r_cubic.pass(),
        format!(
            "linear {} / p-Laplacian {} of 10^4 clean, Tr^3 violations in 10^3: {}",
            r_lin.samples_checked - r_lin.violations.len(),
            r_p.samples_checked - r_p.violations.len(),
            r_cubic.violations.len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("pucci oracle equivalence", pucci_oracle),
        ("rank-one eigenvalue identity", rank_one),
        ("barrier certificate", barrier_certificate),
        ("psi positivity sweep", psi_sweep),
        ("solver convergence", heat_convergence),
        ("discrete comparison", discrete_comparison_check),
        ("tilt covariance", tilt_covariance),
        ("truncated pucci minimum-principle failure", truncated_failure),
        ("positivity conservation", positivity),
        ("structure-condition checker", structure_checker),
    ];
    let mut failed = 0;
    println!("acceptance suite");
    for (name, f) in criteria {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "{} of 10 criteria passed in {:.1}s",
        10 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
