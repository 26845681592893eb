//! Embedded self-test suite: small, deterministic oracle checks over every
//! numerical kernel, runnable from the installed binary without the source
//! tree. All randomness comes from the caller-supplied seed.

use crate::field::Field2D;
use crate::krylov::{gmres_k, pcg, KrylovConfig};
use crate::laguerre::{
    conv_weight, forward_transform, inverse_series, series_prefactor, ConvAccumulators,
    LaguerreBasis,
};
use crate::medium::{AcousticMedium, Grid2D};
use crate::operators::AcousticOperator;
use crate::precond::build_acoustic_preconditioner;
use crate::tridiag::{factor, thomas_solve, RhsBatch, TridiagonalMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fault hooks for exercising the failure path of the suite itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultInjection {
    /// relative perturbation applied to the convolution weights used by the
    /// accumulator cross-check
    pub conv_weight_perturbation: f64,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SelfTestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelfTestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing_names(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("self-test report (seed {})\n", self.seed);
        for c in &self.checks {
            let status = if c.passed { "ok  " } else { "FAIL" };
            s.push_str(&format!("{status} {name}: {detail}\n", name = c.name, detail = c.detail));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        s.push_str(&format!(
            "{} checks, {} passed, {} failed\n",
            self.checks.len(),
            self.checks.len() - failed,
            failed
        ));
        s
    }
}

pub fn run_selftests(seed: u64) -> SelfTestReport {
    run_selftests_with_faults(seed, FaultInjection::default())
}

pub fn run_selftests_with_faults(seed: u64, faults: FaultInjection) -> SelfTestReport {
    let checks = vec![
        check_laguerre_roundtrip(),
        check_laguerre_accumulator(seed, faults),
        check_tridiagonal_oracle(seed),
        check_preconditioner_roundtrip(seed),
        check_operator_adjointness(seed),
        check_pcg_dense_oracle(seed),
        check_gmres_dense_oracle(seed),
    ];
    SelfTestReport { seed, checks }
}

fn finish(name: &'static str, err: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: err.is_finite() && err <= tol,
        detail: format!("error {err:.3e}, tolerance {tol:.1e}"),
    }
}

fn failed(name: &'static str, detail: String) -> CheckResult {
    CheckResult { name, passed: false, detail }
}

/// Forward transform of the source pulse, then pointwise reconstruction.
fn check_laguerre_roundtrip() -> CheckResult {
    const NAME: &str = "laguerre-roundtrip";
    let basis = match LaguerreBasis::new(9, 400.0, 600) {
        Ok(b) => b,
        Err(e) => return failed(NAME, e.to_string()),
    };
    let (f0, t0, gamma) = (30.0, 0.2, 4.0);
    let signal = move |t: f64| crate::laguerre::source_time_function(t, f0, t0, gamma);
    let t_end = 0.5;
    let series = match forward_transform(signal, &basis, 1e-4, t_end) {
        Ok(s) => s,
        Err(e) => return failed(NAME, e.to_string()),
    };
    let mut num = 0.0;
    let mut den = 0.0;
    let samples = 200;
    for j in 0..=samples {
        let t = t_end * j as f64 / samples as f64;
        let exact = signal(t);
        let approx = match inverse_series(&series, &basis, t) {
            Ok(v) => v,
            Err(e) => return failed(NAME, e.to_string()),
        };
        num += (exact - approx).powi(2);
        den += exact * exact;
    }
    finish(NAME, (num / den).sqrt(), 1e-6)
}

/// `m P − Q` accumulators against the direct convolution sum.
fn check_laguerre_accumulator(seed: u64, faults: FaultInjection) -> CheckResult {
    const NAME: &str = "laguerre-accumulator";
    let alpha = 7;
    let len = 11;
    let m_max = 25;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacc);
    let harmonics: Vec<Vec<f64>> = (0..m_max)
        .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut acc = ConvAccumulators::new(alpha, len);
    let mut worst: f64 = 0.0;
    for m in 0..m_max {
        if m > 0 {
            let via_acc: Vec<f64> = match acc.sum(m) {
                Ok(s) => s.iter().map(|v| series_prefactor(m, alpha) * v).collect(),
                Err(e) => return failed(NAME, e.to_string()),
            };
            let mut direct = vec![0.0; len];
            for (k, r_k) in harmonics.iter().enumerate().take(m) {
                let w = match conv_weight(m, k, alpha) {
                    Ok(w) => w * (1.0 + faults.conv_weight_perturbation),
                    Err(e) => return failed(NAME, e.to_string()),
                };
                for (d, r) in direct.iter_mut().zip(r_k) {
                    *d += w * r;
                }
            }
            let scale = direct.iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
            for (a, d) in via_acc.iter().zip(&direct) {
                worst = worst.max((a - d).abs() / scale);
            }
        }
        if let Err(e) = acc.step(m, &harmonics[m]) {
            return failed(NAME, e.to_string());
        }
    }
    finish(NAME, worst, 1e-12)
}

fn random_dominant_tridiagonal(n: usize, rng: &mut ChaCha8Rng) -> TridiagonalMatrix {
    // lower[0] and upper[n-1] are unused band slots
    let lower: Vec<f64> =
        (0..n).map(|i| if i == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    let upper: Vec<f64> =
        (0..n).map(|i| if i + 1 == n { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    let diag: Vec<f64> = (0..n)
        .map(|i| lower[i].abs() + upper[i].abs() + rng.gen_range(1.0..2.0))
        .collect();
    TridiagonalMatrix::new(lower, diag, upper).unwrap()
}

/// Partitioned batched solver against per-column Thomas elimination.
fn check_tridiagonal_oracle(seed: u64) -> CheckResult {
    const NAME: &str = "tridiagonal-oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3d1a);
    let n = 500;
    let cols = 8;
    let t = random_dominant_tridiagonal(n, &mut rng);
    let batch = RhsBatch::new(
        (0..cols)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    );
    let mut worst: f64 = 0.0;
    for workers in [1, 2, 4] {
        let f = match factor(&t, workers) {
            Ok(f) => f,
            Err(e) => return failed(NAME, e.to_string()),
        };
        let solved = match f.solve_batched(&batch) {
            Ok(s) => s,
            Err(e) => return failed(NAME, e.to_string()),
        };
        for c in 0..cols {
            let reference = match thomas_solve(&t, &batch.columns[c]) {
                Ok(x) => x,
                Err(e) => return failed(NAME, e.to_string()),
            };
            let scale = reference.iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
            for (x, y) in solved.columns[c].iter().zip(&reference) {
                worst = worst.max((x - y).abs() / scale);
            }
        }
    }
    finish(NAME, worst, 1e-12)
}

fn layered_test_medium() -> AcousticMedium {
    AcousticMedium::layered(vec![(60.0, 1.0, 1.0), (f64::INFINITY, 3.0, 2.0)])
}

/// The separable solver must invert its own operator: with the medium frozen
/// at the preconditioner's range-midpoint values, apply then apply_inverse
/// is the identity.
fn check_preconditioner_roundtrip(seed: u64) -> CheckResult {
    const NAME: &str = "preconditioner-roundtrip";
    let grid = match Grid2D::build(100.0, 120.0, 20, 24) {
        Ok(g) => g,
        Err(e) => return failed(NAME, e.to_string()),
    };
    let h = 200.0;
    let precond = match build_acoustic_preconditioner(&grid, &layered_test_medium(), h, 2) {
        Ok(p) => p,
        Err(e) => return failed(NAME, e.to_string()),
    };
    let tilde: std::collections::HashMap<String, f64> =
        precond.tilde_values().iter().cloned().collect();
    let frozen = AcousticMedium::homogeneous(tilde["kappa"], tilde["rho"]);
    let op = AcousticOperator::new(&grid, &frozen, h);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0);
    let mut x = Field2D::from_fn(grid.n_r, grid.n_z, |_, _| rng.gen_range(-1.0..1.0));
    x.row_mut(grid.n_r - 1).fill(0.0); // Dirichlet row
    let bx = match op.apply_spd(&x) {
        Ok(v) => v,
        Err(e) => return failed(NAME, e.to_string()),
    };
    let roundtrip = match precond.apply_inverse(&bx) {
        Ok(v) => v,
        Err(e) => return failed(NAME, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    let scale = x.max_abs();
    for (a, b) in roundtrip.as_slice().iter().zip(x.as_slice()) {
        worst = worst.max((a - b).abs() / scale);
    }
    finish(NAME, worst, 1e-10)
}

/// Symmetry of the sign-flipped operator in the Euclidean inner product.
fn check_operator_adjointness(seed: u64) -> CheckResult {
    const NAME: &str = "operator-adjointness";
    let grid = match Grid2D::build(90.0, 110.0, 17, 21) {
        Ok(g) => g,
        Err(e) => return failed(NAME, e.to_string()),
    };
    let op = AcousticOperator::new(&grid, &layered_test_medium(), 150.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xad);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let x = Field2D::from_fn(grid.n_r, grid.n_z, |_, _| rng.gen_range(-1.0..1.0));
        let y = Field2D::from_fn(grid.n_r, grid.n_z, |_, _| rng.gen_range(-1.0..1.0));
        let (ax, ay) = match (op.apply_spd(&x), op.apply_spd(&y)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return failed(NAME, e.to_string()),
        };
        let lhs = ax.dot(&y);
        let rhs = ay.dot(&x);
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300));
    }
    finish(NAME, worst, 1e-12)
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> nalgebra::DMatrix<f64> {
    let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.transpose() * &m + nalgebra::DMatrix::identity(n, n) * n as f64
}

/// Conjugate gradients against a dense direct solve.
fn check_pcg_dense_oracle(seed: u64) -> CheckResult {
    const NAME: &str = "pcg-dense-oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc6);
    let n = 40;
    let a = random_spd(n, &mut rng);
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let reference = match a.clone().lu().solve(&nalgebra::DVector::from_column_slice(&b)) {
        Some(x) => x,
        None => return failed(NAME, "dense reference solve failed".into()),
    };
    let apply = |x: &[f64]| (&a * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec();
    let ident = |x: &[f64]| x.to_vec();
    let config = KrylovConfig { tol: 1e-12, ..KrylovConfig::default() };
    let (x, stats) = match pcg(apply, ident, &b, &config) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e.to_string()),
    };
    if !stats.converged {
        return failed(NAME, format!("no convergence in {} iterations", stats.iterations));
    }
    let scale = reference.amax();
    let worst = x
        .iter()
        .zip(reference.iter())
        .fold(0.0_f64, |w, (p, q)| w.max((p - q).abs() / scale));
    finish(NAME, worst, 1e-9)
}

/// Restarted GMRES against a dense direct solve on a nonsymmetric system.
fn check_gmres_dense_oracle(seed: u64) -> CheckResult {
    const NAME: &str = "gmres-dense-oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x96);
    let n = 30;
    let mut a = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    for i in 0..n {
        a[(i, i)] += n as f64;
    }
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let reference = match a.clone().lu().solve(&nalgebra::DVector::from_column_slice(&b)) {
        Some(x) => x,
        None => return failed(NAME, "dense reference solve failed".into()),
    };
    let apply = |x: &[f64]| (&a * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec();
    let ident = |x: &[f64]| x.to_vec();
    let config = KrylovConfig { tol: 1e-12, restart_k: 10, ..KrylovConfig::default() };
    let (x, stats) = match gmres_k(apply, ident, &b, &config) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e.to_string()),
    };
    if !stats.converged {
        return failed(NAME, format!("no convergence in {} iterations", stats.iterations));
    }
    let scale = reference.amax();
    let worst = x
        .iter()
        .zip(reference.iter())
        .fold(0.0_f64, |w, (p, q)| w.max((p - q).abs() / scale));
    finish(NAME, worst, 1e-9)
}
