//! Krylov solvers for the harmonic systems: preconditioned conjugate
//! gradients for the symmetric positive-definite acoustic operator and
//! restarted GMRES(k) with left preconditioning for the nonsymmetric
//! elastic operator.
//!
//! Stopping is on the relative unpreconditioned residual
//! `||b - A x|| / ||b||`; all reductions use fixed-order summation so a run
//! is bitwise reproducible for any worker count.

use crate::error::{Error, Result};
use crate::field::{fixed_order_dot, fixed_order_norm};

#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    /// relative residual target, in (0, 1)
    pub tol: f64,
    pub max_iters: usize,
    /// restart length for GMRES(k)
    pub restart_k: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 1000, restart_k: 10 }
    }
}

impl KrylovConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid(format!("tol must be in (0, 1), got {}", self.tol)));
        }
        if self.max_iters == 0 || self.restart_k == 0 {
            return Err(Error::invalid("max_iters and restart_k must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub iterations: usize,
    /// relative unpreconditioned residual at exit
    pub final_residual: f64,
    /// one entry per iteration plus the initial residual; for GMRES the
    /// inner entries are the left-preconditioned least-squares estimates
    /// (nonincreasing within each restart cycle)
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Conjugate gradients on `A x = b` with split preconditioner applications
/// `z = B^{-1} r`. Returns when the relative residual meets `config.tol` or
/// `max_iters` is exhausted (reported in the stats, not an error).
/// Nonpositive curvature `(p, Ap) <= 0` signals a non-SPD operator.
pub fn pcg(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_b_inv: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    config: &KrylovConfig,
) -> Result<(Vec<f64>, SolveStats)> {
    config.validate()?;
    let n = rhs.len();
    let norm_b = fixed_order_norm(rhs);
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        let stats =
            SolveStats { iterations: 0, final_residual: 0.0, history: vec![0.0], converged: true };
        return Ok((x, stats));
    }

    let mut r = rhs.to_vec();
    let mut z = apply_b_inv(&r);
    let mut p = z.clone();
    let mut rz = fixed_order_dot(&r, &z);
    let mut history = vec![1.0];
    let mut rel = 1.0;
    let mut converged = false;

    for _ in 0..config.max_iters {
        let ap = apply_a(&p);
        let p_ap = fixed_order_dot(&p, &ap);
        if p_ap <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "conjugate gradients hit nonpositive curvature (p, Ap) = {p_ap:e}"
            )));
        }
        let alpha = rz / p_ap;
        for ((xi, pi), (ri, api)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        rel = fixed_order_norm(&r) / norm_b;
        history.push(rel);
        if rel <= config.tol {
            converged = true;
            break;
        }
        z = apply_b_inv(&r);
        let rz_new = fixed_order_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let stats = SolveStats {
        iterations: history.len() - 1,
        final_residual: rel,
        history,
        converged,
    };
    Ok((x, stats))
}

/// Restarted GMRES(k) on `C x = b` with left preconditioning by `K^{-1}`:
/// each cycle minimizes the preconditioned residual over the Krylov
/// subspace. Arnoldi breakdown terminates the cycle as a lucky exit;
/// three consecutive restart cycles without decrease of the true residual
/// raise a stagnation error.
pub fn gmres_k(
    apply_c: impl Fn(&[f64]) -> Vec<f64>,
    apply_k_inv: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    config: &KrylovConfig,
) -> Result<(Vec<f64>, SolveStats)> {
    config.validate()?;
    let n = rhs.len();
    let k = config.restart_k;
    let norm_b = fixed_order_norm(rhs);
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        let stats =
            SolveStats { iterations: 0, final_residual: 0.0, history: vec![0.0], converged: true };
        return Ok((x, stats));
    }

    let mut history = vec![1.0];
    let mut total_iters = 0usize;
    let mut best_true = f64::INFINITY;
    let mut flat_cycles = 0usize;
    let mut rel = 1.0;
    let mut converged = false;

    'outer: while total_iters < config.max_iters {
        // preconditioned residual of the current iterate
        let cx = apply_c(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&cx).map(|(b, a)| b - a).collect();
        let true_rel = fixed_order_norm(&r) / norm_b;
        rel = true_rel;
        if true_rel <= config.tol {
            converged = true;
            break;
        }
        if true_rel >= best_true * (1.0 - 1e-12) {
            flat_cycles += 1;
            if flat_cycles >= 3 {
                return Err(Error::Stagnation { cycles: flat_cycles, residual: true_rel });
            }
        } else {
            best_true = true_rel;
            flat_cycles = 0;
        }
        r = apply_k_inv(&r);
        let beta = fixed_order_norm(&r);
        if beta == 0.0 {
            converged = true;
            break;
        }
        // preconditioned reference norm for the in-cycle estimates
        let norm_pb = fixed_order_norm(&apply_k_inv(rhs));

        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // column-major upper Hessenberg, reduced in place by Givens rotations
        let mut h_cols: Vec<Vec<f64>> = Vec::new();
        let mut givens: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut cycle_len = 0usize;

        for j in 0..k {
            if total_iters >= config.max_iters {
                break;
            }
            let mut w = apply_k_inv(&apply_c(&basis[j]));
            let w_norm_before = fixed_order_norm(&w);
            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let c = fixed_order_dot(&w, v);
                h[i] = c;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
            // single reorthogonalization pass when the remaining overlap
            // with the basis exceeds 1e-8 relative to the incoming vector
            let reorth_tol = 1e-8 * w_norm_before;
            for (i, v) in basis.iter().enumerate() {
                let c = fixed_order_dot(&w, v);
                if c.abs() > reorth_tol {
                    h[i] += c;
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let w_norm = fixed_order_norm(&w);
            h[j + 1] = w_norm;

            // apply accumulated rotations, then a new one to annihilate h[j+1]
            for (i, &(c, s)) in givens.iter().enumerate() {
                let t = c * h[i] + s * h[i + 1];
                h[i + 1] = -s * h[i] + c * h[i + 1];
                h[i] = t;
            }
            let (c, s) = {
                let denom = (h[j] * h[j] + h[j + 1] * h[j + 1]).sqrt();
                if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) }
            };
            let t = c * h[j] + s * h[j + 1];
            h[j] = t;
            h[j + 1] = 0.0;
            givens.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;

            h_cols.push(h);
            total_iters += 1;
            cycle_len = j + 1;
            let est = g[j + 1].abs() / norm_pb;
            history.push(est);

            let lucky = w_norm <= 1e-14 * w_norm_before.max(1.0);
            if est <= config.tol || lucky {
                break;
            }
            if j + 1 < k {
                basis.push(w.iter().map(|v| v / w_norm).collect());
            }
        }

        if cycle_len == 0 {
            break 'outer;
        }
        // back-substitute the triangularized least-squares system
        let mut y = vec![0.0; cycle_len];
        for i in (0..cycle_len).rev() {
            let mut s = g[i];
            for (jj, y_jj) in y.iter().enumerate().skip(i + 1) {
                s -= h_cols[jj][i] * y_jj;
            }
            y[i] = s / h_cols[i][i];
        }
        for (j, y_j) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += y_j * vi;
            }
        }
    }

    if !converged {
        // final true residual after the last update
        let cx = apply_c(&x);
        let r: Vec<f64> = rhs.iter().zip(&cx).map(|(b, a)| b - a).collect();
        rel = fixed_order_norm(&r) / norm_b;
        converged = rel <= config.tol;
    }
    let stats = SolveStats {
        iterations: total_iters,
        final_residual: rel,
        history,
        converged,
    };
    Ok((x, stats))
}
