//! Factor-once / solve-many tridiagonal engine.
//!
//! A sequential Thomas reference plus a partitioned solver: the matrix is
//! split into contiguous blocks, each block is factored once (O(N) total
//! preprocessing reusable across all right-hand sides), and per solve the
//! only cross-partition data are the block boundary unknowns, combined
//! through a small reduced system assembled left-to-right. No pivoting is
//! performed; all matrices produced by the separable preconditioner are
//! strictly diagonally dominant.

use crate::error::{Error, Result};
use rayon::prelude::*;

const PIVOT_FLOOR: f64 = 1e-300;

/// Tridiagonal matrix with `lower[0]` and `upper[n-1]` unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("tridiagonal matrix must have at least one row"));
        }
        if lower.len() != n || upper.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("3 bands of length {n}"),
                got: format!("{}/{}/{}", lower.len(), diag.len(), upper.len()),
            });
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// y = T x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }
}

/// Sequential Thomas elimination, the correctness oracle for the
/// partitioned path.
pub fn thomas_solve(t: &TridiagonalMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = t.n();
    if rhs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("rhs of length {n}"),
            got: format!("{}", rhs.len()),
        });
    }
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = t.diag[0];
    if pivot.abs() < PIVOT_FLOOR {
        return Err(Error::SingularSystem { row: 0, pivot });
    }
    c_prime[0] = t.upper[0] / pivot;
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = t.diag[i] - t.lower[i] * c_prime[i - 1];
        if pivot.abs() < PIVOT_FLOOR {
            return Err(Error::SingularSystem { row: i, pivot });
        }
        if i + 1 < n {
            c_prime[i] = t.upper[i] / pivot;
        }
        x[i] = (rhs[i] - t.lower[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] = x[i] - c_prime[i] * x[i + 1];
    }
    Ok(x)
}

/// A batch of right-hand sides for one factored matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsBatch {
    pub columns: Vec<Vec<f64>>,
}

impl RhsBatch {
    pub fn new(columns: Vec<Vec<f64>>) -> Self {
        Self { columns }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BlockFactor {
    start: usize,
    len: usize,
    /// Thomas factors of the block-local tridiagonal: normalized upper
    /// diagonal and inverse pivots.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
    lower: Vec<f64>,
    /// Spike responses to the left/right coupling unknowns.
    v: Vec<f64>,
    w: Vec<f64>,
}

impl BlockFactor {
    /// Local solve D_p x = b using the stored factors.
    fn solve_into(&self, b: &mut [f64]) {
        let n = self.len;
        b[0] *= self.inv_pivot[0];
        for i in 1..n {
            b[i] = (b[i] - self.lower[i] * b[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            b[i] -= self.c_prime[i] * b[i + 1];
        }
    }
}

/// Immutable preprocessing state for factor-once / solve-many solves.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTridiagonal {
    n: usize,
    workers: usize,
    blocks: Vec<BlockFactor>,
    /// Dense LU (no pivoting) of the reduced boundary system, row-major.
    reduced_lu: Vec<f64>,
    reduced_n: usize,
}

/// Factor `t` into `workers` logical partitions. The factored object is
/// immutable and reusable across unlimited solves; factoring twice yields
/// bit-identical state.
pub fn factor(t: &TridiagonalMatrix, workers: usize) -> Result<FactoredTridiagonal> {
    if workers == 0 {
        return Err(Error::invalid("worker count must be >= 1"));
    }
    let n = t.n();
    // every partition needs at least two rows for distinct boundary unknowns
    let workers = workers.min((n / 2).max(1));
    let mut blocks = Vec::with_capacity(workers);
    let base = n / workers;
    let rem = n % workers;
    let mut start = 0;
    for p in 0..workers {
        let len = base + usize::from(p < rem);
        let end = start + len;

        let mut c_prime = vec![0.0; len];
        let mut inv_pivot = vec![0.0; len];
        let lower: Vec<f64> = t.lower[start..end].to_vec();
        let mut pivot = t.diag[start];
        if pivot.abs() < PIVOT_FLOOR {
            return Err(Error::SingularSystem { row: start, pivot });
        }
        inv_pivot[0] = 1.0 / pivot;
        c_prime[0] = if len > 1 { t.upper[start] * inv_pivot[0] } else { 0.0 };
        for j in 1..len {
            pivot = t.diag[start + j] - lower[j] * c_prime[j - 1];
            if pivot.abs() < PIVOT_FLOOR {
                return Err(Error::SingularSystem { row: start + j, pivot });
            }
            inv_pivot[j] = 1.0 / pivot;
            if j + 1 < len {
                c_prime[j] = t.upper[start + j] * inv_pivot[j];
            }
        }

        let mut block = BlockFactor { start, len, c_prime, inv_pivot, lower, v: vec![], w: vec![] };

        // spike vectors: responses to the coupling off-diagonal entries
        let mut v = vec![0.0; len];
        if p > 0 {
            v[0] = t.lower[start];
            block.solve_into(&mut v);
        }
        let mut w = vec![0.0; len];
        if p + 1 < workers {
            w[len - 1] = t.upper[end - 1];
            block.solve_into(&mut w);
        }
        block.v = v;
        block.w = w;
        blocks.push(block);
        start = end;
    }

    // Reduced system in the boundary unknowns u = [h_0, t_0, h_1, t_1, ...]
    // (h_p / t_p: first / last unknown of block p):
    //   h_p + v_p[0]   t_{p-1} + w_p[0]   h_{p+1} = y_p[0]
    //   t_p + v_p[L]   t_{p-1} + w_p[L]   h_{p+1} = y_p[L]
    let rn = 2 * workers;
    let mut reduced = vec![0.0; rn * rn];
    for (p, b) in blocks.iter().enumerate() {
        let last = b.len - 1;
        let rows = [2 * p, 2 * p + 1];
        let picks = [0, last];
        for (row, pick) in rows.into_iter().zip(picks) {
            reduced[row * rn + row] = 1.0;
            if p > 0 {
                reduced[row * rn + (2 * p - 1)] += b.v[pick];
            }
            if p + 1 < workers {
                reduced[row * rn + (2 * p + 2)] += b.w[pick];
            }
        }
    }
    // in-place LU without pivoting (reduced system is diagonally dominant
    // for diagonally dominant inputs)
    let mut lu = reduced;
    for k in 0..rn {
        let pivot = lu[k * rn + k];
        if pivot.abs() < PIVOT_FLOOR {
            return Err(Error::SingularSystem { row: k, pivot });
        }
        for i in k + 1..rn {
            let m = lu[i * rn + k] / pivot;
            lu[i * rn + k] = m;
            if m != 0.0 {
                for j in k + 1..rn {
                    lu[i * rn + j] -= m * lu[k * rn + j];
                }
            }
        }
    }

    Ok(FactoredTridiagonal { n, workers, blocks, reduced_lu: lu, reduced_n: rn })
}

impl FactoredTridiagonal {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Solve T x = rhs for a single right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: format!("rhs of length {}", self.n),
                got: format!("{}", rhs.len()),
            });
        }
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        // local solves, block by block (left-to-right, fixed order)
        for b in &self.blocks {
            b.solve_into(&mut x[b.start..b.start + b.len]);
        }
        if self.workers == 1 {
            return;
        }
        // reduced boundary system
        let rn = self.reduced_n;
        let mut u = vec![0.0; rn];
        for (p, b) in self.blocks.iter().enumerate() {
            u[2 * p] = x[b.start];
            u[2 * p + 1] = x[b.start + b.len - 1];
        }
        // forward/back substitution with the stored LU
        for i in 1..rn {
            let mut s = u[i];
            for k in 0..i {
                s -= self.reduced_lu[i * rn + k] * u[k];
            }
            u[i] = s;
        }
        for i in (0..rn).rev() {
            let mut s = u[i];
            for k in i + 1..rn {
                s -= self.reduced_lu[i * rn + k] * u[k];
            }
            u[i] = s / self.reduced_lu[i * rn + i];
        }
        // back-substitute the boundary unknowns into each block
        for (p, b) in self.blocks.iter().enumerate() {
            let t_prev = if p > 0 { u[2 * p - 1] } else { 0.0 };
            let h_next = if p + 1 < self.workers { u[2 * p + 2] } else { 0.0 };
            let seg = &mut x[b.start..b.start + b.len];
            if t_prev != 0.0 {
                for (xi, vi) in seg.iter_mut().zip(&b.v) {
                    *xi -= vi * t_prev;
                }
            }
            if h_next != 0.0 {
                for (xi, wi) in seg.iter_mut().zip(&b.w) {
                    *xi -= wi * h_next;
                }
            }
        }
    }

    /// Solve T x = b for every column of the batch. Columns are independent
    /// and processed in parallel; each column's arithmetic is sequential, so
    /// results are bit-identical across reruns for a fixed worker count.
    pub fn solve_batched(&self, batch: &RhsBatch) -> Result<RhsBatch> {
        for col in &batch.columns {
            if col.len() != self.n {
                return Err(Error::ShapeMismatch {
                    expected: format!("columns of length {}", self.n),
                    got: format!("{}", col.len()),
                });
            }
        }
        let columns: Vec<Vec<f64>> = batch
            .columns
            .par_iter()
            .map(|col| {
                let mut x = col.clone();
                self.solve_in_place(&mut x);
                x
            })
            .collect();
        Ok(RhsBatch { columns })
    }
}

fn require_power_of_two(p: u64) -> Result<()> {
    if p == 0 || !p.is_power_of_two() {
        return Err(Error::invalid(format!("processor count must be a power of two >= 1, got {p}")));
    }
    Ok(())
}

/// Communication-time model for an all-reduce norm computation on `p`
/// processors: `2 log2(p) alpha + ((p-1)/p)(gamma + 2 beta)`.
pub fn comm_time_allreduce(p: u64, alpha_lat: f64, beta: f64, gamma: f64) -> Result<f64> {
    require_power_of_two(p)?;
    let pf = p as f64;
    let log2p = (p.trailing_zeros()) as f64;
    Ok(2.0 * log2p * alpha_lat + (pf - 1.0) / pf * (gamma + 2.0 * beta))
}

/// Communication-time model for the partitioned tridiagonal exchange with
/// `l` right-hand sides per exchange:
/// `alpha (log2(p)+1) log2(p) + l (log2(p) - (p-1)/p)(gamma + 2 beta)`.
pub fn comm_time_dichotomy(p: u64, l: f64, alpha_lat: f64, beta: f64, gamma: f64) -> Result<f64> {
    require_power_of_two(p)?;
    if l < 0.0 {
        return Err(Error::invalid(format!("rhs count per exchange must be >= 0, got {l}")));
    }
    let pf = p as f64;
    let log2p = (p.trailing_zeros()) as f64;
    Ok(alpha_lat * (log2p + 1.0) * log2p + l * (log2p - (pf - 1.0) / pf) * (gamma + 2.0 * beta))
}

#[cfg(test)]
pub(crate) fn random_diag_dominant(
    n: usize,
    rng: &mut impl rand::Rng,
) -> TridiagonalMatrix {
    let mut lower = vec![0.0_f64; n];
    let mut diag = vec![0.0_f64; n];
    let mut upper = vec![0.0_f64; n];
    for i in 0..n {
        if i > 0 {
            lower[i] = rng.gen_range(-1.0..1.0);
        }
        if i + 1 < n {
            upper[i] = rng.gen_range(-1.0..1.0);
        }
        let dominance = rng.gen_range(0.1..2.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        diag[i] = sign * (lower[i].abs() + upper[i].abs() + dominance);
    }
    TridiagonalMatrix::new(lower, diag, upper).unwrap()
}
