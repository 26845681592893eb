//! Separable preconditioners inverted by variable separation: an orthonormal
//! cosine-mode transform along z (the Neumann-Neumann eigenbasis of the
//! cell-centered second difference) followed by one factored tridiagonal
//! solve in r per mode. Factorizations are built once per medium and reused
//! across all harmonics and Krylov iterations.

use crate::error::{Error, Result};
use crate::field::{fixed_order_dot, Field2D};
use crate::medium::{tilde_on_grid, AcousticMedium, ElasticMedium, Grid2D};
use crate::tridiag::{factor, FactoredTridiagonal, TridiagonalMatrix};
use rayon::prelude::*;
use rustdct::DctPlanner;
use std::sync::Arc;

/// Orthonormal DCT-II / DCT-III pair along z.
pub struct ZModeTransform {
    n: usize,
    dct: Arc<dyn rustdct::TransformType2And3<f64>>,
    scale0: f64,
    scale: f64,
}

impl ZModeTransform {
    pub fn new(n: usize) -> Self {
        let dct = DctPlanner::new().plan_dct2(n);
        let nf = n as f64;
        Self { n, dct, scale0: (1.0 / nf).sqrt(), scale: (2.0 / nf).sqrt() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place orthonormal forward transform (DCT-II based).
    pub fn forward(&self, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.n);
        self.dct.process_dct2(row);
        row[0] *= self.scale0;
        for v in row.iter_mut().skip(1) {
            *v *= self.scale;
        }
    }

    /// In-place orthonormal inverse transform (DCT-III based).
    pub fn inverse(&self, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.n);
        // DCT-III halves the first input internally; compensate so the pair
        // is an exact orthonormal inverse.
        row[0] *= 2.0 * self.scale0;
        for v in row.iter_mut().skip(1) {
            *v *= self.scale;
        }
        self.dct.process_dct3(row);
    }
}

/// Eigenvalues of the cell-centered Neumann-Neumann second difference
/// along z: `mu_j = -(4/h_z^2) sin^2(pi j / (2 N_z))`.
pub fn z_mode_eigenvalues(n_z: usize, h_z: f64) -> Vec<f64> {
    (0..n_z)
        .map(|j| {
            let s = (std::f64::consts::PI * j as f64 / (2.0 * n_z as f64)).sin();
            -4.0 / (h_z * h_z) * s * s
        })
        .collect()
}

struct Block {
    /// one factored tridiagonal system in r per z mode
    factors: Vec<FactoredTridiagonal>,
}

/// Separable preconditioner: `B = Lambda_r + Lambda_z - d` with
/// range-midpoint material coefficients, assembled in positive-definite
/// orientation (`-B`) so every per-mode tridiagonal system is strictly
/// diagonally dominant.
pub struct SeparablePreconditioner {
    grid: Grid2D,
    zmode: ZModeTransform,
    blocks: Vec<Block>,
    tilde_values: Vec<(String, f64)>,
    workers: usize,
}

/// Per-mode system for a block of the separable operator:
/// unknowns i = 0..n_r-2 (the Dirichlet node at r = l1 is eliminated),
/// diag(i) = (a1(i-1/2) + a1(i+1/2))/h_r^2 + d(i) - mu_j * c_z * r_i,
/// offdiag(i, i+1) = -a1(i+1/2)/h_r^2.
fn mode_matrix(
    grid: &Grid2D,
    radial_coef: f64,
    z_coef: f64,
    d: &(dyn Fn(f64) -> f64 + Sync),
    mu_j: f64,
) -> TridiagonalMatrix {
    let n = grid.n_r - 1;
    let hr2 = grid.h_r * grid.h_r;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let r_i = grid.r(i);
        let a_left = if i == 0 { 0.0 } else { grid.r_face(i - 1) * radial_coef };
        let a_right = grid.r_face(i) * radial_coef;
        diag[i] = (a_left + a_right) / hr2 + d(r_i) - mu_j * z_coef * r_i;
        if i > 0 {
            lower[i] = -a_left / hr2;
        }
        if i + 1 < n {
            upper[i] = -a_right / hr2;
        }
    }
    TridiagonalMatrix::new(lower, diag, upper).expect("mode matrix bands are consistent")
}

fn build_block(
    grid: &Grid2D,
    radial_coef: f64,
    z_coef: f64,
    d: &(dyn Fn(f64) -> f64 + Sync),
    workers: usize,
) -> Result<Block> {
    let eigenvalues = z_mode_eigenvalues(grid.n_z, grid.h_z);
    let factors = eigenvalues
        .par_iter()
        .map(|&mu_j| factor(&mode_matrix(grid, radial_coef, z_coef, d, mu_j), workers))
        .collect::<Result<Vec<_>>>()?;
    Ok(Block { factors })
}

pub fn build_acoustic_preconditioner(
    grid: &Grid2D,
    medium: &AcousticMedium,
    h: f64,
    workers: usize,
) -> Result<SeparablePreconditioner> {
    let kappa_t = tilde_on_grid(medium.kappa.as_ref(), grid);
    let rho_t = tilde_on_grid(medium.rho.as_ref(), grid);
    let hm = h * h / 4.0;
    let d = move |r: f64| r * hm * rho_t;
    let block = build_block(grid, kappa_t, kappa_t, &d, workers)?;
    Ok(SeparablePreconditioner {
        grid: *grid,
        zmode: ZModeTransform::new(grid.n_z),
        blocks: vec![block],
        tilde_values: vec![("kappa".into(), kappa_t), ("rho".into(), rho_t)],
        workers,
    })
}

pub fn build_elastic_preconditioner(
    grid: &Grid2D,
    medium: &ElasticMedium,
    h: f64,
    workers: usize,
) -> Result<SeparablePreconditioner> {
    let lam2mu = |r: f64, z: f64| medium.lambda.value(r, z) + 2.0 * medium.mu.value(r, z);
    let lam2mu_t = tilde_on_grid(&lam2mu, grid);
    let mu_t = tilde_on_grid(medium.mu.as_ref(), grid);
    let rho_t = tilde_on_grid(medium.rho.as_ref(), grid);
    let hm = h * h / 4.0;
    // B1: a1 = rbar (lambda+2mu)~, a2 = r mu~, d = r rho~ h^2/4 + (lambda+2mu)~/r
    let d1 = move |r: f64| r * hm * rho_t + lam2mu_t / r;
    let b1 = build_block(grid, lam2mu_t, mu_t, &d1, workers)?;
    // B2: a1 = rbar mu~, a2 = r (lambda+2mu)~, d = r rho~ h^2/4 (as printed)
    let d2 = move |r: f64| r * hm * rho_t;
    let b2 = build_block(grid, mu_t, lam2mu_t, &d2, workers)?;
    Ok(SeparablePreconditioner {
        grid: *grid,
        zmode: ZModeTransform::new(grid.n_z),
        blocks: vec![b1, b2],
        tilde_values: vec![
            ("lambda+2mu".into(), lam2mu_t),
            ("mu".into(), mu_t),
            ("rho".into(), rho_t),
        ],
        workers,
    })
}

impl SeparablePreconditioner {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Range-midpoint coefficient values used in the separable operator.
    pub fn tilde_values(&self) -> &[(String, f64)] {
        &self.tilde_values
    }

    /// Solve `(-B) y = phi` exactly (one block).
    pub fn apply_inverse(&self, phi: &Field2D) -> Result<Field2D> {
        self.apply_inverse_block(0, phi)
    }

    /// Solve block `idx` of the block-diagonal operator.
    pub fn apply_inverse_block(&self, idx: usize, phi: &Field2D) -> Result<Field2D> {
        let block = self
            .blocks
            .get(idx)
            .ok_or_else(|| Error::invalid(format!("preconditioner has no block {idx}")))?;
        phi.check_shape(self.grid.n_r, self.grid.n_z)?;
        let n_ur = self.grid.n_r - 1;
        let n_z = self.grid.n_z;

        // forward z-transform per r-row (Dirichlet row excluded)
        let mut hat = phi.clone();
        hat.rows_mut().take(n_ur).par_bridge().for_each(|row| {
            self.zmode.forward(row);
        });

        // per-mode tridiagonal solves in r
        let solved: Vec<Vec<f64>> = (0..n_z)
            .into_par_iter()
            .map(|j| {
                let mut col: Vec<f64> = (0..n_ur).map(|i| hat.at(i, j)).collect();
                block.factors[j].solve_in_place(&mut col);
                col
            })
            .collect();
        for (j, col) in solved.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                hat.set(i, j, v);
            }
        }

        // inverse z-transform per r-row
        hat.rows_mut().take(n_ur).par_bridge().for_each(|row| {
            self.zmode.inverse(row);
        });
        hat.row_mut(n_ur).fill(0.0);
        Ok(hat)
    }

    /// Blockwise inverse for the elastic pair (Q, U).
    pub fn apply_inverse_pair(&self, q: &Field2D, u: &Field2D) -> Result<(Field2D, Field2D)> {
        if self.blocks.len() != 2 {
            return Err(Error::invalid("pairwise inverse requires a two-block preconditioner"));
        }
        let yq = self.apply_inverse_block(0, q)?;
        let yu = self.apply_inverse_block(1, u)?;
        Ok((yq, yu))
    }
}

/// Estimate the energy-equivalence constants `gamma1 <= gamma2` of the
/// pencil (A, B) — the extreme generalized Rayleigh quotients — by Lanczos
/// iteration on `A B^{-1}` in the `B^{-1}` inner product (so only
/// applications of A and of `B^{-1}` are needed).
pub fn estimate_energy_bounds(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_b_inv: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    max_iters: usize,
    tol: f64,
) -> Result<(f64, f64)> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1a6e);

    let mut v: Vec<Vec<f64>> = Vec::new(); // Lanczos basis
    let mut z: Vec<Vec<f64>> = Vec::new(); // z_i = B^{-1} v_i
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let v0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let z0 = apply_b_inv(&v0);
    let norm0 = fixed_order_dot(&v0, &z0).sqrt();
    if !(norm0 > 0.0) {
        return Err(Error::NotPositiveDefinite("B^{-1} norm of start vector vanished".into()));
    }
    v.push(v0.iter().map(|x| x / norm0).collect());
    z.push(z0.iter().map(|x| x / norm0).collect());

    let mut prev_bounds: Option<(f64, f64)> = None;
    for j in 0..max_iters {
        let mut w = apply_a(&z[j]);
        // full reorthogonalization in the B^{-1} inner product
        for i in 0..=j {
            let c = fixed_order_dot(&w, &z[i]);
            if i == j {
                alphas.push(c);
            }
            for (wk, vk) in w.iter_mut().zip(&v[i]) {
                *wk -= c * vk;
            }
        }
        let zw = apply_b_inv(&w);
        let beta = fixed_order_dot(&w, &zw).max(0.0).sqrt();
        let bounds = ritz_extremes(&alphas, &betas);
        let scale_t = alphas
            .iter()
            .chain(betas.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        if beta <= 1e-10 * scale_t || v.len() == n {
            // invariant subspace found (or full space spanned); bounds are exact
            return Ok(bounds);
        }
        if let Some((p1, p2)) = prev_bounds {
            let scale = bounds.1.abs().max(1e-300);
            if ((bounds.0 - p1).abs() + (bounds.1 - p2).abs()) / scale < tol {
                return Ok(bounds);
            }
        }
        prev_bounds = Some(bounds);
        betas.push(beta);
        v.push(w.iter().map(|x| x / beta).collect());
        z.push(zw.iter().map(|x| x / beta).collect());
    }
    let (g1, g2) = prev_bounds.unwrap_or((f64::NAN, f64::NAN));
    Err(Error::NoConvergence(format!(
        "energy-bound estimation did not settle after {max_iters} iterations; best estimates gamma1 = {g1:.6e}, gamma2 = {g2:.6e}"
    )))
}

fn ritz_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    let mut t = nalgebra::DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &e in eig.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    (lo, hi)
}
