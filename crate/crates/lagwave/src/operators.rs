//! Second-order difference operators for the spectral harmonic problems:
//! the self-adjoint acoustic operator in flux form, the coupled elastic
//! finite-volume operator with free-surface rows, and harmonic right-hand
//! side assembly with point-source injection.
//!
//! All operators act on r-weighted equations (each continuous equation is
//! multiplied by r before discretization), which makes the acoustic matrix
//! exactly symmetric and keeps the radial flux at the axis identically zero.

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::laguerre::{series_prefactor, ConvAccumulators};
use crate::medium::{sample_acoustic, AcousticCoefficients, AcousticMedium, ElasticMedium, Grid2D};
use rayon::prelude::*;

/// Acoustic spectral operator. `apply` evaluates
/// `(Lambda_r + Lambda_z) y - w y` (negative definite); `apply_spd` its
/// negation `M = w - (Lambda_r + Lambda_z)` (positive definite), which is
/// the orientation handed to CG.
///
/// Boundary closures: zero radial flux at the axis (the `r` weight vanishes
/// there), zero z-flux at both z boundaries, and an exact Dirichlet row at
/// `r = l1` — the last r-row is treated as eliminated (read as zero,
/// written back as an identity row).
pub struct AcousticOperator {
    grid: Grid2D,
    pub coeffs: AcousticCoefficients,
}

impl AcousticOperator {
    pub fn new(grid: &Grid2D, medium: &AcousticMedium, h: f64) -> Self {
        Self { grid: *grid, coeffs: sample_acoustic(medium, grid, h) }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// `(Lambda_r + Lambda_z) y - w y`; the eliminated Dirichlet row maps to
    /// `-y` so the whole matrix stays negative definite.
    pub fn apply(&self, y: &Field2D) -> Result<Field2D> {
        let mut out = self.apply_spd(y)?;
        out.scale(-1.0);
        Ok(out)
    }

    /// `M y` with `M = w - (Lambda_r + Lambda_z)`, symmetric positive
    /// definite; Dirichlet row maps to `+y`.
    pub fn apply_spd(&self, y: &Field2D) -> Result<Field2D> {
        let g = &self.grid;
        y.check_shape(g.n_r, g.n_z)?;
        let (n_r, n_z) = (g.n_r, g.n_z);
        let hr2 = g.h_r * g.h_r;
        let hz2 = g.h_z * g.h_z;
        let a1 = &self.coeffs.a1;
        let a2 = &self.coeffs.a2;
        let w = &self.coeffs.w;
        // Dirichlet row read as zero
        let yv = |i: usize, k: usize| if i == n_r - 1 { 0.0 } else { y.at(i, k) };

        let mut out = Field2D::zeros(n_r, n_z);
        out.rows_mut().enumerate().par_bridge().for_each(|(i, row)| {
            if i == n_r - 1 {
                for (k, v) in row.iter_mut().enumerate() {
                    *v = y.at(i, k);
                }
                return;
            }
            for (k, v) in row.iter_mut().enumerate() {
                let flux_r_hi = a1.at(i, k) * (yv(i + 1, k) - yv(i, k));
                let flux_r_lo =
                    if i == 0 { 0.0 } else { a1.at(i - 1, k) * (yv(i, k) - yv(i - 1, k)) };
                let lam_r = (flux_r_hi - flux_r_lo) / hr2;
                let flux_z_hi =
                    if k + 1 < n_z { a2.at(i, k) * (yv(i, k + 1) - yv(i, k)) } else { 0.0 };
                let flux_z_lo =
                    if k == 0 { 0.0 } else { a2.at(i, k - 1) * (yv(i, k) - yv(i, k - 1)) };
                let lam_z = (flux_z_hi - flux_z_lo) / hz2;
                *v = w.at(i, k) * yv(i, k) - lam_r - lam_z;
            }
        });
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Monopole,
    CenterOfPressure,
}

/// Point source description: position in meters, pulse parameters of
/// `source_time_function`.
#[derive(Debug, Clone, Copy)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub r0: f64,
    pub z0: f64,
    pub f0: f64,
    pub t0: f64,
    pub gamma: f64,
}

impl SourceSpec {
    /// Snap the source position to the nearest cell center; rejects
    /// positions outside the open domain.
    pub fn cell(&self, grid: &Grid2D) -> Result<(usize, usize)> {
        if !(self.r0 >= 0.0) || !(self.z0 > 0.0) {
            return Err(Error::invalid(format!(
                "source position must have r0 >= 0 and z0 > 0, got ({}, {})",
                self.r0, self.z0
            )));
        }
        if self.r0 >= grid.l1 || self.z0 >= grid.l2 {
            return Err(Error::invalid(format!(
                "source position ({}, {}) outside the domain interior",
                self.r0, self.z0
            )));
        }
        grid.nearest_cell(self.r0, self.z0)
    }
}

/// Acoustic point load: the Dirac delta becomes a Kronecker delta scaled by
/// the cell area, so the single nonzero entry is
/// `-f_m / (2 pi r_{i0} h_r h_z)` at the snapped source cell.
pub fn discretize_source_acoustic(
    source: &SourceSpec,
    grid: &Grid2D,
    f_m: f64,
) -> Result<Field2D> {
    if source.kind != SourceKind::Monopole {
        return Err(Error::invalid(
            "acoustic runs support monopole sources only; center-of-pressure is an elastic source",
        ));
    }
    let (i0, k0) = source.cell(grid)?;
    let mut phi = Field2D::zeros(grid.n_r, grid.n_z);
    let load = -f_m / (2.0 * std::f64::consts::PI * grid.r(i0) * grid.h_r * grid.h_z);
    phi.set(i0, k0, load);
    Ok(phi)
}

/// Elastic load pair `(F_r f_m, F_z f_m)` on the grid.
///
/// Monopole: a vertical point force, one entry in the `F_z` field.
/// Center of pressure: `F_r` and `F_z` are antisymmetric dipoles built by
/// centered differencing of the discrete delta along r and z; a ghost
/// entry landing across the axis folds back with the odd parity of the
/// radial displacement.
pub fn discretize_source_elastic(
    source: &SourceSpec,
    grid: &Grid2D,
    f_m: f64,
) -> Result<(Field2D, Field2D)> {
    let (i0, k0) = source.cell(grid)?;
    let mut f_r = Field2D::zeros(grid.n_r, grid.n_z);
    let mut f_z = Field2D::zeros(grid.n_r, grid.n_z);
    let base = f_m / (2.0 * std::f64::consts::PI * grid.r(i0) * grid.h_r * grid.h_z);
    match source.kind {
        SourceKind::Monopole => {
            f_z.set(i0, k0, base);
        }
        SourceKind::CenterOfPressure => {
            // d/dr of the discrete delta, centered
            let dip_r = base / (2.0 * grid.h_r);
            if i0 + 1 < grid.n_r {
                *f_r.at_mut(i0 + 1, k0) -= dip_r;
            }
            if i0 == 0 {
                // ghost cell -1 mirrors cell 0 with odd parity
                *f_r.at_mut(0, k0) -= dip_r;
            } else {
                *f_r.at_mut(i0 - 1, k0) += dip_r;
            }
            // d/dz of the discrete delta, centered
            let dip_z = base / (2.0 * grid.h_z);
            if k0 + 1 < grid.n_z {
                *f_z.at_mut(i0, k0 + 1) -= dip_z;
            }
            if k0 > 0 {
                *f_z.at_mut(i0, k0 - 1) += dip_z;
            }
        }
    }
    Ok((f_r, f_z))
}

/// Harmonic right-hand side of the acoustic spectral problem:
/// `phi = source + rho h^2 sqrt(m!/(m+alpha)!) S_m`, with `S_m` the
/// running convolution of prior harmonics. The solver-side system is
/// `M y = -r phi` (the driver applies the `-r` weight).
pub fn build_acoustic_rhs(
    m: usize,
    f_m: f64,
    source: &SourceSpec,
    acc: &ConvAccumulators,
    rho: &Field2D,
    h: f64,
    grid: &Grid2D,
) -> Result<Field2D> {
    rho.check_shape(grid.n_r, grid.n_z)?;
    let mut phi = discretize_source_acoustic(source, grid, f_m)?;
    let s_m = acc.sum(m)?;
    let scale = h * h * series_prefactor(m, acc_alpha(acc));
    for (v, (r, s)) in phi.as_mut_slice().iter_mut().zip(rho.as_slice().iter().zip(&s_m)) {
        *v += r * scale * s;
    }
    Ok(phi)
}

/// Harmonic right-hand side pair of the elastic spectral system:
/// `phi_Q = -rho F_r f_m + rho h^2 sqrt(m!/(m+alpha)!) S_m^Q` and the same
/// shape for `phi_U`.
#[allow(clippy::too_many_arguments)]
pub fn build_elastic_rhs(
    m: usize,
    f_m: f64,
    source: &SourceSpec,
    acc_q: &ConvAccumulators,
    acc_u: &ConvAccumulators,
    rho: &Field2D,
    h: f64,
    grid: &Grid2D,
) -> Result<(Field2D, Field2D)> {
    rho.check_shape(grid.n_r, grid.n_z)?;
    let (fr, fz) = discretize_source_elastic(source, grid, f_m)?;
    let s_q = acc_q.sum(m)?;
    let s_u = acc_u.sum(m)?;
    let scale = h * h * series_prefactor(m, acc_alpha(acc_q));
    let assemble = |f: &Field2D, s: &[f64]| {
        Field2D::from_fn(grid.n_r, grid.n_z, |i, k| {
            let rho_ik = rho.at(i, k);
            rho_ik * (-f.at(i, k) + scale * s[i * grid.n_z + k])
        })
    };
    Ok((assemble(&fr, &s_q), assemble(&fz, &s_u)))
}

fn acc_alpha(acc: &ConvAccumulators) -> u32 {
    acc.alpha()
}

/// Coupled elastic spectral operator on the displacement pair `(Q, U)`.
///
/// `apply` returns the positive-definite orientation `C = -L` of the
/// r-weighted finite-volume system. Axis parity: `Q` odd (ghost `-Q_0`),
/// `U` even (ghost `U_0`); free surface and the far z boundary enter as
/// zero z-flux rows (the z-flux of the Q equation is `r tau_rz`, of the U
/// equation `r sigma_zz`, both zero on the free surface); Dirichlet at
/// `r = l1` as in the acoustic case. Face materials are arithmetic means of
/// the adjacent cell centers; mixed derivatives are four-point averages of
/// centered differences, one-sided (3-point) at boundaries.
pub struct ElasticOperator {
    grid: Grid2D,
    lambda: Field2D,
    mu: Field2D,
    /// rho sampled at cell centers, for right-hand sides
    pub rho: Field2D,
    /// mass term `rho (h^2/4) r`
    w: Field2D,
}

impl ElasticOperator {
    pub fn new(grid: &Grid2D, medium: &ElasticMedium, h: f64) -> Result<Self> {
        if grid.n_r < 3 || grid.n_z < 3 {
            return Err(Error::invalid(format!(
                "elastic operator needs at least a 3x3 grid, got {}x{}",
                grid.n_r, grid.n_z
            )));
        }
        let lambda =
            Field2D::from_fn(grid.n_r, grid.n_z, |i, k| medium.lambda.value(grid.r(i), grid.z(k)));
        let mu = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| medium.mu.value(grid.r(i), grid.z(k)));
        let rho =
            Field2D::from_fn(grid.n_r, grid.n_z, |i, k| medium.rho.value(grid.r(i), grid.z(k)));
        let hm = h * h / 4.0;
        let w = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| rho.at(i, k) * hm * grid.r(i));
        Ok(Self { grid: *grid, lambda, mu, rho, w })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// `C (Q, U)`, positive definite; the Dirichlet row is an identity row.
    pub fn apply(&self, q: &Field2D, u: &Field2D) -> Result<(Field2D, Field2D)> {
        let g = &self.grid;
        q.check_shape(g.n_r, g.n_z)?;
        u.check_shape(g.n_r, g.n_z)?;
        let (n_r, n_z) = (g.n_r, g.n_z);
        let (h_r, h_z) = (g.h_r, g.h_z);
        let last = n_r - 1;

        // Dirichlet row eliminated: read the last r-row as zero.
        let qv = |i: usize, k: usize| if i == last { 0.0 } else { q.at(i, k) };
        let uv = |i: usize, k: usize| if i == last { 0.0 } else { u.at(i, k) };

        // centered/one-sided d/dz at a cell center
        let dz = |f: &dyn Fn(usize, usize) -> f64, i: usize, k: usize| -> f64 {
            if k == 0 {
                (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) / (2.0 * h_z)
            } else if k == n_z - 1 {
                (3.0 * f(i, k) - 4.0 * f(i, k - 1) + f(i, k - 2)) / (2.0 * h_z)
            } else {
                (f(i, k + 1) - f(i, k - 1)) / (2.0 * h_z)
            }
        };
        // centered d/dr at a cell center, with the axis ghost supplied by
        // parity (-1 for Q, +1 for U) and one-sided at the Dirichlet row
        let dr = |f: &dyn Fn(usize, usize) -> f64, parity: f64, i: usize, k: usize| -> f64 {
            if i == last {
                (3.0 * f(i, k) - 4.0 * f(i - 1, k) + f(i - 2, k)) / (2.0 * h_r)
            } else {
                let f_lo = if i == 0 { parity * f(0, k) } else { f(i - 1, k) };
                (f(i + 1, k) - f_lo) / (2.0 * h_r)
            }
        };

        let lam = |i: usize, k: usize| self.lambda.at(i, k);
        let mu = |i: usize, k: usize| self.mu.at(i, k);
        let lam2mu = |i: usize, k: usize| lam(i, k) + 2.0 * mu(i, k);

        let mut out_q = Field2D::zeros(n_r, n_z);
        let mut out_u = Field2D::zeros(n_r, n_z);
        out_q
            .rows_mut()
            .zip(out_u.rows_mut())
            .enumerate()
            .par_bridge()
            .for_each(|(i, (row_q, row_u))| {
                if i == last {
                    for k in 0..n_z {
                        row_q[k] = q.at(i, k);
                        row_u[k] = u.at(i, k);
                    }
                    return;
                }
                let r_i = g.r(i);
                for k in 0..n_z {
                    // radial fluxes at face i+1/2 (coordinate r_face(i));
                    // the lower face repeats the formula at i-1/2, zero on
                    // the axis where the r weight vanishes
                    let rflux = |face: usize| -> (f64, f64) {
                        let (il, ir) = (face, face + 1);
                        let rb = g.r_face(face);
                        let l2m_f = 0.5 * (lam2mu(il, k) + lam2mu(ir, k));
                        let lam_f = 0.5 * (lam(il, k) + lam(ir, k));
                        let mu_f = 0.5 * (mu(il, k) + mu(ir, k));
                        let dq_dr = (qv(ir, k) - qv(il, k)) / h_r;
                        let du_dr = (uv(ir, k) - uv(il, k)) / h_r;
                        let du_dz = 0.5 * (dz(&uv, il, k) + dz(&uv, ir, k));
                        let dq_dz = 0.5 * (dz(&qv, il, k) + dz(&qv, ir, k));
                        let q_over_r = 0.5 * (qv(il, k) / g.r(il) + qv(ir, k) / g.r(ir));
                        let fq = rb * (l2m_f * dq_dr + lam_f * (du_dz + q_over_r));
                        let fu = rb * mu_f * (dq_dz + du_dr);
                        (fq, fu)
                    };
                    let (rq_hi, ru_hi) = rflux(i);
                    let (rq_lo, ru_lo) = if i == 0 { (0.0, 0.0) } else { rflux(i - 1) };

                    // z fluxes at face k+1/2; zero at both z boundaries
                    // (free surface: r*tau_rz = r*sigma_zz = 0)
                    let zflux = |face: usize| -> (f64, f64) {
                        let (kl, ku) = (face, face + 1);
                        let l2m_f = 0.5 * (lam2mu(i, kl) + lam2mu(i, ku));
                        let lam_f = 0.5 * (lam(i, kl) + lam(i, ku));
                        let mu_f = 0.5 * (mu(i, kl) + mu(i, ku));
                        let dq_dz = (qv(i, ku) - qv(i, kl)) / h_z;
                        let du_dz = (uv(i, ku) - uv(i, kl)) / h_z;
                        let du_dr = 0.5 * (dr(&uv, 1.0, i, kl) + dr(&uv, 1.0, i, ku));
                        let dq_dr = 0.5 * (dr(&qv, -1.0, i, kl) + dr(&qv, -1.0, i, ku));
                        let q_over_r = 0.5 * (qv(i, kl) + qv(i, ku)) / r_i;
                        let fq = r_i * mu_f * (dq_dz + du_dr);
                        let fu = r_i * (l2m_f * du_dz + lam_f * (dq_dr + q_over_r));
                        (fq, fu)
                    };
                    let (zq_hi, zu_hi) = if k + 1 < n_z { zflux(k) } else { (0.0, 0.0) };
                    let (zq_lo, zu_lo) = if k == 0 { (0.0, 0.0) } else { zflux(k - 1) };

                    // cell-centered terms left over from the r-weighting
                    let dq_dr_c = dr(&qv, -1.0, i, k);
                    let du_dz_c = dz(&uv, i, k);
                    let center_q = -lam(i, k) * (dq_dr_c + du_dz_c + qv(i, k) / r_i)
                        - 2.0 * mu(i, k) * qv(i, k) / r_i;

                    let l_q = (rq_hi - rq_lo) / h_r + (zq_hi - zq_lo) / h_z + center_q
                        - self.w.at(i, k) * qv(i, k);
                    let l_u =
                        (ru_hi - ru_lo) / h_r + (zu_hi - zu_lo) / h_z - self.w.at(i, k) * uv(i, k);
                    row_q[k] = -l_q;
                    row_u[k] = -l_u;
                }
            });
        Ok((out_q, out_u))
    }
}
