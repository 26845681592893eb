//! Harmonic-loop orchestration: for m = 0..n-1 build the right-hand side
//! from the source spectrum and the convolution accumulators, solve the
//! harmonic system (CG acoustic, GMRES(k) elastic), fold the solution back
//! into the accumulators, and collect receiver coefficients and snapshot
//! partial sums on the fly. Time-domain traces are reconstructed after the
//! loop; peak field storage stays O(1) fields regardless of n.

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::krylov::{gmres_k, pcg, KrylovConfig, SolveStats};
use crate::laguerre::{
    forward_transform, inverse_kernel, source_time_function, ConvAccumulators, LaguerreBasis,
};
use crate::medium::{AcousticMedium, ElasticMedium, Grid2D};
use crate::operators::{
    build_acoustic_rhs, build_elastic_rhs, AcousticOperator, ElasticOperator, SourceSpec,
};
use crate::precond::{build_acoustic_preconditioner, build_elastic_preconditioner};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub grid: Grid2D,
    pub basis: LaguerreBasis,
    pub source: SourceSpec,
    /// scales the source pulse; outputs are exactly linear in it
    pub amplitude: f64,
    /// receiver positions (r, z) in meters, snapped to cell centers
    pub receivers: Vec<(f64, f64)>,
    pub snapshot_times: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub solver: KrylovConfig,
    /// tridiagonal partition width inside the preconditioner
    pub workers: usize,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        self.source.cell(g)?;
        for &(r, z) in &self.receivers {
            if !(0.0..=g.l1).contains(&r) || !(0.0..=g.l2).contains(&z) {
                return Err(Error::invalid(format!(
                    "receiver ({r}, {z}) outside domain [0, {}] x [0, {}]",
                    g.l1, g.l2
                )));
            }
        }
        if !(self.dt > 0.0) || !(self.t_end > self.t_start) || self.t_start < 0.0 {
            return Err(Error::invalid(format!(
                "output time grid invalid: t_start = {}, t_end = {}, dt = {}",
                self.t_start, self.t_end, self.dt
            )));
        }
        for &t in &self.snapshot_times {
            if t < 0.0 {
                return Err(Error::invalid(format!("snapshot time {t} is negative")));
            }
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }

    fn times(&self) -> Vec<f64> {
        let count = ((self.t_end - self.t_start) / self.dt).floor() as usize + 1;
        (0..count).map(|i| self.t_start + i as f64 * self.dt).collect()
    }

    /// Source spectrum `amplitude * f_m` via the forward transform of the
    /// pulse; quadrature resolution and truncation follow the pulse support.
    pub fn source_spectrum(&self) -> Result<Vec<f64>> {
        let s = &self.source;
        let support = 8.0 * s.gamma / (2.0 * std::f64::consts::PI * s.f0);
        let t_end = s.t0 + support;
        let dt = (1.0 / (20.0 * s.f0)).min(2.0 / self.basis.h()).min(t_end / 4.0);
        let amp = self.amplitude;
        let series = forward_transform(
            |t| amp * source_time_function(t, s.f0, s.t0, s.gamma),
            &self.basis,
            dt,
            t_end,
        )?;
        Ok(series.coefficients)
    }

    /// Earliest possible boundary-reflected arrival at any receiver; used
    /// only for the credibility warning on t_end.
    fn reflection_window(&self, c_max: f64) -> f64 {
        let g = &self.grid;
        let (r0, z0) = (self.source.r0, self.source.z0);
        let mut earliest = f64::INFINITY;
        for &(r, z) in &self.receivers {
            let via_r = (g.l1 - r0) + (g.l1 - r);
            let via_z = (g.l2 - z0) + (g.l2 - z);
            earliest = earliest.min(via_r.min(via_z) / c_max);
        }
        earliest
    }
}

#[derive(Debug, Clone)]
pub struct ReceiverTrace {
    /// requested position
    pub position: (f64, f64),
    /// snapped cell indices
    pub cell: (usize, usize),
    /// one series per component: acoustic `[u]`, elastic `[u_r, u_z]`
    pub components: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Seismogram {
    pub times: Vec<f64>,
    pub traces: Vec<ReceiverTrace>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    /// acoustic `[u]`, elastic `[u_r, u_z]`
    pub fields: Vec<Field2D>,
}

#[derive(Debug, Clone)]
pub struct HarmonicStat {
    pub m: usize,
    pub iterations: usize,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub harmonics: Vec<HarmonicStat>,
    pub preconditioner_builds: usize,
    pub warnings: Vec<String>,
    pub total_seconds: f64,
}

impl RunReport {
    pub fn total_iterations(&self) -> usize {
        self.harmonics.iter().map(|h| h.iterations).sum()
    }

    pub fn max_iterations(&self) -> usize {
        self.harmonics.iter().map(|h| h.iterations).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# run report\n");
        out.push_str(&format!("preconditioner_builds {}\n", self.preconditioner_builds));
        out.push_str(&format!("total_seconds {:.6}\n", self.total_seconds));
        out.push_str(&format!("total_iterations {}\n", self.total_iterations()));
        for w in &self.warnings {
            out.push_str(&format!("warning {w}\n"));
        }
        out.push_str("# m iterations residual seconds\n");
        for h in &self.harmonics {
            out.push_str(&format!(
                "{} {} {:.3e} {:.6}\n",
                h.m, h.iterations, h.residual, h.seconds
            ));
        }
        out
    }
}

fn record_failure(m: usize, stats: &SolveStats) -> Error {
    Error::NoConvergence(format!(
        "harmonic m = {m} stopped at relative residual {:.3e} after {} iterations",
        stats.final_residual, stats.iterations
    ))
}

/// `-r_i phi`: the right-hand side of the positive-definite r-weighted
/// system solved per harmonic.
fn weighted_rhs(grid: &Grid2D, phi: &Field2D) -> Vec<f64> {
    let mut b = Vec::with_capacity(phi.len());
    for i in 0..grid.n_r {
        let r = grid.r(i);
        for k in 0..grid.n_z {
            b.push(-r * phi.at(i, k));
        }
    }
    b
}

pub fn run_acoustic(
    config: &SimulationConfig,
    medium: &AcousticMedium,
) -> Result<(Seismogram, Vec<Snapshot>, RunReport)> {
    config.validate()?;
    let start = Instant::now();
    let grid = config.grid;
    let (n_r, n_z) = (grid.n_r, grid.n_z);
    let n_cells = n_r * n_z;
    let basis = &config.basis;
    let n = basis.n();
    let h = basis.h();

    let op = AcousticOperator::new(&grid, medium, h);
    let precond = build_acoustic_preconditioner(&grid, medium, h, config.workers)?;
    let mut report = RunReport { preconditioner_builds: 1, ..Default::default() };

    let c_max = (0..n_r)
        .flat_map(|i| (0..n_z).map(move |k| (i, k)))
        .map(|(i, k)| {
            (medium.kappa.value(grid.r(i), grid.z(k)) / medium.rho.value(grid.r(i), grid.z(k)))
                .sqrt()
        })
        .fold(0.0_f64, f64::max);
    let reflect = config.reflection_window(c_max);
    if config.t_end > reflect {
        report.warnings.push(format!(
            "t_end = {} exceeds the first possible boundary reflection at {:.4} s",
            config.t_end, reflect
        ));
    }

    let f_series = config.source_spectrum()?;
    let mut acc = ConvAccumulators::new(basis.alpha(), n_cells);
    let cells: Vec<(usize, usize)> = config
        .receivers
        .iter()
        .map(|&(r, z)| grid.nearest_cell(r, z))
        .collect::<Result<Vec<_>>>()?;
    let mut receiver_coeffs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); cells.len()];
    let snapshot_kernels: Vec<Vec<f64>> = config
        .snapshot_times
        .iter()
        .map(|&t| inverse_kernel(basis, t, n - 1))
        .collect::<Result<Vec<_>>>()?;
    let mut snapshot_sums: Vec<Field2D> =
        config.snapshot_times.iter().map(|_| Field2D::zeros(n_r, n_z)).collect();

    for m in 0..n {
        let tick = Instant::now();
        let phi = build_acoustic_rhs(m, f_series[m], &config.source, &acc, &op.coeffs.rho, h, &grid)?;
        let b = weighted_rhs(&grid, &phi);
        let apply_a = |v: &[f64]| {
            let f = Field2D::from_slice(n_r, n_z, v).expect("solver vector has grid shape");
            op.apply_spd(&f).expect("operator shapes are fixed").into_vec()
        };
        let apply_b_inv = |v: &[f64]| {
            let f = Field2D::from_slice(n_r, n_z, v).expect("solver vector has grid shape");
            precond.apply_inverse(&f).expect("preconditioner shapes are fixed").into_vec()
        };
        let (x, stats) = pcg(apply_a, apply_b_inv, &b, &config.solver)?;
        if !stats.converged {
            return Err(record_failure(m, &stats));
        }
        acc.step(m, &x)?;
        for (coeffs, &(ci, ck)) in receiver_coeffs.iter_mut().zip(&cells) {
            coeffs.push(x[ci * n_z + ck]);
        }
        let r_m = Field2D::from_slice(n_r, n_z, &x)?;
        for (sum, kernel) in snapshot_sums.iter_mut().zip(&snapshot_kernels) {
            sum.axpy(kernel[m], &r_m);
        }
        report.harmonics.push(HarmonicStat {
            m,
            iterations: stats.iterations,
            residual: stats.final_residual,
            seconds: tick.elapsed().as_secs_f64(),
        });
    }

    let seismogram = reconstruct(config, &cells, &[receiver_coeffs])?;
    let snapshots = config
        .snapshot_times
        .iter()
        .zip(snapshot_sums)
        .map(|(&time, field)| Snapshot { time, fields: vec![field] })
        .collect();
    report.total_seconds = start.elapsed().as_secs_f64();
    Ok((seismogram, snapshots, report))
}

pub fn run_elastic(
    config: &SimulationConfig,
    medium: &ElasticMedium,
) -> Result<(Seismogram, Vec<Snapshot>, RunReport)> {
    config.validate()?;
    let start = Instant::now();
    let grid = config.grid;
    let (n_r, n_z) = (grid.n_r, grid.n_z);
    let n_cells = n_r * n_z;
    let basis = &config.basis;
    let n = basis.n();
    let h = basis.h();

    let op = ElasticOperator::new(&grid, medium, h)?;
    let precond = build_elastic_preconditioner(&grid, medium, h, config.workers)?;
    let mut report = RunReport { preconditioner_builds: 1, ..Default::default() };

    let vp_max = (0..n_r)
        .flat_map(|i| (0..n_z).map(move |k| (i, k)))
        .map(|(i, k)| {
            let (r, z) = (grid.r(i), grid.z(k));
            ((medium.lambda.value(r, z) + 2.0 * medium.mu.value(r, z)) / medium.rho.value(r, z))
                .sqrt()
        })
        .fold(0.0_f64, f64::max);
    let reflect = config.reflection_window(vp_max);
    if config.t_end > reflect {
        report.warnings.push(format!(
            "t_end = {} exceeds the first possible boundary reflection at {:.4} s",
            config.t_end, reflect
        ));
    }

    let f_series = config.source_spectrum()?;
    let mut acc_q = ConvAccumulators::new(basis.alpha(), n_cells);
    let mut acc_u = ConvAccumulators::new(basis.alpha(), n_cells);
    let cells: Vec<(usize, usize)> = config
        .receivers
        .iter()
        .map(|&(r, z)| grid.nearest_cell(r, z))
        .collect::<Result<Vec<_>>>()?;
    let mut coeffs_q: Vec<Vec<f64>> = vec![Vec::with_capacity(n); cells.len()];
    let mut coeffs_u: Vec<Vec<f64>> = vec![Vec::with_capacity(n); cells.len()];
    let snapshot_kernels: Vec<Vec<f64>> = config
        .snapshot_times
        .iter()
        .map(|&t| inverse_kernel(basis, t, n - 1))
        .collect::<Result<Vec<_>>>()?;
    let mut snap_q: Vec<Field2D> =
        config.snapshot_times.iter().map(|_| Field2D::zeros(n_r, n_z)).collect();
    let mut snap_u = snap_q.clone();

    for m in 0..n {
        let tick = Instant::now();
        let (phi_q, phi_u) =
            build_elastic_rhs(m, f_series[m], &config.source, &acc_q, &acc_u, &op.rho, h, &grid)?;
        let mut b = weighted_rhs(&grid, &phi_q);
        b.extend(weighted_rhs(&grid, &phi_u));
        let apply_c = |v: &[f64]| {
            let q = Field2D::from_slice(n_r, n_z, &v[..n_cells]).expect("packed pair shape");
            let u = Field2D::from_slice(n_r, n_z, &v[n_cells..]).expect("packed pair shape");
            let (cq, cu) = op.apply(&q, &u).expect("operator shapes are fixed");
            let mut out = cq.into_vec();
            out.extend(cu.into_vec());
            out
        };
        let apply_k_inv = |v: &[f64]| {
            let q = Field2D::from_slice(n_r, n_z, &v[..n_cells]).expect("packed pair shape");
            let u = Field2D::from_slice(n_r, n_z, &v[n_cells..]).expect("packed pair shape");
            let (yq, yu) = precond.apply_inverse_pair(&q, &u).expect("preconditioner shapes fixed");
            let mut out = yq.into_vec();
            out.extend(yu.into_vec());
            out
        };
        let (x, stats) = gmres_k(apply_c, apply_k_inv, &b, &config.solver)?;
        if !stats.converged {
            return Err(record_failure(m, &stats));
        }
        acc_q.step(m, &x[..n_cells])?;
        acc_u.step(m, &x[n_cells..])?;
        for ((cq, cu), &(ci, ck)) in coeffs_q.iter_mut().zip(&mut coeffs_u).zip(&cells) {
            cq.push(x[ci * n_z + ck]);
            cu.push(x[n_cells + ci * n_z + ck]);
        }
        let q_m = Field2D::from_slice(n_r, n_z, &x[..n_cells])?;
        let u_m = Field2D::from_slice(n_r, n_z, &x[n_cells..])?;
        for ((sq, su), kernel) in snap_q.iter_mut().zip(&mut snap_u).zip(&snapshot_kernels) {
            sq.axpy(kernel[m], &q_m);
            su.axpy(kernel[m], &u_m);
        }
        report.harmonics.push(HarmonicStat {
            m,
            iterations: stats.iterations,
            residual: stats.final_residual,
            seconds: tick.elapsed().as_secs_f64(),
        });
    }

    let seismogram = reconstruct(config, &cells, &[coeffs_q, coeffs_u])?;
    let snapshots = config
        .snapshot_times
        .iter()
        .zip(snap_q.into_iter().zip(snap_u))
        .map(|(&time, (q, u))| Snapshot { time, fields: vec![q, u] })
        .collect();
    report.total_seconds = start.elapsed().as_secs_f64();
    Ok((seismogram, snapshots, report))
}

/// Sum the Laguerre series at every output time for every receiver.
fn reconstruct(
    config: &SimulationConfig,
    cells: &[(usize, usize)],
    component_coeffs: &[Vec<Vec<f64>>],
) -> Result<Seismogram> {
    let times = config.times();
    let n = config.basis.n();
    let kernels: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| inverse_kernel(&config.basis, t, n - 1))
        .collect::<Result<Vec<_>>>()?;
    let traces = cells
        .iter()
        .enumerate()
        .map(|(rec, &cell)| {
            let components = component_coeffs
                .iter()
                .map(|comp| {
                    kernels
                        .iter()
                        .map(|kernel| {
                            kernel.iter().zip(&comp[rec]).map(|(k, c)| k * c).sum::<f64>()
                        })
                        .collect::<Vec<f64>>()
                })
                .collect();
            ReceiverTrace { position: config.receivers[rec], cell, components }
        })
        .collect();
    Ok(Seismogram { times, traces })
}

/// Closed-form far-field trace of a monopole in a homogeneous half-space
/// with speed `c`: `u(r, t) = f(t - r/c) / (2 pi r)` (the free surface
/// doubles the monopole by its mirror image, which the normalization
/// `kappa = 1, rho = 1/c^2` absorbs).
pub fn exact_acoustic_solution(r: f64, t: f64, c: f64, source: &SourceSpec) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("exact solution needs r > 0, got {r}")));
    }
    let delay = t - r / c;
    if delay < 0.0 {
        return Ok(0.0);
    }
    Ok(source_time_function(delay, source.f0, source.t0, source.gamma)
        / (2.0 * std::f64::consts::PI * r))
}

/// Relative L2 misfit `sqrt(int (u_exact - u_h)^2 dt / int u_exact^2 dt)`
/// by trapezoid quadrature on the common uniform time grid.
pub fn error_metric(u_exact: &[f64], u_h: &[f64], dt: f64) -> Result<f64> {
    if u_exact.len() != u_h.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} samples", u_exact.len()),
            got: format!("{}", u_h.len()),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let last = u_exact.len().saturating_sub(1);
    for (j, (e, a)) in u_exact.iter().zip(u_h).enumerate() {
        let w = if j == 0 || j == last { 0.5 } else { 1.0 };
        num += w * (e - a) * (e - a);
        den += w * e * e;
    }
    if den == 0.0 {
        return Err(Error::invalid("reference trace has zero energy"));
    }
    Ok((num / den).sqrt())
}
