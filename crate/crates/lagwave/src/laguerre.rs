//! Orthonormal Laguerre functions, the forward/inverse Laguerre transform
//! and the running accumulators for the spectral-domain convolution sums.
//!
//! The orthonormal Laguerre function of order `alpha` and degree `m` is
//! `l_m(x) = sqrt(h * m!/(m+alpha)!) * x^(alpha/2) * exp(-x/2) * L_m(x)`
//! with `x = h t`. Everything here is phrased in terms of the pre-normalized
//! kernel `phi_m(x) = sqrt(m!/(m+alpha)!) * exp(-x/2) * L_m(x)`, which stays
//! O(1) along the classical three-term recurrence and never overflows.

use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// Laguerre transform parameters: order `alpha`, scale `h` (1/s) and the
/// number of retained harmonics `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaguerreBasis {
    alpha: u32,
    h: f64,
    n: usize,
}

impl LaguerreBasis {
    pub fn new(alpha: u32, h: f64, n: usize) -> Result<Self> {
        if alpha < 2 {
            return Err(Error::invalid(format!(
                "Laguerre order alpha must be >= 2 to satisfy the initial data, got {alpha}"
            )));
        }
        if !(h > 0.0) {
            return Err(Error::invalid(format!("transform scale h must be > 0, got {h}")));
        }
        if n < 1 {
            return Err(Error::invalid("number of harmonics n must be >= 1"));
        }
        Ok(Self { alpha, h, n })
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Spectral coefficients of a signal in the Laguerre basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSeries {
    pub coefficients: Vec<f64>,
}

/// Evaluate `phi_0 .. phi_{m_max}` at `x = h t` by the stable pre-normalized
/// recurrence. The forward transform kernel is `sqrt(h) * phi_m(ht)` and the
/// inverse (reconstruction) kernel is `sqrt(h) * (ht)^alpha * phi_m(ht)`.
pub fn eval_kernel_functions(basis: &LaguerreBasis, t: f64, m_max: usize) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    if m_max >= basis.n {
        return Err(Error::invalid(format!(
            "m_max = {m_max} out of range for basis with n = {}",
            basis.n
        )));
    }
    Ok(phi_values(basis.alpha, basis.h * t, m_max))
}

/// `phi_m(x)` for m = 0..=m_max via the three-term recurrence
/// `phi_{m+1} = [(2m + a + 1 - x) phi_m - sqrt(m(m+a)) phi_{m-1}] / sqrt((m+1)(m+1+a))`.
pub(crate) fn phi_values(alpha: u32, x: f64, m_max: usize) -> Vec<f64> {
    let a = f64::from(alpha);
    let mut out = Vec::with_capacity(m_max + 1);
    // phi_0 = exp(-x/2) / sqrt(alpha!)
    let phi0 = (-0.5 * x - 0.5 * ln_gamma(a + 1.0)).exp();
    out.push(phi0);
    if m_max == 0 {
        return out;
    }
    let mut prev = phi0;
    let mut cur = (a + 1.0 - x) * phi0 / (1.0 * (1.0 + a)).sqrt();
    out.push(cur);
    for m in 1..m_max {
        let mf = m as f64;
        let next = ((2.0 * mf + a + 1.0 - x) * cur - (mf * (mf + a)).sqrt() * prev)
            / ((mf + 1.0) * (mf + 1.0 + a)).sqrt();
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Reconstruction kernel values `(ht)^(alpha/2) l_m(ht) = sqrt(h) x^alpha phi_m(x)`
/// for m = 0..=m_max.
pub fn inverse_kernel(basis: &LaguerreBasis, t: f64, m_max: usize) -> Result<Vec<f64>> {
    let mut phis = eval_kernel_functions(basis, t, m_max)?;
    let x = basis.h * t;
    let scale = basis.h.sqrt() * x.powi(basis.alpha as i32);
    for p in &mut phis {
        *p *= scale;
    }
    Ok(phis)
}

/// Forward Laguerre transform of a sampled time signal by composite
/// trapezoid quadrature on the uniform grid `0, dt, .., t_end`.
pub fn forward_transform(
    signal: impl Fn(f64) -> f64,
    basis: &LaguerreBasis,
    dt: f64,
    t_end: f64,
) -> Result<SpectralSeries> {
    if !(t_end > 0.0) {
        return Err(Error::invalid(format!("t_end must be > 0, got {t_end}")));
    }
    if !(dt > 0.0) || dt >= t_end {
        return Err(Error::invalid(format!(
            "quadrature step dt must satisfy 0 < dt < t_end, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let steps = (t_end / dt).ceil() as usize;
    let sqrt_h = basis.h.sqrt();
    let mut coefficients = vec![0.0; basis.n];
    for j in 0..=steps {
        let t = (j as f64 * dt).min(t_end);
        let weight = if j == 0 || j == steps { 0.5 * dt } else { dt };
        let fv = signal(t);
        if fv == 0.0 {
            continue;
        }
        let phis = phi_values(basis.alpha, basis.h * t, basis.n - 1);
        let scale = weight * fv * sqrt_h;
        for (c, p) in coefficients.iter_mut().zip(&phis) {
            *c += scale * p;
        }
    }
    Ok(SpectralSeries { coefficients })
}

/// Partial sum of the inversion formula over all `n` coefficients at time `t`.
pub fn inverse_series(series: &SpectralSeries, basis: &LaguerreBasis, t: f64) -> Result<f64> {
    if series.coefficients.len() != basis.n {
        return Err(Error::ShapeMismatch {
            expected: format!("{} coefficients", basis.n),
            got: format!("{}", series.coefficients.len()),
        });
    }
    let kernel = inverse_kernel(basis, t, basis.n - 1)?;
    let mut s = 0.0;
    for (c, k) in series.coefficients.iter().zip(&kernel) {
        s += c * k;
    }
    Ok(s)
}

/// `w_k = sqrt((k+alpha)!/k!)`, via log-gamma differences.
pub fn series_weight(k: usize, alpha: u32) -> f64 {
    let kf = k as f64;
    let a = f64::from(alpha);
    (0.5 * (ln_gamma(kf + a + 1.0) - ln_gamma(kf + 1.0))).exp()
}

/// `sqrt(m!/(m+alpha)!) = 1 / w_m`, the prefactor of the spectral
/// convolution sum.
pub fn series_prefactor(m: usize, alpha: u32) -> f64 {
    let mf = m as f64;
    let a = f64::from(alpha);
    (0.5 * (ln_gamma(mf + 1.0) - ln_gamma(mf + a + 1.0))).exp()
}

/// Convolution weight `c_{m,k} = (m-k) sqrt(m!/(m+alpha)!) sqrt((k+alpha)!/k!)`.
pub fn conv_weight(m: usize, k: usize, alpha: u32) -> Result<f64> {
    if k >= m {
        return Err(Error::invalid(format!("conv_weight requires k < m, got m = {m}, k = {k}")));
    }
    Ok((m - k) as f64 * series_prefactor(m, alpha) * series_weight(k, alpha))
}

/// Running accumulators that reorganize the convolution sum
/// `S_m = sum_{k<m} (m-k) w_k R_k` as `S_m = m P - Q` with
/// `P = sum w_k R_k` and `Q = sum k w_k R_k`, so each harmonic costs O(1)
/// field updates instead of an O(m) sweep.
#[derive(Debug, Clone)]
pub struct ConvAccumulators {
    alpha: u32,
    len: usize,
    m: usize,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl ConvAccumulators {
    pub fn new(alpha: u32, len: usize) -> Self {
        Self { alpha, len, m: 0, p: vec![0.0; len], q: vec![0.0; len] }
    }

    /// Current harmonic index: the next `step` must present this index.
    pub fn current_m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Fold in the solved harmonic `R_m`; `m` must equal `current_m()`.
    pub fn step(&mut self, m: usize, r_m: &[f64]) -> Result<()> {
        if m != self.m {
            return Err(Error::OutOfOrderHarmonic { expected: self.m, got: m });
        }
        if r_m.len() != self.len {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", self.len),
                got: format!("{}", r_m.len()),
            });
        }
        let w = series_weight(m, self.alpha);
        let kw = m as f64 * w;
        for ((p, q), r) in self.p.iter_mut().zip(&mut self.q).zip(r_m) {
            *p += w * r;
            *q += kw * r;
        }
        self.m += 1;
        Ok(())
    }

    /// `S_m = sum_{k=0}^{m-1} (m-k) w_k R_k`, valid when harmonics
    /// `0..m` have been folded in.
    pub fn sum(&self, m: usize) -> Result<Vec<f64>> {
        if m != self.m {
            return Err(Error::OutOfOrderHarmonic { expected: self.m, got: m });
        }
        let mf = m as f64;
        Ok(self
            .p
            .iter()
            .zip(&self.q)
            .map(|(p, q)| mf * p - q)
            .collect())
    }
}

/// Source pulse `f(t) = exp[-(2 pi f0 (t-t0))^2 / gamma^2] sin(2 pi f0 (t-t0))`.
pub fn source_time_function(t: f64, f0: f64, t0: f64, gamma: f64) -> f64 {
    let arg = 2.0 * std::f64::consts::PI * f0 * (t - t0);
    (-arg * arg / (gamma * gamma)).exp() * arg.sin()
}
