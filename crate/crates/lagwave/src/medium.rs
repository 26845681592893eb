//! Cell-centered (r, z) mesh, material models and raster-model ingestion.
//!
//! Nodes are `r_i = (i - 0.5) h_r`, `z_k = (k - 0.5) h_z` (1-based) with
//! `h_r = l1/(N_r - 0.5)`, `h_z = l2/(N_z - 0.5)`, so the last r-node lands
//! exactly on the Dirichlet boundary `r = l1` and the axis `r = 0` is never
//! a node. Staggered points `rbar_i = r_i + h_r/2` sit on cell faces.

use crate::error::{Error, Result};
use crate::field::Field2D;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub n_r: usize,
    pub n_z: usize,
    pub l1: f64,
    pub l2: f64,
    pub h_r: f64,
    pub h_z: f64,
}

impl Grid2D {
    pub fn build(l1: f64, l2: f64, n_r: usize, n_z: usize) -> Result<Self> {
        if !(l1 > 0.0) || !(l2 > 0.0) {
            return Err(Error::invalid(format!(
                "domain extents must be positive, got l1 = {l1}, l2 = {l2}"
            )));
        }
        if n_r < 2 || n_z < 2 {
            return Err(Error::invalid(format!(
                "grid needs at least 2 nodes per direction, got {n_r} x {n_z}"
            )));
        }
        let h_r = l1 / (n_r as f64 - 0.5);
        let h_z = l2 / (n_z as f64 - 0.5);
        Ok(Self { n_r, n_z, l1, l2, h_r, h_z })
    }

    /// r coordinate of cell center `i` (0-based): `(i + 0.5) h_r`.
    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h_r
    }

    /// z coordinate of cell center `k` (0-based): `(k + 0.5) h_z`.
    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.h_z
    }

    /// Staggered r face position `rbar_i = r_i + h_r/2 = (i+1) h_r`.
    #[inline]
    pub fn r_face(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h_r
    }

    /// Staggered z face position `zbar_k = z_k + h_z/2 = (k+1) h_z`.
    #[inline]
    pub fn z_face(&self, k: usize) -> f64 {
        (k as f64 + 1.0) * self.h_z
    }

    /// Nearest cell-center index pair for a point inside the domain.
    pub fn nearest_cell(&self, r: f64, z: f64) -> Result<(usize, usize)> {
        if r < 0.0 || r > self.l1 || z < 0.0 || z > self.l2 {
            return Err(Error::invalid(format!(
                "point (r = {r}, z = {z}) outside domain [0, {}] x [0, {}]",
                self.l1, self.l2
            )));
        }
        let i = ((r / self.h_r - 0.5).round().max(0.0) as usize).min(self.n_r - 1);
        let k = ((z / self.h_z - 0.5).round().max(0.0) as usize).min(self.n_z - 1);
        Ok((i, k))
    }
}

/// A material parameter field queryable at arbitrary (r, z).
pub trait MaterialField: Sync {
    fn value(&self, r: f64, z: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Sync> MaterialField for F {
    fn value(&self, r: f64, z: f64) -> f64 {
        self(r, z)
    }
}

/// Acoustic medium: bulk modulus `kappa` (Pa) and density `rho` (kg/m^3).
pub struct AcousticMedium {
    pub kappa: Box<dyn MaterialField>,
    pub rho: Box<dyn MaterialField>,
}

impl AcousticMedium {
    pub fn homogeneous(kappa: f64, rho: f64) -> Self {
        Self {
            kappa: Box::new(move |_r: f64, _z: f64| kappa),
            rho: Box::new(move |_r: f64, _z: f64| rho),
        }
    }

    /// Depth-layered medium: `layers[j] = (z_max, kappa, rho)` with
    /// increasing `z_max`; the last layer extends to the bottom.
    pub fn layered(layers: Vec<(f64, f64, f64)>) -> Self {
        let l2 = layers.clone();
        let pick = move |z: f64, sel: usize| -> f64 {
            for &(z_max, kappa, rho) in &l2 {
                if z <= z_max {
                    return if sel == 0 { kappa } else { rho };
                }
            }
            let &(_, kappa, rho) = l2.last().expect("layered medium needs >= 1 layer");
            if sel == 0 {
                kappa
            } else {
                rho
            }
        };
        let pk = pick.clone();
        Self {
            kappa: Box::new(move |_r: f64, z: f64| pk(z, 0)),
            rho: Box::new(move |_r: f64, z: f64| pick(z, 1)),
        }
    }
}

/// Elastic medium: Lame parameters and density.
pub struct ElasticMedium {
    pub lambda: Box<dyn MaterialField>,
    pub mu: Box<dyn MaterialField>,
    pub rho: Box<dyn MaterialField>,
}

impl ElasticMedium {
    pub fn homogeneous(lambda: f64, mu: f64, rho: f64) -> Self {
        Self {
            lambda: Box::new(move |_: f64, _: f64| lambda),
            mu: Box::new(move |_: f64, _: f64| mu),
            rho: Box::new(move |_: f64, _: f64| rho),
        }
    }

    /// Depth-layered medium: `layers[j] = (z_max, lambda, mu, rho)`.
    pub fn layered(layers: Vec<(f64, f64, f64, f64)>) -> Self {
        let pick = move |layers: &[(f64, f64, f64, f64)], z: f64, sel: usize| -> f64 {
            let entry = layers
                .iter()
                .find(|&&(z_max, ..)| z <= z_max)
                .unwrap_or_else(|| layers.last().expect("layered medium needs >= 1 layer"));
            match sel {
                0 => entry.1,
                1 => entry.2,
                _ => entry.3,
            }
        };
        let (a, b, c) = (layers.clone(), layers.clone(), layers);
        Self {
            lambda: Box::new(move |_: f64, z: f64| pick(&a, z, 0)),
            mu: Box::new(move |_: f64, z: f64| pick(&b, z, 1)),
            rho: Box::new(move |_: f64, z: f64| pick(&c, z, 2)),
        }
    }

    /// From wave speeds: `mu = rho Vs^2`, `lambda = rho (Vp^2 - 2 Vs^2)`.
    pub fn from_speeds(vp: f64, vs: f64, rho: f64) -> Result<Self> {
        let mu = rho * vs * vs;
        let lambda = rho * (vp * vp - 2.0 * vs * vs);
        if !(lambda > 0.0) || !(mu > 0.0) {
            return Err(Error::invalid(format!(
                "speeds (vp = {vp}, vs = {vs}) give nonpositive Lame parameters"
            )));
        }
        Ok(Self::homogeneous(lambda, mu, rho))
    }
}

/// Coefficient arrays of the second-order acoustic scheme:
/// `a1(i,k) = rbar_i kappa(rbar_i, z_k)` (r-face flux),
/// `a2(i,k) = r_i kappa(r_i, zbar_k)` (z-face flux),
/// `w(i,k) = rho(r_i, z_k) (h^2/4) r_i` (mass).
pub struct AcousticCoefficients {
    pub a1: Field2D,
    pub a2: Field2D,
    pub w: Field2D,
    /// rho sampled at cell centers, for the right-hand sides.
    pub rho: Field2D,
}

pub fn sample_acoustic(medium: &AcousticMedium, grid: &Grid2D, h: f64) -> AcousticCoefficients {
    let hm = h * h / 4.0;
    let a1 = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| {
        grid.r_face(i) * medium.kappa.value(grid.r_face(i), grid.z(k))
    });
    let a2 = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| {
        grid.r(i) * medium.kappa.value(grid.r(i), grid.z_face(k))
    });
    let rho = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| medium.rho.value(grid.r(i), grid.z(k)));
    let w = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| rho.at(i, k) * hm * grid.r(i));
    AcousticCoefficients { a1, a2, w, rho }
}

/// Range midpoint `(min f + max f)/2` of a sampled field.
pub fn tilde(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    0.5 * (lo + hi)
}

/// Range midpoint of a material field sampled on the grid cell centers.
pub fn tilde_on_grid(field: &dyn MaterialField, grid: &Grid2D) -> f64 {
    tilde((0..grid.n_r).flat_map(|i| (0..grid.n_z).map(move |k| (i, k))).map(|(i, k)| {
        field.value(grid.r(i), grid.z(k))
    }))
}

const RASTER_MAGIC: &[u8; 8] = b"LWRAST01";
const RASTER_TEXT_HEADER: &str = "lagwave-raster-text v1";

/// Piecewise-constant raster model: one 2D value grid per named material
/// parameter, sampled by nearest-cell lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterModel {
    pub origin: (f64, f64),
    pub spacing: (f64, f64),
    pub dims: (usize, usize),
    pub params: Vec<(String, Vec<f64>)>,
}

impl RasterModel {
    pub fn new(
        origin: (f64, f64),
        spacing: (f64, f64),
        dims: (usize, usize),
        params: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        if dims.0 < 2 || dims.1 < 2 {
            return Err(Error::RasterFormat(format!(
                "raster dims must be at least 2x2, got {}x{}",
                dims.0, dims.1
            )));
        }
        if !(spacing.0 > 0.0) || !(spacing.1 > 0.0) {
            return Err(Error::RasterFormat("raster spacing must be positive".into()));
        }
        let expected = dims.0 * dims.1;
        for (name, values) in &params {
            if values.len() != expected {
                return Err(Error::RasterShortPayload { expected, got: values.len() });
            }
            for &v in values {
                if !(v > 0.0) {
                    return Err(Error::RasterNonpositive { param: name.clone(), value: v });
                }
            }
        }
        Ok(Self { origin, spacing, dims, params })
    }

    /// Nearest-cell value of parameter `param` at (r, z). Queries outside
    /// the raster clamp to the edge cells.
    pub fn query(&self, param: &str, r: f64, z: f64) -> Result<f64> {
        let values = self
            .params
            .iter()
            .find(|(name, _)| name == param)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::invalid(format!("raster has no parameter named {param:?}")))?;
        let (nr, nz) = self.dims;
        let fi = (r - self.origin.0) / self.spacing.0;
        let fk = (z - self.origin.1) / self.spacing.1;
        let i = (fi.round().max(0.0) as usize).min(nr - 1);
        let k = (fk.round().max(0.0) as usize).min(nz - 1);
        Ok(values[i * nz + k])
    }

    /// Borrow a parameter as a `MaterialField` view.
    pub fn field(self: &std::sync::Arc<Self>, param: &str) -> Result<Box<dyn MaterialField>> {
        // fail early if the parameter is missing
        self.query(param, self.origin.0, self.origin.1)?;
        let model = std::sync::Arc::clone(self);
        let name = param.to_string();
        Ok(Box::new(move |r: f64, z: f64| {
            model.query(&name, r, z).expect("parameter existence checked at construction")
        }))
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(RASTER_MAGIC);
        out.extend_from_slice(&(self.dims.0 as u64).to_le_bytes());
        out.extend_from_slice(&(self.dims.1 as u64).to_le_bytes());
        out.extend_from_slice(&self.origin.0.to_le_bytes());
        out.extend_from_slice(&self.origin.1.to_le_bytes());
        out.extend_from_slice(&self.spacing.0.to_le_bytes());
        out.extend_from_slice(&self.spacing.1.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for (name, values) in &self.params {
            let bytes = name.as_bytes();
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(bytes);
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        let magic = cur.take(8)?;
        if magic != RASTER_MAGIC {
            return Err(Error::RasterFormat("bad magic string".into()));
        }
        let nr = cur.u64()? as usize;
        let nz = cur.u64()? as usize;
        let origin = (cur.f64()?, cur.f64()?);
        let spacing = (cur.f64()?, cur.f64()?);
        let n_params = cur.u64()? as usize;
        if n_params > 64 {
            return Err(Error::RasterFormat(format!("implausible parameter count {n_params}")));
        }
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let name_len = cur.u64()? as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| Error::RasterFormat("parameter name is not UTF-8".into()))?;
            let count = nr
                .checked_mul(nz)
                .ok_or_else(|| Error::RasterFormat("dims overflow".into()))?;
            let mut values = Vec::with_capacity(count);
            for j in 0..count {
                values.push(cur.f64().map_err(|_| Error::RasterShortPayload {
                    expected: count,
                    got: j,
                })?);
            }
            params.push((name, values));
        }
        Self::new(origin, spacing, (nr, nz), params)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        s.push_str(RASTER_TEXT_HEADER);
        s.push('\n');
        s.push_str(&format!("dims {} {}\n", self.dims.0, self.dims.1));
        s.push_str(&format!("origin {:?} {:?}\n", self.origin.0, self.origin.1));
        s.push_str(&format!("spacing {:?} {:?}\n", self.spacing.0, self.spacing.1));
        for (name, values) in &self.params {
            s.push_str(&format!("param {name}\n"));
            for row in values.chunks(self.dims.1) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let mut lines = content.lines();
        if lines.next() != Some(RASTER_TEXT_HEADER) {
            return Err(Error::RasterFormat("missing text header".into()));
        }
        let dims_line = lines.next().ok_or_else(|| Error::RasterFormat("missing dims".into()))?;
        let dims = parse_pair::<usize>(dims_line, "dims")?;
        let origin_line =
            lines.next().ok_or_else(|| Error::RasterFormat("missing origin".into()))?;
        let origin = parse_pair::<f64>(origin_line, "origin")?;
        let spacing_line =
            lines.next().ok_or_else(|| Error::RasterFormat("missing spacing".into()))?;
        let spacing = parse_pair::<f64>(spacing_line, "spacing")?;
        let count = dims.0 * dims.1;
        let mut params: Vec<(String, Vec<f64>)> = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix("param ") {
                params.push((name.trim().to_string(), Vec::with_capacity(count)));
            } else {
                let target = params
                    .last_mut()
                    .ok_or_else(|| Error::RasterFormat("values before any param line".into()))?;
                for token in line.split_whitespace() {
                    let v: f64 = token
                        .parse()
                        .map_err(|_| Error::RasterFormat(format!("bad float {token:?}")))?;
                    target.1.push(v);
                }
            }
        }
        Self::new(origin, spacing, dims, params)
    }

    /// Load either format; binary is detected by its magic string.
    pub fn load(path: &Path) -> Result<Self> {
        let mut head = [0u8; 8];
        let n = std::fs::File::open(path)?.read(&mut head)?;
        if n == 8 && &head == RASTER_MAGIC {
            Self::read_binary(path)
        } else {
            Self::read_text(path)
        }
    }
}

fn parse_pair<T: std::str::FromStr>(line: &str, key: &str) -> Result<(T, T)> {
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::RasterFormat(format!("expected {key:?} line, got {line:?}")));
    }
    let a = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::RasterFormat(format!("bad {key} line: {line:?}")))?;
    let b = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::RasterFormat(format!("bad {key} line: {line:?}")))?;
    Ok((a, b))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::RasterFormat("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
