use crate::error::{Error, Result};

/// Dense scalar field on the cell-centered (r, z) mesh.
///
/// Storage is row-major with the z index fastest: entry `(i, k)` lives at
/// `data[i * n_z + k]`, so each fixed-`i` row is contiguous along z.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    n_r: usize,
    n_z: usize,
    data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(n_r: usize, n_z: usize) -> Self {
        Self { n_r, n_z, data: vec![0.0; n_r * n_z] }
    }

    pub fn from_fn(n_r: usize, n_z: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_r * n_z);
        for i in 0..n_r {
            for k in 0..n_z {
                data.push(f(i, k));
            }
        }
        Self { n_r, n_z, data }
    }

    pub fn from_slice(n_r: usize, n_z: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n_r * n_z {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", n_r * n_z),
                got: format!("{}", data.len()),
            });
        }
        Ok(Self { n_r, n_z, data: data.to_vec() })
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        debug_assert!(i < self.n_r && k < self.n_z);
        self.data[i * self.n_z + k]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, k: usize) -> &mut f64 {
        debug_assert!(i < self.n_r && k < self.n_z);
        &mut self.data[i * self.n_z + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[i * self.n_z + k] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_z..(i + 1) * self.n_z]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_z..(i + 1) * self.n_z]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.data.chunks_exact_mut(self.n_z)
    }

    pub fn same_shape(&self, other: &Field2D) -> bool {
        self.n_r == other.n_r && self.n_z == other.n_z
    }

    pub fn check_shape(&self, n_r: usize, n_z: usize) -> Result<()> {
        if self.n_r != n_r || self.n_z != n_z {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", n_r, n_z),
                got: format!("{}x{}", self.n_r, self.n_z),
            });
        }
        Ok(())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &Field2D) {
        debug_assert!(self.same_shape(other));
        for (y, x) in self.data.iter_mut().zip(&other.data) {
            *y += a * x;
        }
    }

    /// Euclidean inner product, summed in fixed (partition) order.
    pub fn dot(&self, other: &Field2D) -> f64 {
        debug_assert!(self.same_shape(other));
        fixed_order_dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

const DOT_CHUNK: usize = 4096;

/// Dot product with a fixed left-to-right chunked summation order, so the
/// result is bitwise reproducible regardless of the worker count.
pub fn fixed_order_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut total = 0.0;
    for (ca, cb) in a.chunks(DOT_CHUNK).zip(b.chunks(DOT_CHUNK)) {
        let mut s = 0.0;
        for (x, y) in ca.iter().zip(cb) {
            s += x * y;
        }
        total += s;
    }
    total
}

pub fn fixed_order_norm(a: &[f64]) -> f64 {
    fixed_order_dot(a, a).sqrt()
}
