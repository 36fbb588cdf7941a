//! Dense third-order tensor container and the tensor algebra used by every
//! other module: mode-n unfolding/folding, mode-n products, inner products,
//! and Tucker reconstruction.
//!
//! A [`Cube`] stores a `height x width x bands` block of `f64` samples in
//! band-sequential order (all of band 0, then band 1, ...), row-major within
//! each band. Indices are written `(i, j, k)` for (row, column, band).
//! Mode numbers follow the usual tensor convention and are 1-based:
//! mode 1 runs over rows, mode 2 over columns, mode 3 over bands.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{CoreError, CoreResult};
use crate::math;

/// Dense `height x width x bands` tensor of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl Cube {
    /// All-zero cube. Every dimension must be positive.
    pub fn zeros(height: usize, width: usize, bands: usize) -> CoreResult<Self> {
        check_dims(height, width, bands)?;
        Ok(Self {
            height,
            width,
            bands,
            data: vec![0.0; height * width * bands],
        })
    }

    /// Cube filled with a single value.
    pub fn constant(height: usize, width: usize, bands: usize, value: f64) -> CoreResult<Self> {
        let mut c = Self::zeros(height, width, bands)?;
        c.data.fill(value);
        Ok(c)
    }

    /// Wrap a flat band-sequential buffer. The length must equal
    /// `height * width * bands`.
    pub fn from_vec(height: usize, width: usize, bands: usize, data: Vec<f64>) -> CoreResult<Self> {
        check_dims(height, width, bands)?;
        if data.len() != height * width * bands {
            return Err(CoreError::Shape(format!(
                "data length {} does not match {}x{}x{} = {}",
                data.len(),
                height,
                width,
                bands,
                height * width * bands
            )));
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
        })
    }

    /// Build a cube from a function of the `(i, j, k)` index.
    pub fn from_fn(
        height: usize,
        width: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> CoreResult<Self> {
        let mut c = Self::zeros(height, width, bands)?;
        for k in 0..bands {
            for i in 0..height {
                for j in 0..width {
                    let idx = c.offset(i, j, k);
                    c.data[idx] = f(i, j, k);
                }
            }
        }
        Ok(c)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// `(height, width, bands)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// A cube is never empty; provided for iterator-style call sites.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat band-sequential view of the samples.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat view of the samples.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub(crate) fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.height * self.width + i * self.width + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.offset(i, j, k);
        self.data[idx] = value;
    }

    /// Contiguous slice holding band `k` (row-major `height x width`).
    pub fn band(&self, k: usize) -> CoreResult<&[f64]> {
        if k >= self.bands {
            return Err(CoreError::Value(format!(
                "band index {k} out of range for {} bands",
                self.bands
            )));
        }
        let hw = self.height * self.width;
        Ok(&self.data[k * hw..(k + 1) * hw])
    }

    /// Mutable slice holding band `k`.
    pub fn band_mut(&mut self, k: usize) -> CoreResult<&mut [f64]> {
        if k >= self.bands {
            return Err(CoreError::Value(format!(
                "band index {k} out of range for {} bands",
                self.bands
            )));
        }
        let hw = self.height * self.width;
        Ok(&mut self.data[k * hw..(k + 1) * hw])
    }

    /// True when every sample is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm, `sqrt(sum of squares)`.
    pub fn frob_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Elementwise map into a new cube.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Cube {
        Cube {
            height: self.height,
            width: self.width,
            bands: self.bands,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination with another cube of the same shape.
    ///
    /// Panics on shape mismatch; intended for internal solver arithmetic where
    /// shapes are invariant.
    pub fn zip_map(&self, other: &Cube, f: impl Fn(f64, f64) -> f64) -> Cube {
        assert_eq!(self.shape(), other.shape(), "cube shape mismatch");
        Cube {
            height: self.height,
            width: self.width,
            bands: self.bands,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self + scale * other`, in place.
    pub fn axpy(&mut self, scale: f64, other: &Cube) {
        assert_eq!(self.shape(), other.shape(), "cube shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&self, s: f64) -> Cube {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Cube) -> Cube {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Cube) -> Cube {
        self.zip_map(other, |a, b| a - b)
    }
}

fn check_dims(height: usize, width: usize, bands: usize) -> CoreResult<()> {
    if height == 0 || width == 0 || bands == 0 {
        return Err(CoreError::Value(format!(
            "cube dimensions must be positive, got {height}x{width}x{bands}"
        )));
    }
    Ok(())
}

fn check_mode(mode: usize) -> CoreResult<()> {
    if !(1..=3).contains(&mode) {
        return Err(CoreError::Value(format!(
            "mode must be 1, 2 or 3, got {mode}"
        )));
    }
    Ok(())
}

/// Mode-n matricization.
///
/// Element `(i, j, k)` of the cube lands in row `i_n` of the result, at the
/// column given by the standard mode-n index map: for mode 1 the column is
/// `j + k*width`, for mode 2 `i + k*height`, for mode 3 `i + j*height`.
/// The result is a fresh matrix, not a view.
pub fn unfold(cube: &Cube, mode: usize) -> CoreResult<DMatrix<f64>> {
    check_mode(mode)?;
    let (h, w, b) = cube.shape();
    let m = match mode {
        1 => DMatrix::from_fn(h, w * b, |i, c| cube.get(i, c % w, c / w)),
        2 => DMatrix::from_fn(w, h * b, |j, c| cube.get(c % h, j, c / h)),
        _ => DMatrix::from_fn(b, h * w, |k, c| cube.get(c % h, c / h, k)),
    };
    Ok(m)
}

/// Exact inverse of [`unfold`]: rebuild a cube of the given shape from its
/// mode-n matricization.
pub fn fold(mat: &DMatrix<f64>, mode: usize, shape: (usize, usize, usize)) -> CoreResult<Cube> {
    check_mode(mode)?;
    let (h, w, b) = shape;
    check_dims(h, w, b)?;
    let expected = match mode {
        1 => (h, w * b),
        2 => (w, h * b),
        _ => (b, h * w),
    };
    if mat.shape() != expected {
        return Err(CoreError::Shape(format!(
            "mode-{mode} matrix is {}x{}, expected {}x{} for shape {h}x{w}x{b}",
            mat.nrows(),
            mat.ncols(),
            expected.0,
            expected.1
        )));
    }
    Cube::from_fn(h, w, b, |i, j, k| match mode {
        1 => mat[(i, j + k * w)],
        2 => mat[(j, i + k * h)],
        _ => mat[(k, i + j * h)],
    })
}

/// Mode-n product: multiply the cube along the given mode by `mat`, whose
/// column count must equal the cube's extent along that mode. The result's
/// mode-n unfolding equals `mat * unfold(cube, mode)`.
pub fn mode_mul(cube: &Cube, mat: &DMatrix<f64>, mode: usize) -> CoreResult<Cube> {
    check_mode(mode)?;
    let (h, w, b) = cube.shape();
    let dim = match mode {
        1 => h,
        2 => w,
        _ => b,
    };
    if mat.ncols() != dim {
        return Err(CoreError::Shape(format!(
            "mode-{mode} product needs {dim} matrix columns, got {}",
            mat.ncols()
        )));
    }
    let unfolded = unfold(cube, mode)?;
    let product = mat * unfolded;
    let new_shape = match mode {
        1 => (mat.nrows(), w, b),
        2 => (h, mat.nrows(), b),
        _ => (h, w, mat.nrows()),
    };
    fold(&product, mode, new_shape)
}

/// Inner product of two same-shaped cubes.
pub fn inner(a: &Cube, b: &Cube) -> CoreResult<f64> {
    if a.shape() != b.shape() {
        return Err(CoreError::Shape(format!(
            "inner product shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| x * y)
        .sum())
}

/// Core tensor plus one column-orthonormal factor matrix per mode.
#[derive(Debug, Clone)]
pub struct TuckerFactors {
    core: Cube,
    factors: [DMatrix<f64>; 3],
}

impl TuckerFactors {
    /// Bundle a core with its three factors, validating that factor column
    /// counts match the core extents.
    pub fn new(core: Cube, factors: [DMatrix<f64>; 3]) -> CoreResult<Self> {
        let (r1, r2, r3) = core.shape();
        let ranks = [r1, r2, r3];
        for (mode0, (f, r)) in factors.iter().zip(ranks).enumerate() {
            if f.ncols() != r {
                return Err(CoreError::Shape(format!(
                    "factor {} has {} columns, core expects {r}",
                    mode0 + 1,
                    f.ncols()
                )));
            }
        }
        Ok(Self { core, factors })
    }

    pub fn core(&self) -> &Cube {
        &self.core
    }

    /// Factor matrix for a 1-based mode.
    pub fn factor(&self, mode: usize) -> CoreResult<&DMatrix<f64>> {
        check_mode(mode)?;
        Ok(&self.factors[mode - 1])
    }

    pub fn factors(&self) -> &[DMatrix<f64>; 3] {
        &self.factors
    }

    /// Multilinear rank `(r1, r2, r3)`.
    pub fn ranks(&self) -> (usize, usize, usize) {
        self.core.shape()
    }

    /// Shape of the reconstructed cube.
    pub fn output_shape(&self) -> (usize, usize, usize) {
        (
            self.factors[0].nrows(),
            self.factors[1].nrows(),
            self.factors[2].nrows(),
        )
    }

    /// Largest absolute deviation of any `U^T U` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(|u| {
                let gram = u.transpose() * u;
                let r = gram.nrows();
                let mut worst = 0.0f64;
                for i in 0..r {
                    for j in 0..r {
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((gram[(i, j)] - target).abs());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }
}

/// Evaluate `core x1 U1 x2 U2 x3 U3` as a full cube.
pub fn tucker_reconstruct(tf: &TuckerFactors) -> CoreResult<Cube> {
    let mut out = tf.core.clone();
    for mode in 1..=3 {
        out = mode_mul(&out, &tf.factors[mode - 1], mode)?;
    }
    Ok(out)
}
