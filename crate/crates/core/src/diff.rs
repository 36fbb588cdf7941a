//! Weighted three-directional first-difference operator, its adjoint, its
//! FFT eigen-spectrum, and the spatial-spectral TV seminorm built on it.
//!
//! All differences are circular (periodic boundary on every axis); that is
//! what makes the normal operator `D* D` diagonal in the 3-D DFT basis and
//! the solver's Z-step a pointwise spectral division.
//!
//! Weight binding: `w1` scales the spectral (band-axis) difference, `w2` the
//! horizontal (width-axis) difference, `w3` the vertical (height-axis)
//! difference. Weights are applied inside the forward operator, so gradient-
//! space quantities already carry them.

use alloc::format;
use alloc::vec::Vec;

use crate::cube::Cube;
use crate::error::{CoreError, CoreResult};
use crate::math;

/// Per-direction regularization weights. All must be nonnegative and at
/// least one strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TVWeights {
    /// Spectral (band axis) weight.
    pub w1: f64,
    /// Horizontal (width axis) weight.
    pub w2: f64,
    /// Vertical (height axis) weight.
    pub w3: f64,
}

impl TVWeights {
    pub fn new(w1: f64, w2: f64, w3: f64) -> CoreResult<Self> {
        if !(w1 >= 0.0 && w2 >= 0.0 && w3 >= 0.0) {
            return Err(CoreError::Value(format!(
                "TV weights must be nonnegative, got ({w1}, {w2}, {w3})"
            )));
        }
        if w1 == 0.0 && w2 == 0.0 && w3 == 0.0 {
            return Err(CoreError::Value(
                "at least one TV weight must be positive".into(),
            ));
        }
        Ok(Self { w1, w2, w3 })
    }
}

/// Three same-shaped gradient channels: spectral, horizontal, vertical.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedGrad {
    /// Band-direction differences.
    pub d_spec: Cube,
    /// Width-direction differences.
    pub d_horiz: Cube,
    /// Height-direction differences.
    pub d_vert: Cube,
}

impl StackedGrad {
    /// Bundle three channels, validating that they share one shape.
    pub fn new(d_spec: Cube, d_horiz: Cube, d_vert: Cube) -> CoreResult<Self> {
        if d_spec.shape() != d_horiz.shape() || d_spec.shape() != d_vert.shape() {
            return Err(CoreError::Shape(format!(
                "gradient channels differ in shape: {:?} / {:?} / {:?}",
                d_spec.shape(),
                d_horiz.shape(),
                d_vert.shape()
            )));
        }
        Ok(Self {
            d_spec,
            d_horiz,
            d_vert,
        })
    }

    pub fn zeros(shape: (usize, usize, usize)) -> CoreResult<Self> {
        let (h, w, b) = shape;
        Ok(Self {
            d_spec: Cube::zeros(h, w, b)?,
            d_horiz: Cube::zeros(h, w, b)?,
            d_vert: Cube::zeros(h, w, b)?,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.d_spec.shape()
    }

    /// Channelwise `self + scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &StackedGrad) {
        self.d_spec.axpy(scale, &other.d_spec);
        self.d_horiz.axpy(scale, &other.d_horiz);
        self.d_vert.axpy(scale, &other.d_vert);
    }

    /// Channelwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> StackedGrad {
        StackedGrad {
            d_spec: self.d_spec.map(f),
            d_horiz: self.d_horiz.map(f),
            d_vert: self.d_vert.map(f),
        }
    }

    /// Channelwise combination of two gradients.
    pub fn zip_map(&self, other: &StackedGrad, f: impl Fn(f64, f64) -> f64 + Copy) -> StackedGrad {
        StackedGrad {
            d_spec: self.d_spec.zip_map(&other.d_spec, f),
            d_horiz: self.d_horiz.zip_map(&other.d_horiz, f),
            d_vert: self.d_vert.zip_map(&other.d_vert, f),
        }
    }

    /// Sum of the three channels' squared Frobenius norms, square-rooted.
    pub fn frob_norm(&self) -> f64 {
        let s = self.d_spec.frob_norm();
        let h = self.d_horiz.frob_norm();
        let v = self.d_vert.frob_norm();
        math::sqrt(s * s + h * h + v * v)
    }

    /// Inner product over all three channels.
    pub fn inner(&self, other: &StackedGrad) -> CoreResult<f64> {
        Ok(crate::cube::inner(&self.d_spec, &other.d_spec)?
            + crate::cube::inner(&self.d_horiz, &other.d_horiz)?
            + crate::cube::inner(&self.d_vert, &other.d_vert)?)
    }
}

/// Weighted circular backward differences along band, width, and height.
///
/// Channel entries at `(i, j, k)`:
/// spectral `w1*(x[i,j,k] - x[i,j,k-1])`, horizontal
/// `w2*(x[i,j,k] - x[i,j-1,k])`, vertical `w3*(x[i,j,k] - x[i-1,j,k])`,
/// indices wrapping at zero.
pub fn dw_forward(cube: &Cube, w: &TVWeights) -> StackedGrad {
    let (h, ww, b) = cube.shape();
    let mut d_spec = cube.clone();
    let mut d_horiz = cube.clone();
    let mut d_vert = cube.clone();
    for k in 0..b {
        let k_prev = (k + b - 1) % b;
        for i in 0..h {
            let i_prev = (i + h - 1) % h;
            for j in 0..ww {
                let j_prev = (j + ww - 1) % ww;
                let x = cube.get(i, j, k);
                d_spec.set(i, j, k, w.w1 * (x - cube.get(i, j, k_prev)));
                d_horiz.set(i, j, k, w.w2 * (x - cube.get(i, j_prev, k)));
                d_vert.set(i, j, k, w.w3 * (x - cube.get(i_prev, j, k)));
            }
        }
    }
    StackedGrad {
        d_spec,
        d_horiz,
        d_vert,
    }
}

/// Adjoint of [`dw_forward`]: `<D_w x, g> = <x, dw_adjoint(g, w)>`.
///
/// Each channel contributes a weighted circular difference in the opposite
/// direction: `w*(g[t] - g[t+1])` along its axis.
pub fn dw_adjoint(g: &StackedGrad, w: &TVWeights) -> Cube {
    let (h, ww, b) = g.shape();
    let mut out = Cube::zeros(h, ww, b).expect("gradient carries valid dimensions");
    for k in 0..b {
        let k_next = (k + 1) % b;
        for i in 0..h {
            let i_next = (i + 1) % h;
            for j in 0..ww {
                let j_next = (j + 1) % ww;
                let v = w.w1 * (g.d_spec.get(i, j, k) - g.d_spec.get(i, j, k_next))
                    + w.w2 * (g.d_horiz.get(i, j, k) - g.d_horiz.get(i, j_next, k))
                    + w.w3 * (g.d_vert.get(i, j, k) - g.d_vert.get(i_next, j, k));
                out.set(i, j, k, v);
            }
        }
    }
    out
}

/// Eigenvalues of `D*_w D_w` under periodic boundaries, laid out as a cube
/// over 3-D frequency indices:
/// `w1^2*|1-e^{-2 pi i r/b}|^2 + w2^2*|1-e^{-2 pi i q/w}|^2 + w3^2*|1-e^{-2 pi i p/h}|^2`.
/// All entries are nonnegative and the DC entry is zero.
pub fn tz_spectrum(shape: (usize, usize, usize), w: &TVWeights) -> Cube {
    let (h, ww, b) = shape;
    let axis = |n: usize, weight: f64| -> Vec<f64> {
        (0..n)
            .map(|t| {
                let c = 2.0 - 2.0 * math::cos(2.0 * core::f64::consts::PI * t as f64 / n as f64);
                (weight * weight * c).max(0.0)
            })
            .collect()
    };
    let along_h = axis(h, w.w3);
    let along_w = axis(ww, w.w2);
    let along_b = axis(b, w.w1);
    Cube::from_fn(h, ww, b, |p, q, r| along_h[p] + along_w[q] + along_b[r])
        .expect("spectrum shape is the cube's shape")
}

/// Spatial-spectral TV seminorm: the sum of absolute values over all three
/// channels of [`dw_forward`]. Zero exactly when the cube is constant (given
/// at least one positive weight per the [`TVWeights`] invariant).
pub fn sstv_norm(cube: &Cube, w: &TVWeights) -> f64 {
    let g = dw_forward(cube, w);
    let sum_abs = |c: &Cube| c.data().iter().map(|v| v.abs()).sum::<f64>();
    sum_abs(&g.d_spec) + sum_abs(&g.d_horiz) + sum_abs(&g.d_vert)
}
