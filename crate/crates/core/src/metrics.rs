//! Full-reference quality metrics: per-band PSNR and SSIM, their means, the
//! relative dimensionless global error (ERGAS), and mean-profile
//! diagnostics.
//!
//! PSNR is capped at 100 dB so identical inputs stay finite in CSV output.
//! SSIM follows the standard Gaussian-window formulation (11x11 window,
//! sigma 1.5, C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 1), evaluated over
//! valid window positions only. ERGAS is
//! `100 * sqrt(mean_i(MSE_i / mean(ref_i)^2))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cube::Cube;
use crate::error::{CoreError, CoreResult};
use crate::math;

/// Hard ceiling on reported PSNR.
pub const PSNR_CAP_DB: f64 = 100.0;
/// Default SSIM window edge.
pub const SSIM_WINDOW: usize = 11;
/// Default SSIM Gaussian sigma.
pub const SSIM_SIGMA: f64 = 1.5;

/// Per-band and aggregate quality numbers for one (reference, test) pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub per_band_psnr: Vec<f64>,
    pub per_band_ssim: Vec<f64>,
    pub mpsnr: f64,
    pub mssim: f64,
    pub ergas: f64,
}

/// Peak signal-to-noise ratio of one band pair in dB, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr_band(reference: &[f64], test: &[f64], peak: f64) -> CoreResult<f64> {
    if reference.len() != test.len() {
        return Err(CoreError::Shape(format!(
            "band lengths differ: {} vs {}",
            reference.len(),
            test.len()
        )));
    }
    if !(peak > 0.0) {
        return Err(CoreError::Value(format!("peak must be positive, got {peak}")));
    }
    let mse: f64 = reference
        .iter()
        .zip(test.iter())
        .map(|(r, t)| (r - t) * (r - t))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * math::log10(peak * peak / mse)).min(PSNR_CAP_DB))
}

/// Mean local SSIM with the default 11x11 Gaussian window.
pub fn ssim_band(reference: &[f64], test: &[f64], rows: usize, cols: usize) -> CoreResult<f64> {
    ssim_band_with(reference, test, rows, cols, SSIM_WINDOW, SSIM_SIGMA)
}

/// Mean local SSIM with an explicit window size and Gaussian sigma.
pub fn ssim_band_with(
    reference: &[f64],
    test: &[f64],
    rows: usize,
    cols: usize,
    window: usize,
    sigma: f64,
) -> CoreResult<f64> {
    if reference.len() != rows * cols || test.len() != rows * cols {
        return Err(CoreError::Shape(format!(
            "band data does not match {rows}x{cols}"
        )));
    }
    if window == 0 || !(sigma > 0.0) {
        return Err(CoreError::Value(format!(
            "need window >= 1 and sigma > 0, got {window} and {sigma}"
        )));
    }
    if rows < window || cols < window {
        return Err(CoreError::Value(format!(
            "band {rows}x{cols} is smaller than the {window}x{window} SSIM window; \
             pass a smaller window override"
        )));
    }

    let kernel = gaussian_kernel(window, sigma);
    let filtered = |src: &[f64]| valid_filter_2d(src, rows, cols, &kernel);
    let xy: Vec<f64> = reference
        .iter()
        .zip(test.iter())
        .map(|(a, b)| a * b)
        .collect();
    let xx: Vec<f64> = reference.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = test.iter().map(|a| a * a).collect();

    let mu_x = filtered(reference);
    let mu_y = filtered(test);
    let e_xx = filtered(&xx);
    let e_yy = filtered(&yy);
    let e_xy = filtered(&xy);

    const L: f64 = 1.0;
    let c1 = (0.01 * L) * (0.01 * L);
    let c2 = (0.03 * L) * (0.03 * L);
    let mut total = 0.0;
    for idx in 0..mu_x.len() {
        let (mx, my) = (mu_x[idx], mu_y[idx]);
        let var_x = e_xx[idx] - mx * mx;
        let var_y = e_yy[idx] - my * my;
        let cov = e_xy[idx] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let center = (window - 1) as f64 / 2.0;
    let mut k: Vec<f64> = (0..window)
        .map(|t| {
            let d = t as f64 - center;
            math::exp(-d * d / (2.0 * sigma * sigma))
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-region filtering: horizontal pass then vertical pass.
fn valid_filter_2d(src: &[f64], rows: usize, cols: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let out_cols = cols - k + 1;
    let mut horiz = vec![0.0; rows * out_cols];
    for r in 0..rows {
        for c in 0..out_cols {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                acc += w * src[r * cols + c + t];
            }
            horiz[r * out_cols + c] = acc;
        }
    }
    let out_rows = rows - k + 1;
    let mut out = vec![0.0; out_rows * out_cols];
    for r in 0..out_rows {
        for c in 0..out_cols {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                acc += w * horiz[(r + t) * out_cols + c];
            }
            out[r * out_cols + c] = acc;
        }
    }
    out
}

/// Relative dimensionless global error:
/// `100 * sqrt((1/B) * sum_i MSE_i / mean(ref_i)^2)`. Zero exactly for
/// identical cubes; every reference band must have a nonzero mean.
pub fn ergas(reference: &Cube, test: &Cube) -> CoreResult<f64> {
    if reference.shape() != test.shape() {
        return Err(CoreError::Shape(format!(
            "cube shapes differ: {:?} vs {:?}",
            reference.shape(),
            test.shape()
        )));
    }
    let bands = reference.bands();
    let mut acc = 0.0;
    for k in 0..bands {
        let r = reference.band(k)?;
        let t = test.band(k)?;
        let n = r.len() as f64;
        let mean: f64 = r.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return Err(CoreError::Value(format!(
                "reference band {k} has zero mean"
            )));
        }
        let mse: f64 = r
            .iter()
            .zip(t.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        acc += mse / (mean * mean);
    }
    Ok(100.0 * math::sqrt(acc / bands as f64))
}

/// Profile direction for [`mean_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileAxis {
    /// Per-row means across columns; the profile has `height` entries.
    Horizontal,
    /// Per-column means across rows; the profile has `width` entries.
    Vertical,
}

/// Mean profile of one band along the requested axis.
pub fn mean_profile(cube: &Cube, band: usize, axis: ProfileAxis) -> CoreResult<Vec<f64>> {
    let slice = cube.band(band)?;
    let (h, w) = (cube.height(), cube.width());
    let profile = match axis {
        ProfileAxis::Horizontal => (0..h)
            .map(|i| slice[i * w..(i + 1) * w].iter().sum::<f64>() / w as f64)
            .collect(),
        ProfileAxis::Vertical => (0..w)
            .map(|j| (0..h).map(|i| slice[i * w + j]).sum::<f64>() / h as f64)
            .collect(),
    };
    Ok(profile)
}

/// Full report over all bands: per-band PSNR/SSIM, their exact means, and
/// ERGAS. `peak` is the PSNR peak (1 for data normalized to `[0, 1]`).
pub fn evaluate(reference: &Cube, test: &Cube, peak: f64) -> CoreResult<MetricsReport> {
    if reference.shape() != test.shape() {
        return Err(CoreError::Shape(format!(
            "cube shapes differ: {:?} vs {:?}",
            reference.shape(),
            test.shape()
        )));
    }
    let bands = reference.bands();
    let (h, w) = (reference.height(), reference.width());
    let mut per_band_psnr = Vec::with_capacity(bands);
    let mut per_band_ssim = Vec::with_capacity(bands);
    for k in 0..bands {
        let r = reference.band(k)?;
        let t = test.band(k)?;
        per_band_psnr.push(psnr_band(r, t, peak)?);
        per_band_ssim.push(ssim_band(r, t, h, w)?);
    }
    let mpsnr = per_band_psnr.iter().sum::<f64>() / bands as f64;
    let mssim = per_band_ssim.iter().sum::<f64>() / bands as f64;
    let ergas = ergas(reference, test)?;
    Ok(MetricsReport {
        per_band_psnr,
        per_band_ssim,
        mpsnr,
        mssim,
        ergas,
    })
}
