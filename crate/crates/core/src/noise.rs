//! Seeded mixed-noise simulation: six escalating corruption patterns
//! combining Gaussian noise, salt-and-pepper impulses, dead lines, and
//! stripes.
//!
//! Every random draw comes from a ChaCha12 stream derived from the
//! [`NoiseSpec`] seed, with one substream per band per noise kind
//! (`stream = band * 4 + kind`). Per-band statistics are therefore
//! reproducible on their own, and adding a noise kind on top of a case never
//! perturbs the realizations of the kinds it shares with its base case.

use alloc::format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cube::Cube;
use crate::error::{CoreError, CoreResult};
use crate::math;

/// Reference band count the default deadline/stripe windows are stated for;
/// windows scale proportionally for other cube depths.
const REFERENCE_BANDS: usize = 224;
/// Default deadline window over the reference depth, 0-based inclusive.
const DEADLINE_WINDOW: (usize, usize) = (90, 129);
/// Default stripe window over the reference depth, 0-based inclusive.
const STRIPE_WINDOW: (usize, usize) = (160, 189);

const STREAM_GAUSSIAN: u64 = 0;
const STREAM_IMPULSE: u64 = 1;
const STREAM_DEADLINE: u64 = 2;
const STREAM_STRIPE: u64 = 3;

/// Which noise mixture to apply.
///
/// * Case 1: equal-variance Gaussian noise on every band (variance 0.1).
/// * Case 2: case 1 plus dead lines on a 40-band window.
/// * Case 3: Gaussian (variance 0.075) plus 15% salt-and-pepper impulses.
/// * Case 4: case 3 plus dead lines.
/// * Case 5: per-band Gaussian variance drawn from `U[0, 0.2]`, per-band
///   impulse fraction from `U[0, 0.2]`, plus dead lines.
/// * Case 6: case 5 plus stripes on a 30-band window.
///
/// `gaussian_sigma` overrides the noise level as a standard deviation: for
/// cases 1-4 the per-band sigma itself, for cases 5-6 the upper edge of the
/// variance range (`variance ~ U[0, sigma^2]`). `impulse_fraction` works the
/// same way for the impulse share. The band ranges override the scaled
/// default windows (0-based, inclusive).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub case_id: u8,
    pub seed: u64,
    #[serde(default)]
    pub gaussian_sigma: Option<f64>,
    #[serde(default)]
    pub impulse_fraction: Option<f64>,
    #[serde(default)]
    pub deadline_band_range: Option<(usize, usize)>,
    #[serde(default)]
    pub stripe_band_range: Option<(usize, usize)>,
}

impl NoiseSpec {
    pub fn new(case_id: u8, seed: u64) -> Self {
        Self {
            case_id,
            seed,
            gaussian_sigma: None,
            impulse_fraction: None,
            deadline_band_range: None,
            stripe_band_range: None,
        }
    }

    pub fn validate(&self, bands: usize) -> CoreResult<()> {
        if !(1..=6).contains(&self.case_id) {
            return Err(CoreError::Value(format!(
                "case_id must be in 1..=6, got {}",
                self.case_id
            )));
        }
        if let Some(s) = self.gaussian_sigma {
            if !(s >= 0.0) {
                return Err(CoreError::Value(format!(
                    "gaussian_sigma must be nonnegative, got {s}"
                )));
            }
        }
        if let Some(f) = self.impulse_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(CoreError::Value(format!(
                    "impulse_fraction must be in [0, 1], got {f}"
                )));
            }
        }
        for (name, range) in [
            ("deadline_band_range", self.deadline_band_range),
            ("stripe_band_range", self.stripe_band_range),
        ] {
            if let Some((lo, hi)) = range {
                if lo > hi || hi >= bands {
                    return Err(CoreError::Value(format!(
                        "{name} ({lo}, {hi}) invalid for {bands} bands"
                    )));
                }
            }
        }
        Ok(())
    }

    fn deadline_window(&self, bands: usize) -> (usize, usize) {
        self.deadline_band_range
            .unwrap_or_else(|| scale_window(DEADLINE_WINDOW, bands))
    }

    fn stripe_window(&self, bands: usize) -> (usize, usize) {
        self.stripe_band_range
            .unwrap_or_else(|| scale_window(STRIPE_WINDOW, bands))
    }
}

fn scale_window(window: (usize, usize), bands: usize) -> (usize, usize) {
    let scale = |t: usize| -> usize {
        let v = math::round(t as f64 * bands as f64 / REFERENCE_BANDS as f64) as usize;
        v.min(bands - 1)
    };
    let hi = scale(window.1);
    let lo = scale(window.0).min(hi);
    (lo, hi)
}

/// Ground-truth locations of the structured corruptions, as 0/1 cubes.
#[derive(Debug, Clone)]
pub struct NoiseMasks {
    pub impulse: Cube,
    pub deadline: Cube,
    pub stripe: Cube,
}

impl NoiseMasks {
    fn zeros(shape: (usize, usize, usize)) -> CoreResult<Self> {
        let (h, w, b) = shape;
        Ok(Self {
            impulse: Cube::zeros(h, w, b)?,
            deadline: Cube::zeros(h, w, b)?,
            stripe: Cube::zeros(h, w, b)?,
        })
    }

    /// Fraction of flagged samples in one band of a mask cube.
    pub fn band_fraction(mask: &Cube, band: usize) -> CoreResult<f64> {
        let slice = mask.band(band)?;
        Ok(slice.iter().filter(|&&v| v > 0.5).count() as f64 / slice.len() as f64)
    }
}

fn substream(seed: u64, band: usize, kind: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(band as u64 * 4 + kind);
    rng
}

/// Corrupt a clean cube (values expected in `[0, 1]`) according to `spec`.
///
/// Returns the noisy cube together with the impulse/deadline/stripe masks.
/// Output values are not clipped back to `[0, 1]`; clipping would distort
/// the Gaussian statistics the solver models.
pub fn apply_noise(clean: &Cube, spec: &NoiseSpec) -> CoreResult<(Cube, NoiseMasks)> {
    let (h, w, b) = clean.shape();
    spec.validate(b)?;
    let case = spec.case_id;
    let mut noisy = clean.clone();
    let mut masks = NoiseMasks::zeros(clean.shape())?;

    let deadline_window = spec.deadline_window(b);
    let stripe_window = spec.stripe_window(b);
    let has_impulse = case >= 3;
    let has_deadlines = matches!(case, 2 | 4 | 5 | 6);
    let has_stripes = case == 6;

    for band in 0..b {
        // Gaussian component.
        let mut rng = substream(spec.seed, band, STREAM_GAUSSIAN);
        let sigma = match case {
            1 | 2 => spec.gaussian_sigma.unwrap_or(math::sqrt(0.1)),
            3 | 4 => spec.gaussian_sigma.unwrap_or(math::sqrt(0.075)),
            _ => {
                let var_max = spec.gaussian_sigma.map(|s| s * s).unwrap_or(0.2);
                let var = rng.random::<f64>() * var_max;
                math::sqrt(var)
            }
        };
        if sigma > 0.0 {
            for v in noisy.band_mut(band)? {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * g;
            }
        }

        // Salt-and-pepper impulses replace the sample outright.
        if has_impulse {
            let mut rng = substream(spec.seed, band, STREAM_IMPULSE);
            let fraction = match case {
                3 | 4 => spec.impulse_fraction.unwrap_or(0.15),
                _ => {
                    let f_max = spec.impulse_fraction.unwrap_or(0.2);
                    rng.random::<f64>() * f_max
                }
            };
            let band_values = noisy.band_mut(band)?;
            let mask_values = masks.impulse.band_mut(band)?;
            for (v, m) in band_values.iter_mut().zip(mask_values.iter_mut()) {
                let u: f64 = rng.random();
                if u < fraction {
                    *v = if u < fraction / 2.0 { 0.0 } else { 1.0 };
                    *m = 1.0;
                }
            }
        }

        // Dead lines: zeroed full-height runs of columns.
        if has_deadlines && band >= deadline_window.0 && band <= deadline_window.1 {
            let mut rng = substream(spec.seed, band, STREAM_DEADLINE);
            let count: usize = rng.random_range(3..=10);
            for _ in 0..count {
                let width = rng.random_range(1..=3usize).min(w);
                let start = rng.random_range(0..=w - width);
                for col in start..start + width {
                    for row in 0..h {
                        noisy.set(row, col, band, 0.0);
                        masks.deadline.set(row, col, band, 1.0);
                    }
                }
            }
        }

        // Stripes: full-height single columns with a constant offset of
        // random sign and magnitude in [0.2, 0.5].
        if has_stripes && band >= stripe_window.0 && band <= stripe_window.1 {
            let mut rng = substream(spec.seed, band, STREAM_STRIPE);
            let count: usize = rng.random_range(20..=40);
            for _ in 0..count {
                let col = rng.random_range(0..w);
                let magnitude = 0.2 + 0.3 * rng.random::<f64>();
                let offset = if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                };
                for row in 0..h {
                    let v = noisy.get(row, col, band);
                    noisy.set(row, col, band, v + offset);
                    masks.stripe.set(row, col, band, 1.0);
                }
            }
        }
    }
    Ok((noisy, masks))
}
