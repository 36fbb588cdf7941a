//! Forward/inverse 3-D discrete Fourier transform for arbitrary dimensions.
//!
//! Real hyperspectral cubes have awkward sizes (145, 307, ...), so the
//! transform must handle any length, primes included. Composite lengths are
//! split by smallest prime factor (Cooley-Tukey), small prime lengths use a
//! table-driven direct DFT, and large primes fall back to Bluestein's
//! chirp-z algorithm on a power-of-two convolution.
//!
//! Conventions: the forward transform is unnormalized with an `e^{-2*pi*i}`
//! kernel; [`ifftn`] carries the full `1/(h*w*b)` normalization so
//! `ifftn(fftn(c))` reproduces `c`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::cube::Cube;
use crate::math;

/// Largest prime length handled by the direct table-driven DFT; anything
/// bigger goes through Bluestein.
const DIRECT_PRIME_MAX: usize = 61;

/// Complex-valued cube sharing [`Cube`]'s shape and layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<Complex64>,
}

impl SpectralCube {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[k * self.height * self.width + i * self.width + j]
    }

    /// Real parts as a cube.
    pub fn real_part(&self) -> Cube {
        Cube::from_vec(
            self.height,
            self.width,
            self.bands,
            self.data.iter().map(|z| z.re).collect(),
        )
        .expect("spectral cube carries valid dimensions")
    }

    /// Largest `|Im|` over all entries.
    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// Unnormalized forward 3-D DFT of a real cube.
pub fn fftn(cube: &Cube) -> SpectralCube {
    let (h, w, b) = cube.shape();
    let mut data: Vec<Complex64> = cube
        .data()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft3_in_place(&mut data, h, w, b);
    SpectralCube {
        height: h,
        width: w,
        bands: b,
        data,
    }
}

/// Inverse 3-D DFT, normalized by `1/(h*w*b)`.
pub fn ifftn(sc: &SpectralCube) -> SpectralCube {
    let (h, w, b) = sc.shape();
    let mut data: Vec<Complex64> = sc.data.iter().map(|z| z.conj()).collect();
    fft3_in_place(&mut data, h, w, b);
    let scale = 1.0 / (h * w * b) as f64;
    for z in &mut data {
        *z = z.conj() * scale;
    }
    SpectralCube {
        height: h,
        width: w,
        bands: b,
        data,
    }
}

fn fft3_in_place(data: &mut [Complex64], h: usize, w: usize, b: usize) {
    let hw = h * w;
    // Width axis: contiguous lines of length w.
    let plan_w = Fft1d::new(w);
    let mut line = vec![Complex64::ZERO; w];
    for k in 0..b {
        for i in 0..h {
            let start = k * hw + i * w;
            line.copy_from_slice(&data[start..start + w]);
            let out = plan_w.forward(&line);
            data[start..start + w].copy_from_slice(&out);
        }
    }
    // Height axis: stride w within each band.
    let plan_h = Fft1d::new(h);
    let mut line = vec![Complex64::ZERO; h];
    for k in 0..b {
        for j in 0..w {
            let start = k * hw + j;
            for (t, v) in line.iter_mut().enumerate() {
                *v = data[start + t * w];
            }
            let out = plan_h.forward(&line);
            for (t, v) in out.iter().enumerate() {
                data[start + t * w] = *v;
            }
        }
    }
    // Band axis: stride h*w.
    let plan_b = Fft1d::new(b);
    let mut line = vec![Complex64::ZERO; b];
    for i in 0..h {
        for j in 0..w {
            let start = i * w + j;
            for (t, v) in line.iter_mut().enumerate() {
                *v = data[start + t * hw];
            }
            let out = plan_b.forward(&line);
            for (t, v) in out.iter().enumerate() {
                data[start + t * hw] = *v;
            }
        }
    }
}

/// One-dimensional forward FFT plan for a fixed length.
pub(crate) struct Fft1d {
    n: usize,
    algo: Algo,
}

enum Algo {
    Identity,
    /// Direct DFT via a precomputed twiddle table; exact index arithmetic
    /// `(j*k) % n` keeps angles in range.
    Direct {
        twiddles: Vec<Complex64>,
    },
    /// Cooley-Tukey split `n = radix * m` by the smallest prime factor.
    CooleyTukey {
        radix: usize,
        sub: Box<Fft1d>,
        twiddles: Vec<Complex64>,
    },
    /// Bluestein chirp-z for large prime lengths: convolution of chirped
    /// input with a fixed kernel, carried out on a power-of-two FFT.
    Bluestein {
        conv_len: usize,
        sub: Box<Fft1d>,
        chirp_neg: Vec<Complex64>,
        kernel_fft: Vec<Complex64>,
    },
}

impl Fft1d {
    pub(crate) fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        if n == 1 {
            return Self {
                n,
                algo: Algo::Identity,
            };
        }
        let p = smallest_prime_factor(n);
        let algo = if p == n {
            if n <= DIRECT_PRIME_MAX {
                Algo::Direct {
                    twiddles: twiddle_table(n),
                }
            } else {
                Self::bluestein(n)
            }
        } else {
            Algo::CooleyTukey {
                radix: p,
                sub: Box::new(Fft1d::new(n / p)),
                twiddles: twiddle_table(n),
            }
        };
        Self { n, algo }
    }

    fn bluestein(n: usize) -> Algo {
        let conv_len = (2 * n - 1).next_power_of_two();
        let sub = Box::new(Fft1d::new(conv_len));
        // chirp_neg[j] = e^{-i*pi*j^2/n}, with j^2 reduced mod 2n to keep the
        // angle argument small.
        let chirp_neg: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = (j * j) % (2 * n);
                let angle = core::f64::consts::PI * t as f64 / n as f64;
                Complex64::new(math::cos(angle), -math::sin(angle))
            })
            .collect();
        let mut kernel = vec![Complex64::ZERO; conv_len];
        kernel[0] = chirp_neg[0].conj();
        for t in 1..n {
            let v = chirp_neg[t].conj();
            kernel[t] = v;
            kernel[conv_len - t] = v;
        }
        let kernel_fft = sub.forward(&kernel);
        Algo::Bluestein {
            conv_len,
            sub,
            chirp_neg,
            kernel_fft,
        }
    }

    pub(crate) fn forward(&self, input: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(input.len(), self.n);
        match &self.algo {
            Algo::Identity => input.to_vec(),
            Algo::Direct { twiddles } => {
                let n = self.n;
                let mut out = vec![Complex64::ZERO; n];
                for (k, o) in out.iter_mut().enumerate() {
                    let mut acc = Complex64::ZERO;
                    for (j, &x) in input.iter().enumerate() {
                        acc += x * twiddles[(j * k) % n];
                    }
                    *o = acc;
                }
                out
            }
            Algo::CooleyTukey {
                radix,
                sub,
                twiddles,
            } => {
                let n = self.n;
                let p = *radix;
                let m = n / p;
                let mut parts: Vec<Vec<Complex64>> = Vec::with_capacity(p);
                let mut buf = vec![Complex64::ZERO; m];
                for l in 0..p {
                    for (j, v) in buf.iter_mut().enumerate() {
                        *v = input[j * p + l];
                    }
                    parts.push(sub.forward(&buf));
                }
                let mut out = vec![Complex64::ZERO; n];
                for (k, o) in out.iter_mut().enumerate() {
                    let km = k % m;
                    let mut acc = parts[0][km];
                    for (l, part) in parts.iter().enumerate().skip(1) {
                        acc += part[km] * twiddles[(l * k) % n];
                    }
                    *o = acc;
                }
                out
            }
            Algo::Bluestein {
                conv_len,
                sub,
                chirp_neg,
                kernel_fft,
            } => {
                let n = self.n;
                let m = *conv_len;
                let mut a = vec![Complex64::ZERO; m];
                for (j, &x) in input.iter().enumerate() {
                    a[j] = x * chirp_neg[j];
                }
                let mut spec = sub.forward(&a);
                for (s, k) in spec.iter_mut().zip(kernel_fft.iter()) {
                    *s *= k;
                }
                // Inverse FFT of the product via conjugation.
                for s in &mut spec {
                    *s = s.conj();
                }
                let conv = sub.forward(&spec);
                let scale = 1.0 / m as f64;
                (0..n)
                    .map(|k| conv[k].conj() * scale * chirp_neg[k])
                    .collect()
            }
        }
    }
}

fn twiddle_table(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|t| {
            let angle = -2.0 * core::f64::consts::PI * t as f64 / n as f64;
            Complex64::new(math::cos(angle), math::sin(angle))
        })
        .collect()
}

fn smallest_prime_factor(n: usize) -> usize {
    if n % 2 == 0 {
        return 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return p;
        }
        p += 2;
    }
    n
}
