//! Native cube persistence and band export.
//!
//! A cube on disk is a pair of files sharing one path stem: `<stem>.json`
//! holds the [`CubeHeader`] sidecar and `<stem>.bin` the raw little-endian
//! payload, band-sequential and row-major within each band. `f64` payloads
//! round-trip bitwise; `f32` narrows on write.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use hsirestore_core::Cube;

/// Sample encoding of the binary payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn sample_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

const MAGIC: &str = "HSICUBE1";
const LAYOUT: &str = "band-sequential";

/// JSON sidecar describing a stored cube.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CubeHeader {
    pub magic: String,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub dtype: Dtype,
    pub layout: String,
    /// `(min, max)` of the original data before normalization, when known.
    #[serde(default)]
    pub value_range: Option<(f64, f64)>,
}

/// Errors from cube persistence and band export.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header is not valid JSON: {source}")]
    HeaderJson {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// Header/payload inconsistency; `field` names the offending part.
    #[error("{path}: bad {field}: {detail}")]
    Format {
        path: PathBuf,
        field: &'static str,
        detail: String,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

fn sidecar_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let mut header = stem.as_os_str().to_owned();
    header.push(".json");
    let mut payload = stem.as_os_str().to_owned();
    payload.push(".bin");
    (PathBuf::from(header), PathBuf::from(payload))
}

/// Write a cube under the given path stem, recording an optional original
/// value range in the header.
pub fn write_cube_with_range(
    stem: &Path,
    cube: &Cube,
    dtype: Dtype,
    value_range: Option<(f64, f64)>,
) -> Result<(), IoError> {
    let (header_path, payload_path) = sidecar_paths(stem);
    let header = CubeHeader {
        magic: MAGIC.to_owned(),
        height: cube.height(),
        width: cube.width(),
        bands: cube.bands(),
        dtype,
        layout: LAYOUT.to_owned(),
        value_range,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&header_path, json).map_err(|source| IoError::Io {
        path: header_path.clone(),
        source,
    })?;

    let mut payload = Vec::with_capacity(cube.len() * dtype.sample_bytes());
    match dtype {
        Dtype::F64 => {
            for &v in cube.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::F32 => {
            for &v in cube.data() {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(&payload_path).map_err(|source| IoError::Io {
        path: payload_path.clone(),
        source,
    })?;
    file.write_all(&payload).map_err(|source| IoError::Io {
        path: payload_path.clone(),
        source,
    })
}

/// Write a cube under the given path stem.
pub fn write_cube(stem: &Path, cube: &Cube, dtype: Dtype) -> Result<(), IoError> {
    write_cube_with_range(stem, cube, dtype, None)
}

/// Read a cube written by [`write_cube`], validating the header against the
/// payload before any data is returned.
pub fn read_cube(stem: &Path) -> Result<(Cube, CubeHeader), IoError> {
    let (header_path, payload_path) = sidecar_paths(stem);
    let header_text = fs::read_to_string(&header_path).map_err(|source| IoError::Io {
        path: header_path.clone(),
        source,
    })?;
    let header: CubeHeader =
        serde_json::from_str(&header_text).map_err(|source| IoError::HeaderJson {
            path: header_path.clone(),
            source,
        })?;
    if header.magic != MAGIC {
        return Err(IoError::Format {
            path: header_path.clone(),
            field: "magic",
            detail: format!("expected {MAGIC:?}, found {:?}", header.magic),
        });
    }
    if header.layout != LAYOUT {
        return Err(IoError::Format {
            path: header_path.clone(),
            field: "layout",
            detail: format!("expected {LAYOUT:?}, found {:?}", header.layout),
        });
    }
    if header.height == 0 || header.width == 0 || header.bands == 0 {
        return Err(IoError::Format {
            path: header_path.clone(),
            field: "dimensions",
            detail: format!(
                "{}x{}x{} must all be positive",
                header.height, header.width, header.bands
            ),
        });
    }
    let bytes = fs::read(&payload_path).map_err(|source| IoError::Io {
        path: payload_path.clone(),
        source,
    })?;
    let samples = header.height * header.width * header.bands;
    let expected = samples * header.dtype.sample_bytes();
    if bytes.len() != expected {
        return Err(IoError::Format {
            path: payload_path.clone(),
            field: "payload length",
            detail: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let data: Vec<f64> = match header.dtype {
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
    };
    let cube = Cube::from_vec(header.height, header.width, header.bands, data).map_err(|e| {
        IoError::Format {
            path: payload_path.clone(),
            field: "dimensions",
            detail: e.to_string(),
        }
    })?;
    Ok((cube, header))
}

/// Affinely map each band to `[0, 1]`, returning the per-band `(min, max)`
/// ranges. A constant band maps to all zeros with its value recorded as
/// `(v, v)`.
pub fn normalize_bands(cube: &Cube) -> (Cube, Vec<(f64, f64)>) {
    let mut out = cube.clone();
    let mut ranges = Vec::with_capacity(cube.bands());
    for k in 0..cube.bands() {
        let band = out.band_mut(k).expect("band index in range");
        let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            for v in band.iter_mut() {
                *v = (*v - lo) / (hi - lo);
            }
        } else {
            band.fill(0.0);
        }
        ranges.push((lo, hi));
    }
    (out, ranges)
}

/// Invert [`normalize_bands`] using the recorded ranges.
pub fn denormalize_bands(cube: &Cube, ranges: &[(f64, f64)]) -> Result<Cube, IoError> {
    if ranges.len() != cube.bands() {
        return Err(IoError::Format {
            path: PathBuf::new(),
            field: "value_range",
            detail: format!("{} ranges for {} bands", ranges.len(), cube.bands()),
        });
    }
    let mut out = cube.clone();
    for (k, &(lo, hi)) in ranges.iter().enumerate() {
        let band = out.band_mut(k).expect("band index in range");
        if hi > lo {
            for v in band.iter_mut() {
                *v = *v * (hi - lo) + lo;
            }
        } else {
            band.fill(lo);
        }
    }
    Ok(out)
}

/// Export one band as an 8-bit grayscale PNG: values clamped to `[0, 1]`,
/// scaled to 255, rounded half-up.
pub fn export_band_png(cube: &Cube, band: usize, path: &Path) -> Result<(), IoError> {
    let slice = cube.band(band).map_err(|e| IoError::Format {
        path: path.to_owned(),
        field: "band",
        detail: e.to_string(),
    })?;
    let (h, w) = (cube.height() as u32, cube.width() as u32);
    let img = image::GrayImage::from_fn(w, h, |x, y| {
        let v = slice[y as usize * cube.width() + x as usize];
        image::Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    img.save(path).map_err(|source| IoError::Image {
        path: path.to_owned(),
        source,
    })
}
