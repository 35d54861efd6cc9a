//! Core raster type, grayscale conversion, contrast stretching and image I/O.
//!
//! Intensities are stored as `f64` in the nominal range `[0, 1]`. The edge
//! operators produce signed, fractional values mid-pipeline that 8-bit
//! storage would destroy, so quantization happens only at file boundaries.

use std::fs;
use std::io::{BufWriter, ErrorKind, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};

/// A 2-D grid of real-valued intensities, row-major.
///
/// Rasters are immutable once constructed; every operation returns a new
/// raster, so they are safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl Raster {
    /// Wraps row-major data. Panics if `data.len() != width * height`
    /// or either dimension is zero.
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be >= 1");
        assert_eq!(
            data.len(),
            width as usize * height as usize,
            "data length must equal width * height"
        );
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Minimum and maximum intensity (data is never empty).
    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Counter-clockwise quarter turn: `out(x, y) = in(w_in - 1 - y, x)`.
    pub fn rot90(&self) -> Raster {
        let (w, h) = (self.width, self.height);
        Raster::from_fn(h, w, |x, y| self.get(w - 1 - y, x))
    }

    /// Copies the window starting at `(x0, y0)`. Panics if the window
    /// does not fit.
    pub fn crop(&self, x0: u32, y0: u32, width: u32, height: u32) -> Raster {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        Raster::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// Row-major interleaved RGB with channels normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            3 * width as usize * height as usize,
            "data length must equal 3 * width * height"
        );
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Decoded image: either grayscale (PGM, gray PNG) or RGB (color PNG).
#[derive(Debug, Clone)]
pub enum ImageData {
    Gray(Raster),
    Rgb(RgbImage),
}

impl ImageData {
    /// Luminance view: grayscale data passes through, RGB goes via [`to_gray`].
    pub fn into_gray(self) -> Raster {
        match self {
            ImageData::Gray(r) => r,
            ImageData::Rgb(img) => to_gray(&img),
        }
    }
}

/// Output file format for [`write_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
}

/// Rec. 709 luma. Anchored at the green channel so that gray inputs
/// `(v, v, v)` map to exactly `v`.
pub fn to_gray(img: &RgbImage) -> Raster {
    Raster::from_fn(img.width(), img.height(), |x, y| {
        let [r, g, b] = img.pixel(x, y);
        g + 0.2126 * (r - g) + 0.0722 * (b - g)
    })
}

/// Linear percentile stretch: the `lo_pct` percentile maps to 0, the
/// `hi_pct` percentile to 1, clamped to `[0, 1]`. A degenerate span
/// (constant input) maps to all-zero.
///
/// Panics if the percentile bounds violate `0 <= lo < hi <= 100`.
pub fn stretch(r: &Raster, lo_pct: f64, hi_pct: f64) -> Raster {
    assert!(
        (0.0..=100.0).contains(&lo_pct) && (0.0..=100.0).contains(&hi_pct) && lo_pct < hi_pct,
        "percentiles must satisfy 0 <= lo < hi <= 100"
    );
    let mut sorted = r.data().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("raster values are finite"));
    let lo = percentile_sorted(&sorted, lo_pct);
    let hi = percentile_sorted(&sorted, hi_pct);
    if hi <= lo {
        return Raster::filled(r.width(), r.height(), 0.0);
    }
    let span = hi - lo;
    let mut out = r.clone();
    for v in out.data_mut() {
        *v = ((*v - lo) / span).clamp(0.0, 1.0);
    }
    out
}

/// Linear-interpolated percentile of pre-sorted data (NumPy convention:
/// rank `p/100 * (n-1)`).
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// 8-bit quantization used on write: round half away from zero.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// Reads a PNG or binary PGM (P5), dispatching on magic bytes.
///
/// 8-bit samples map to `[0, 1]` by `v/255`, 16-bit by `v/65535`.
/// Missing files, malformed headers and unsupported sample depths are
/// reported as distinct errors.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    decode_image(&bytes, path)
}

/// Decodes in-memory PNG/PGM bytes; `origin` only labels errors.
pub fn decode_image(bytes: &[u8], origin: &Path) -> Result<ImageData> {
    const PNG_MAGIC: [u8; 4] = [0x89, b'P', b'N', b'G'];
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes, origin)
    } else if bytes.starts_with(&PNG_MAGIC) {
        decode_png(bytes, origin)
    } else {
        Err(Error::MalformedImage {
            path: origin.to_path_buf(),
            reason: "not a PNG or binary PGM (P5) file".into(),
        })
    }
}

fn decode_png(bytes: &[u8], origin: &Path) -> Result<ImageData> {
    use image::DynamicImage;

    let dynamic = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
        |e| Error::MalformedImage {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        },
    )?;
    let (w, h) = (dynamic.width(), dynamic.height());
    let gray8 = |data: Vec<u8>| {
        ImageData::Gray(Raster::new(
            w,
            h,
            data.iter().map(|&v| v as f64 / 255.0).collect(),
        ))
    };
    let gray16 = |data: Vec<u16>| {
        ImageData::Gray(Raster::new(
            w,
            h,
            data.iter().map(|&v| v as f64 / 65535.0).collect(),
        ))
    };
    Ok(match dynamic {
        DynamicImage::ImageLuma8(img) => gray8(img.into_raw()),
        DynamicImage::ImageLuma16(img) => gray16(img.into_raw()),
        DynamicImage::ImageLumaA8(img) => {
            gray8(img.into_raw().chunks(2).map(|p| p[0]).collect())
        }
        DynamicImage::ImageLumaA16(img) => {
            gray16(img.into_raw().chunks(2).map(|p| p[0]).collect())
        }
        DynamicImage::ImageRgb8(img) => ImageData::Rgb(RgbImage::new(
            w,
            h,
            img.into_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        )),
        DynamicImage::ImageRgba8(img) => ImageData::Rgb(RgbImage::new(
            w,
            h,
            img.into_raw()
                .chunks(4)
                .flat_map(|p| p[..3].iter().map(|&v| v as f64 / 255.0).collect::<Vec<_>>())
                .collect(),
        )),
        DynamicImage::ImageRgb16(img) => ImageData::Rgb(RgbImage::new(
            w,
            h,
            img.into_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        )),
        DynamicImage::ImageRgba16(img) => ImageData::Rgb(RgbImage::new(
            w,
            h,
            img.into_raw()
                .chunks(4)
                .flat_map(|p| p[..3].iter().map(|&v| v as f64 / 65535.0).collect::<Vec<_>>())
                .collect(),
        )),
        other => {
            return Err(Error::UnsupportedDepth {
                path: origin.to_path_buf(),
                detail: format!("PNG color type {:?}", other.color()),
            })
        }
    })
}

/// Binary PGM (P5), maxval 255 or 65535 (big-endian samples for 16-bit).
fn decode_pgm(bytes: &[u8], origin: &Path) -> Result<ImageData> {
    let malformed = |reason: &str| Error::MalformedImage {
        path: origin.to_path_buf(),
        reason: reason.into(),
    };

    let mut pos = 2; // past "P5"
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // Whitespace and '#' comment runs separate header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(malformed("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == start {
            return Err(malformed("expected decimal header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text.parse().map_err(|_| malformed("header field overflow"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || width > u32::MAX as u64 || height > u32::MAX as u64 {
        return Err(malformed("bad dimensions"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::UnsupportedDepth {
            path: origin.to_path_buf(),
            detail: format!("PGM maxval {maxval} (expected 255 or 65535)"),
        });
    }
    // Exactly one whitespace byte after maxval, then raw samples.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(malformed("missing whitespace after maxval")),
    }
    let count = width as usize * height as usize;
    let bytes_per = if maxval == 255 { 1 } else { 2 };
    let body = &bytes[pos..];
    if body.len() < count * bytes_per {
        return Err(malformed("truncated pixel data"));
    }
    let data: Vec<f64> = if maxval == 255 {
        body[..count].iter().map(|&v| v as f64 / 255.0).collect()
    } else {
        body[..count * 2]
            .chunks(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 / 65535.0)
            .collect()
    };
    Ok(ImageData::Gray(Raster::new(
        width as u32,
        height as u32,
        data,
    )))
}

/// Writes an 8-bit grayscale PNG or binary PGM. Values are clamped to
/// `[0, 1]` and quantized with [`quantize_u8`], so
/// `read_image(write_image(r))` equals the quantized raster exactly.
pub fn write_image(r: &Raster, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(r, format);
    let io_err = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(&bytes).map_err(io_err)?;
    writer.flush().map_err(io_err)?;
    Ok(())
}

/// Deterministic in-memory encoding used by [`write_image`].
pub fn encode_image(r: &Raster, format: ImageFormat) -> Vec<u8> {
    let quantized: Vec<u8> = r.data().iter().map(|&v| quantize_u8(v)).collect();
    match format {
        ImageFormat::Pgm => {
            let mut out = format!("P5\n{} {}\n255\n", r.width(), r.height()).into_bytes();
            out.extend_from_slice(&quantized);
            out
        }
        ImageFormat::Png => {
            let mut out = Vec::new();
            PngEncoder::new(&mut out)
                .write_image(&quantized, r.width(), r.height(), ExtendedColorType::L8)
                .expect("in-memory PNG encoding cannot fail");
            out
        }
    }
}
