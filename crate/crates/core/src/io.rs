//! PNG (8/16-bit) and binary PPM (P6) image files.
//!
//! Loaded images are always three-channel `f32` tensors in `[0, 1]`,
//! obtained by dividing each stored code by the format's maximum code value.
//! Saving clamps to `[0, 1]` and quantizes with `round(v * 255)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Container {
    Png,
    Ppm,
}

const PNG_MAGIC: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

fn container_for_write(path: &Path) -> Result<Container> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => Ok(Container::Png),
        Some("ppm") | Some("pnm") => Ok(Container::Ppm),
        _ => Err(Error::format(path, "output must end in .png or .ppm")),
    }
}

/// Reads a PNG or P6 PPM image, sniffing the format from its magic bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|reason| Error::format(path, reason))
}

/// Decodes an in-memory PNG or P6 PPM file.
pub fn decode_image(bytes: &[u8]) -> std::result::Result<Tensor<f32>, String> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else {
        Err("unrecognized magic number (expected PNG or binary PPM P6)".into())
    }
}

fn decode_png(bytes: &[u8]) -> std::result::Result<Tensor<f32>, String> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let (color, depth) = reader.output_color_type();
    let max_code = match depth {
        png::BitDepth::Eight => 255.0f32,
        png::BitDepth::Sixteen => 65535.0,
        other => return Err(format!("unsupported PNG bit depth {other:?}; only 8 and 16 are accepted")),
    };
    let samples_per_px = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err("indexed-color PNG is not supported".into()),
    };
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or("PNG too large")?];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let sample = |i: usize| -> f32 {
        match depth {
            png::BitDepth::Sixteen => u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]) as f32,
            _ => buf[i] as f32,
        }
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for p in 0..w * h {
        let base = p * samples_per_px;
        if samples_per_px < 3 {
            let v = sample(base) / max_code;
            data.extend([v, v, v]);
        } else {
            data.extend((0..3).map(|c| sample(base + c) / max_code));
        }
    }
    Tensor::from_vec(h, w, 3, data).map_err(|e| e.to_string())
}

/// Parses the whitespace/comment separated header fields of a PNM file.
fn pnm_header(bytes: &[u8], fields: usize) -> std::result::Result<(Vec<usize>, usize), String> {
    let mut pos = 2;
    let mut out = Vec::with_capacity(fields);
    while out.len() < fields {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated or malformed PPM header".into());
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?;
        out.push(text.parse::<usize>().map_err(|e| e.to_string())?);
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing whitespace after PPM header".into());
    }
    Ok((out, pos + 1))
}

fn decode_ppm(bytes: &[u8]) -> std::result::Result<Tensor<f32>, String> {
    let (fields, offset) = pnm_header(bytes, 3)?;
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported PPM maxval {maxval}"));
    }
    let wide = maxval > 255;
    let n = w * h * 3;
    let need = if wide { 2 * n } else { n };
    let raster = &bytes[offset..];
    if raster.len() < need {
        return Err(format!("PPM raster truncated: {} of {need} bytes", raster.len()));
    }
    let max = maxval as f32;
    let data = (0..n)
        .map(|i| {
            let code = if wide {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as f32
            } else {
                raster[i] as f32
            };
            code / max
        })
        .collect();
    Tensor::from_vec(h, w, 3, data).map_err(|e| e.to_string())
}

/// The byte stored for value `v`: clamp to `[0, 1]`, then `round(v * 255)`.
#[inline]
pub fn quantize<T: Real>(v: T) -> u8 {
    let v = v.to_f64_lossy();
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 1- or 3-channel tensor as an 8-bit PNG or PPM (by extension).
///
/// Single-channel tensors become grayscale PNGs, or are replicated to RGB
/// when written as PPM.
pub fn save_image<T: Real>(t: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let channels = t.channels();
    if channels != 1 && channels != 3 {
        return Err(Error::shape(
            "save_image",
            format!("expected 1 or 3 channels, got {channels}"),
        ));
    }
    let container = container_for_write(path)?;
    let bytes: Vec<u8> = t.data().iter().map(|&v| quantize(v)).collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match container {
        Container::Png => {
            let mut enc = png::Encoder::new(&mut out, t.width() as u32, t.height() as u32);
            enc.set_color(if channels == 1 {
                png::ColorType::Grayscale
            } else {
                png::ColorType::Rgb
            });
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::format(path, e.to_string()))?;
            writer
                .write_image_data(&bytes)
                .map_err(|e| Error::format(path, e.to_string()))?;
            writer
                .finish()
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
        Container::Ppm => {
            write!(out, "P6\n{} {}\n255\n", t.width(), t.height()).map_err(|e| Error::io(path, e))?;
            let rgb: Vec<u8> = if channels == 1 {
                bytes.iter().flat_map(|&b| [b, b, b]).collect()
            } else {
                bytes
            };
            out.write_all(&rgb).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Encodes a tensor as interleaved 8-bit RGBA (for canvases and previews).
pub fn to_rgba8<T: Real>(t: &Tensor<T>) -> Vec<u8> {
    let c = t.channels();
    let mut out = Vec::with_capacity(t.height() * t.width() * 4);
    for px in t.data().chunks_exact(c.max(1)) {
        if c >= 3 {
            out.extend([quantize(px[0]), quantize(px[1]), quantize(px[2]), 255]);
        } else {
            let g = quantize(px[0]);
            out.extend([g, g, g, 255]);
        }
    }
    out
}

/// Inverse of [`to_rgba8`]; alpha is discarded.
pub fn from_rgba8(rgba: &[u8], width: usize, height: usize) -> Result<Tensor<f32>> {
    if rgba.len() != width * height * 4 {
        return Err(Error::shape(
            "from_rgba8",
            format!("{} bytes for {width}x{height} RGBA", rgba.len()),
        ));
    }
    let data = rgba
        .chunks_exact(4)
        .flat_map(|p| [p[0], p[1], p[2]])
        .map(|b| b as f32 / 255.0)
        .collect();
    Tensor::from_vec(height, width, 3, data)
}
