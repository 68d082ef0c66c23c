//! PNG and PGM grayscale image I/O.

use super::{BinaryImage, GrayImage, RasterError};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

/// Loads a grayscale image from a PNG or PGM file (by extension).
/// Color PNGs are converted to luma with the Rec.601 weights.
pub fn load_gray(path: &Path) -> Result<GrayImage, RasterError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => load_png(path),
        Some("pgm") => load_pgm(path),
        other => Err(RasterError::UnsupportedFormat(format!(
            "{} (extension {:?})",
            path.display(),
            other
        ))),
    }
}

fn load_png(path: &Path) -> Result<GrayImage, RasterError> {
    let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = decoder
        .read_info()
        .map_err(|e| RasterError::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| RasterError::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    let (w, h) = (info.width as usize, info.height as usize);
    if info.bit_depth != png::BitDepth::Eight {
        return Err(RasterError::UnsupportedFormat(format!(
            "{}: only 8-bit PNGs are supported",
            path.display()
        )));
    }
    let data = match info.color_type {
        png::ColorType::Grayscale => buf[..w * h].to_vec(),
        png::ColorType::GrayscaleAlpha => buf[..w * h * 2].chunks(2).map(|p| p[0]).collect(),
        png::ColorType::Rgb => buf[..w * h * 3].chunks(3).map(luma).collect(),
        png::ColorType::Rgba => buf[..w * h * 4].chunks(4).map(luma).collect(),
        other => {
            return Err(RasterError::UnsupportedFormat(format!(
                "{}: color type {other:?}",
                path.display()
            )))
        }
    };
    Ok(GrayImage::from_raw(h, w, data))
}

fn luma(px: &[u8]) -> u8 {
    (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64).round() as u8
}

fn load_pgm(path: &Path) -> Result<GrayImage, RasterError> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    let bad = |msg: &str| RasterError::UnsupportedFormat(format!("{}: {msg}", path.display()));

    let mut pos = 0usize;
    let mut token = |raw: &[u8]| -> Option<String> {
        while pos < raw.len() {
            if raw[pos] == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
            } else if raw[pos].is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&raw[start..pos]).into_owned())
    };

    let magic = token(&raw).ok_or_else(|| bad("truncated header"))?;
    let w: usize = token(&raw).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad width"))?;
    let h: usize = token(&raw).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad height"))?;
    let maxval: usize =
        token(&raw).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGMs are supported"));
    }

    let data = match magic.as_str() {
        "P5" => {
            // Binary payload starts after exactly one whitespace byte.
            let start = pos + 1;
            if raw.len() < start + w * h {
                return Err(bad("truncated pixel data"));
            }
            raw[start..start + w * h].to_vec()
        }
        "P2" => {
            let mut data = Vec::with_capacity(w * h);
            for _ in 0..w * h {
                let v: usize =
                    token(&raw).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad pixel"))?;
                data.push(v.min(255) as u8);
            }
            data
        }
        _ => return Err(bad("not a P2/P5 PGM")),
    };
    Ok(GrayImage::from_raw(h, w, data))
}

/// Writes a grayscale image as an 8-bit PNG.
pub fn save_gray_png(img: &GrayImage, path: &Path) -> Result<(), RasterError> {
    write_png(path, img.height(), img.width(), img.data())
}

/// Writes a binary mask as a black/white PNG (1 -> 255).
pub fn save_binary_png(img: &BinaryImage, path: &Path) -> Result<(), RasterError> {
    let data: Vec<u8> = img.data().iter().map(|&v| if v == 1 { 255 } else { 0 }).collect();
    write_png(path, img.height(), img.width(), &data)
}

fn write_png(path: &Path, h: usize, w: usize, data: &[u8]) -> Result<(), RasterError> {
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, w as u32, h as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| RasterError::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    writer
        .write_image_data(data)
        .map_err(|e| RasterError::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    writer
        .finish()
        .map_err(|e| RasterError::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Loads a mask previously written by [`save_binary_png`]: any nonzero
/// intensity counts as foreground.
pub fn load_mask(path: &Path) -> Result<BinaryImage, RasterError> {
    let gray = load_gray(path)?;
    let data = gray.data().iter().map(|&v| u8::from(v > 0)).collect();
    Ok(BinaryImage::from_raw(gray.height(), gray.width(), data))
}
