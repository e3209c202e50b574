use std::io::Cursor;

use crate::error::{format_err, Result};
use crate::tensor::Tensor;

const FMT: &str = "PNG image";

/// Reads an 8-bit PNG as a `3 × H × W` tensor with values in `[0, 1]`.
/// Grayscale input is replicated across the three channels; alpha is dropped.
pub fn read_image_png(bytes: &[u8]) -> Result<Tensor> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| format_err(FMT, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(FMT, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| format_err(FMT, e.to_string()))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(format_err(FMT, "unexpanded palette")),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut out = Tensor::zeros(&[3, h, w]);
    for y in 0..h {
        let line = &buf[y * info.line_size..];
        for x in 0..w {
            let px = &line[x * channels..(x + 1) * channels];
            for c in 0..3 {
                let v = if channels >= 3 { px[c] } else { px[0] };
                out.set3(c, y, x, v as f64 / 255.0);
            }
        }
    }
    Ok(out)
}

/// Writes a `3 × H × W` tensor in `[0, 1]` as 8-bit RGB PNG.
pub fn write_image_png(img: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = img.dims3()?;
    if c != 3 {
        return crate::error::shape_err(format!("expected 3 channels, got {c}"));
    }
    let mut raw = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                raw.push((img.at3(ch, y, x) * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| format_err(FMT, e.to_string()))?;
        writer
            .write_image_data(&raw)
            .map_err(|e| format_err(FMT, e.to_string()))?;
        writer.finish().map_err(|e| format_err(FMT, e.to_string()))?;
    }
    Ok(out)
}
