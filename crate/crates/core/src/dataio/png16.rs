use std::io::Cursor;

use crate::error::{format_err, Result};
use crate::mask::Mask;
use crate::tensor::Tensor;

const FMT: &str = "PNG16";

/// Decodes a KITTI-style disparity PNG: 16-bit single channel, value / 256,
/// stored zero marks an invalid pixel.
pub fn read_disp_png16(bytes: &[u8]) -> Result<(Tensor, Mask)> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| format_err(FMT, e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Sixteen {
        return Err(format_err(FMT, format!("bit depth {depth:?}, expected 16")));
    }
    if color != png::ColorType::Grayscale {
        return Err(format_err(
            FMT,
            format!("color type {color:?}, expected single channel"),
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(FMT, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| format_err(FMT, e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for row in 0..h {
        let line = &buf[row * info.line_size..row * info.line_size + 2 * w];
        for px in line.chunks_exact(2) {
            let stored = u16::from_be_bytes([px[0], px[1]]);
            values.push(stored as f64 / 256.0);
            valid.push(stored != 0);
        }
    }
    Ok((Tensor::new(vec![h, w], values)?, Mask::new(h, w, valid)?))
}

/// Encodes a disparity map as 16-bit PNG (round(d·256), clamped to
/// `[1, 65535]`); masked-out pixels are stored as 0.
pub fn write_disp_png16(map: &Tensor, mask: Option<&Mask>) -> Result<Vec<u8>> {
    let (h, w) = map.dims2()?;
    if let Some(m) = mask {
        m.check_matches(map)?;
    }
    let mut raw = Vec::with_capacity(h * w * 2);
    for i in 0..h {
        for j in 0..w {
            let ok = mask.is_none_or(|m| m.get(i, j));
            let stored = if ok && map.at2(i, j).is_finite() {
                (map.at2(i, j) * 256.0).round().clamp(1.0, 65535.0) as u16
            } else {
                0
            };
            raw.extend_from_slice(&stored.to_be_bytes());
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(|e| format_err(FMT, e.to_string()))?;
        writer
            .write_image_data(&raw)
            .map_err(|e| format_err(FMT, e.to_string()))?;
        writer.finish().map_err(|e| format_err(FMT, e.to_string()))?;
    }
    Ok(out)
}
