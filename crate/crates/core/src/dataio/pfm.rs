use crate::error::{format_err, Result};
use crate::mask::Mask;
use crate::tensor::Tensor;

const FMT: &str = "PFM";

/// Decodes a grayscale (`Pf`) PFM payload.
///
/// Rows are stored bottom-up and are returned top-down. A negative scale
/// selects little-endian floats, a positive one big-endian. Non-finite values
/// (Middlebury's marker for unknown disparity) come back as `0.0` with the
/// mask entry cleared.
pub fn read_pfm(bytes: &[u8]) -> Result<(Tensor, Mask)> {
    let mut cursor = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        let start = cursor;
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if start == cursor {
            return Err(format_err(FMT, "truncated header"));
        }
        let tok = std::str::from_utf8(&bytes[start..cursor])
            .map_err(|_| format_err(FMT, "non-ASCII header"))?
            .to_string();
        Ok(tok)
    };
    let magic = next_token(bytes)?;
    if magic != "Pf" {
        return Err(format_err(FMT, format!("bad magic {magic:?}, expected \"Pf\"")));
    }
    let width: usize = next_token(bytes)?
        .parse()
        .map_err(|_| format_err(FMT, "unparsable width"))?;
    let height: usize = next_token(bytes)?
        .parse()
        .map_err(|_| format_err(FMT, "unparsable height"))?;
    let scale: f64 = next_token(bytes)?
        .parse()
        .map_err(|_| format_err(FMT, "unparsable scale"))?;
    if width == 0 || height == 0 {
        return Err(format_err(FMT, "dimensions must be positive"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err(FMT, "scale must be nonzero"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    let start = cursor + 1;
    let need = width * height * 4;
    if bytes.len() < start + need {
        return Err(format_err(
            FMT,
            format!(
                "payload holds {} bytes, {width}x{height} needs {need}",
                bytes.len().saturating_sub(start)
            ),
        ));
    }
    let little = scale < 0.0;
    let payload = &bytes[start..start + need];
    let mut values = vec![0.0; width * height];
    let mut valid = vec![false; width * height];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (k / width, k % width);
        let dst = (height - 1 - file_row) * width + col;
        if v.is_finite() {
            values[dst] = v as f64;
            valid[dst] = true;
        }
    }
    Ok((
        Tensor::new(vec![height, width], values)?,
        Mask::new(height, width, valid)?,
    ))
}

/// Encodes a `h × w` map as little-endian grayscale PFM. Values are narrowed
/// to `f32`; masked-out pixels are written as `+inf`.
pub fn write_pfm(map: &Tensor, mask: Option<&Mask>) -> Result<Vec<u8>> {
    let (h, w) = map.dims2()?;
    if let Some(m) = mask {
        m.check_matches(map)?;
    }
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(h * w * 4);
    for row in (0..h).rev() {
        for col in 0..w {
            let ok = mask.is_none_or(|m| m.get(row, col));
            let v = if ok { map.at2(row, col) as f32 } else { f32::INFINITY };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}
