//! Byte-level readers and writers: PFM and 16-bit PNG disparity maps, 8-bit
//! PNG stereo images, and the flat weight container.

mod image;
mod pfm;
mod png16;
mod weights;

pub use image::{read_image_png, write_image_png};
pub use pfm::{read_pfm, write_pfm};
pub use png16::{read_disp_png16, write_disp_png16};
pub use weights::{load_weights, save_weights, WeightBundle, WEIGHTS_MAGIC, WEIGHTS_VERSION};

/// Recognized disparity container, sniffed from the leading bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DispFormat {
    Pfm,
    Png16,
}

pub fn sniff_disp_format(bytes: &[u8]) -> Option<DispFormat> {
    if bytes.starts_with(b"Pf") || bytes.starts_with(b"PF") {
        Some(DispFormat::Pfm)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        Some(DispFormat::Png16)
    } else {
        None
    }
}

/// Reads a disparity map in either supported format.
pub fn read_disparity(bytes: &[u8]) -> crate::Result<(crate::Tensor, crate::Mask)> {
    match sniff_disp_format(bytes) {
        Some(DispFormat::Pfm) => read_pfm(bytes),
        Some(DispFormat::Png16) => read_disp_png16(bytes),
        None => Err(crate::error::format_err("disparity", "neither a PFM nor a PNG payload")),
    }
}
