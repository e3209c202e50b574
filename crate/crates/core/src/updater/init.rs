use crate::depth::DepthEstimate;
use crate::tensor::Tensor;

/// `d0 = eta · width · z / max(z) + eps`, with `width` in quarter-resolution
/// pixels. A map whose maximum is not positive yields the constant `eps`.
pub fn init_disparity(z: &DepthEstimate, width: usize, eta: f64, eps: f64) -> Tensor {
    let zmax = z.z.max();
    if !(zmax > 0.0) {
        return z.z.map(|_| eps);
    }
    let span = eta * width as f64;
    z.z.map(|v| span * (v / zmax) + eps)
}
