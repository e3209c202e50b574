use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Per-pixel validity for a `h × w` map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return shape_err(format!("mask {height}x{width} with {} entries", data.len()));
        }
        Ok(Self { height, width, data })
    }

    pub fn all(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![true; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self { height, width, data }
    }

    /// Valid where the map value is finite.
    pub fn finite(map: &Tensor) -> Result<Self> {
        let (h, w) = map.dims2()?;
        Ok(Self {
            height: h,
            width: w,
            data: map.data().iter().map(|v| v.is_finite()).collect(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.width + j]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.dims() != other.dims() {
            return shape_err(format!("mask {:?} vs {:?}", self.dims(), other.dims()));
        }
        Ok(Mask {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub(crate) fn check_matches(&self, map: &Tensor) -> Result<()> {
        let (h, w) = map.dims2()?;
        if (h, w) != self.dims() {
            return shape_err(format!("mask {:?} vs map {h}x{w}", self.dims()));
        }
        Ok(())
    }
}
