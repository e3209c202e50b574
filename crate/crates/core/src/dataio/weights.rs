//! Flat little-endian weight container.
//!
//! ```text
//! magic    4 bytes  "SSWB"
//! version  u32      1
//! seeded   u8       0 or 1
//! seed     u64      generator seed (0 when not seeded)
//! count    u32      number of tensors
//! per tensor, in bundle order:
//!   name_len u32, name (UTF-8), rank u32, dims u32 × rank, payload f32 × prod(dims)
//! ```

use indexmap::IndexMap;

use crate::error::{format_err, Error, Result};
use crate::tensor::Tensor;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"SSWB";
pub const WEIGHTS_VERSION: u32 = 1;
const FMT: &str = "weight bundle";

/// Named tensors in insertion order plus provenance metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightBundle {
    pub version: u32,
    /// Seed of the generator that produced the weights, if synthetic.
    pub seed: Option<u64>,
    tensors: IndexMap<String, Tensor>,
}

impl WeightBundle {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            version: WEIGHTS_VERSION,
            seed,
            tensors: IndexMap::new(),
        }
    }

    /// Adds a tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::Weight {
                name,
                reason: "duplicate name".into(),
            });
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    /// Replaces an existing tensor or adds a new one.
    pub fn set(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::Weight {
            name: name.to_string(),
            reason: "missing from bundle".into(),
        })
    }

    /// Fetches a tensor and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.get(name)?;
        if t.shape() != shape {
            return Err(Error::Weight {
                name: name.to_string(),
                reason: format!("shape {:?}, expected {:?}", t.shape(), shape),
            });
        }
        Ok(t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Sets every tensor whose name starts with `prefix` to zero.
    pub fn zero_prefix(&mut self, prefix: &str) {
        for (name, t) in self.tensors.iter_mut() {
            if name.starts_with(prefix) {
                t.data_mut().fill(0.0);
            }
        }
    }
}

pub fn save_weights(bundle: &WeightBundle) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&bundle.version.to_le_bytes());
    out.push(bundle.seed.is_some() as u8);
    out.extend_from_slice(&bundle.seed.unwrap_or(0).to_le_bytes());
    out.extend_from_slice(&u32_len(bundle.tensors.len())?.to_le_bytes());
    for (name, t) in &bundle.tensors {
        out.extend_from_slice(&u32_len(name.len())?.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&u32_len(t.rank())?.to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&u32_len(d)?.to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn load_weights(bytes: &[u8]) -> Result<WeightBundle> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(format_err(FMT, "magic mismatch"));
    }
    let version = r.u32("version")?;
    if version != WEIGHTS_VERSION {
        return Err(format_err(FMT, format!("unsupported version {version}")));
    }
    let seeded = r.take(1, "seed flag")?[0];
    let seed = r.u64("seed")?;
    let count = r.u32("count")?;
    let mut bundle = WeightBundle::new((seeded != 0).then_some(seed));
    for idx in 0..count {
        let what = format!("tensor #{idx} header");
        let name_len = r.u32(&what)? as usize;
        let name = std::str::from_utf8(r.take(name_len, &what)?)
            .map_err(|_| format_err(FMT, format!("tensor #{idx}: name is not UTF-8")))?
            .to_string();
        let ctx = format!("tensor `{name}`");
        let rank = r.u32(&ctx)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32(&ctx)? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err(FMT, format!("{ctx}: dims overflow")))?;
        let payload_len = n
            .checked_mul(4)
            .ok_or_else(|| format_err(FMT, format!("{ctx}: dims overflow")))?;
        let payload = r.take(payload_len, &format!("{ctx} payload"))?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        bundle
            .insert(name, Tensor::new(dims, data)?)
            .map_err(|e| format_err(FMT, e.to_string()))?;
    }
    if r.pos != bytes.len() {
        return Err(format_err(FMT, "trailing bytes after last tensor"));
    }
    Ok(bundle)
}

fn u32_len(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| format_err(FMT, format!("{n} does not fit in u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err(FMT, format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}
