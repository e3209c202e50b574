//! Mechanism hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default scale factors probed by the scale lookup: `{1,2,4,6,8,10,12,16}/8`.
pub const DEFAULT_SCALE_FACTORS: [f64; 8] = [0.125, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0];

/// Ratio between full and quarter resolution.
pub const UPSAMPLE_FACTOR: usize = 4;

/// Retrieval settings shared by pyramid lookup and scale lookup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookupConfig {
    pub radius: usize,
    pub num_levels: usize,
    pub scale_factors: Vec<f64>,
}

impl Default for LookupConfig {
    fn default() -> Self {
        Self {
            radius: 4,
            num_levels: 2,
            scale_factors: DEFAULT_SCALE_FACTORS.to_vec(),
        }
    }
}

impl LookupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::InvalidArgument("radius must be at least 1".into()));
        }
        if self.num_levels < 1 {
            return Err(Error::InvalidArgument("need at least one pyramid level".into()));
        }
        if self.scale_factors.is_empty() {
            return Err(Error::InvalidArgument("scale factor list is empty".into()));
        }
        if self.scale_factors.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("scale factors must be positive".into()));
        }
        if self.scale_factors.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidArgument(
                "scale factors must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    /// Samples per pixel returned by pyramid lookup.
    pub fn pyramid_width(&self) -> usize {
        self.num_levels * (2 * self.radius + 1)
    }

    /// Samples per pixel returned by scale lookup.
    pub fn scale_width(&self) -> usize {
        3 * self.scale_factors.len()
    }

    /// Largest displacement, in quarter-resolution pixels, that pyramid
    /// lookup can probe away from the current estimate.
    pub fn pyramid_reach_quarter(&self) -> usize {
        (1 << (self.num_levels - 1)) * self.radius
    }

    /// Same reach expressed in full-resolution pixels.
    pub fn pyramid_reach_full(&self) -> usize {
        UPSAMPLE_FACTOR * self.pyramid_reach_quarter()
    }
}

/// Everything the recurrent engine needs besides weights and inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Fraction of the image width the initial disparity may span.
    pub eta: f64,
    /// Positive floor added at initialization and enforced after every update.
    pub eps: f64,
    pub su_iters: usize,
    pub total_iters: usize,
    pub lookup: LookupConfig,
    pub hidden_channels: usize,
    pub feature_channels: usize,
    pub context_channels: usize,
    pub corr_enc_channels: usize,
    pub disp_enc_channels: usize,
    /// Channels of the auxiliary feature path; 0 disables it.
    pub aux_channels: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            eps: 0.05,
            su_iters: 8,
            total_iters: 32,
            lookup: LookupConfig::default(),
            hidden_channels: 64,
            feature_channels: 64,
            context_channels: 64,
            corr_enc_channels: 64,
            disp_enc_channels: 16,
            aux_channels: 32,
        }
    }
}

impl EngineConfig {
    /// The shorter schedule used when the engine is run as it would be trained.
    pub fn training_schedule() -> Self {
        Self {
            total_iters: 18,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lookup.validate()?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument("eta must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        if self.su_iters > self.total_iters {
            return Err(Error::InvalidArgument(format!(
                "su_iters {} exceeds total_iters {}",
                self.su_iters, self.total_iters
            )));
        }
        for (name, v) in [
            ("hidden_channels", self.hidden_channels),
            ("feature_channels", self.feature_channels),
            ("context_channels", self.context_channels),
            ("corr_enc_channels", self.corr_enc_channels),
            ("disp_enc_channels", self.disp_enc_channels),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// A reduced-width configuration for tests and quick experiments.
    pub fn small() -> Self {
        Self {
            hidden_channels: 8,
            feature_channels: 8,
            context_channels: 8,
            corr_enc_channels: 8,
            disp_enc_channels: 4,
            aux_channels: 4,
            ..Self::default()
        }
    }
}
