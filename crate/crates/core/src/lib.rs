//! Recurrent stereo matching initialized from relative depth.
//!
//! The pipeline encodes a rectified pair at quarter resolution, builds an
//! all-pairs correlation volume per scanline, initializes disparity from a
//! relative inverse-depth map, refines it with multiplicative scale updates
//! and then additive delta updates, and upsamples every iterate to full
//! resolution.
//!
//! ```
//! use scalestereo::{init_disparity, DepthEstimate, Provenance, Tensor};
//!
//! let z = Tensor::full(&[2, 8], 3.0);
//! let d0 = init_disparity(&DepthEstimate::new(z, Provenance::ExternalFile)?, 8, 0.5, 0.05);
//! assert!((d0.at2(0, 0) - 4.05).abs() < 1e-12);
//! # Ok::<(), scalestereo::Error>(())
//! ```

pub mod cli;
pub mod config;
pub mod correlation;
pub mod dataio;
pub mod depth;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod mask;
pub mod model;
pub mod scene;
pub mod tensor;
pub mod updater;

pub use config::{EngineConfig, LookupConfig, DEFAULT_SCALE_FACTORS, UPSAMPLE_FACTOR};
pub use correlation::{
    build_correlation, build_pyramid, precompute_lookup_indexes, pyramid_lookup, scale_lookup, CorrelationPyramid,
    LookupPlan,
};
pub use depth::{perturb_depth, DepthEstimate, PerturbSpec, Provenance, Rect, Region};
pub use encoders::{encode_context, encode_matching, patch_features, ContextSet, FeaturePair};
pub use error::{Error, Result};
pub use eval::{affine_align, compute_metrics, ratio_map_std, sequence_loss, AffineFit, MetricReport};
pub use mask::Mask;
pub use model::seeded_weights;
pub use scene::{quarter_res_truth, synth_scene, Scene, SceneSpec};
pub use tensor::Tensor;
pub use updater::{
    convex_upsample, delta_update_step, gru_step, init_disparity, run_inference, scale_update_step, DisparityState,
    Engine, InferenceOutput, Mode, Phase,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/scale.md")]
    mod scale {}
    #[doc = include_str!("../../../book/src/recurrent.md")]
    mod recurrent {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
