//! The recurrent disparity engine.
//!
//! Disparity starts from a depth-derived guess, is rescaled multiplicatively
//! for the first `su_iters` steps (scale update, driven by scale lookup) and
//! then corrected additively (delta update, driven by pyramid lookup). Every
//! step is upsampled to full resolution.

mod engine;
mod gru;
mod init;
mod oracle;
mod step;
mod upsample;

pub use engine::{run_inference, Engine, InferenceOutput, Mode, StepRecord};
pub use gru::{gru_step, gru_trace, GruParams, GruTrace};
pub use init::init_disparity;
pub use oracle::{greedy_delta_step, greedy_scale_step};
pub use step::{delta_update_step, scale_update_step, DisparityState, Phase, StepOutcome};
pub use upsample::{convex_upsample, upsample_nearest};
