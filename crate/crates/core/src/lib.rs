//! Dual-denoising multimodal aspect-based sentiment analysis at desk scale.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, a reverse-mode tape and finite-difference checks.
//! - [`datamodel`]: samples, the output-index codec and JSON-lines files.
//! - [`hcd`]: similarity/loss/composite difficulties and the competence schedule.
//! - [`aed`]: aspect-guided attention, affective enhancement, the association
//!   matrix and graph convolution.
//! - [`seqmodel`]: encoder, fusion, pointer decoder, loss, greedy prediction and metrics.
//! - [`synth`]: seeded synthetic data with planted signal and controllable noise.
//! - [`pipeline`]: curriculum training, the alpha ablation and run artifacts.

pub mod aed;
pub mod datamodel;
pub mod hcd;
pub mod numerics;
pub mod pipeline;
pub mod seqmodel;
pub mod synth;
