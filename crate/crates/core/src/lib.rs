//! Toolkit for set-based generative novel view synthesis.
//!
//! The crate is organised around the pieces a multi-view diffusion sampler
//! needs outside of the network itself:
//!
//! * [`geometry`]: pinhole cameras, per-pixel rays, Fourier ray encoding,
//!   canonicalization relative to a reference camera and fundamental matrices.
//! * [`plan`]: generation plans (ordered generate/condition stages), the
//!   builtin sampling strategies and generation-depth analysis.
//! * [`diffusion`]: DDPM schedule and reverse stepping, set sampling with
//!   per-view time conditioning, plan execution and a Gaussian toy scene with
//!   an exact denoiser used as an oracle.
//! * [`setdenoiser`]: a small multistream cross-attention denoiser used to
//!   check permutation equivariance and rigid-motion invariance.
//! * [`consistency`]: the thresholded symmetric epipolar distance (TSED).
//! * [`experiment`]: the depth/degradation experiment driver behind the CLI.

pub mod consistency;
pub mod diffusion;
pub mod experiment;
pub mod geometry;
pub mod plan;
pub mod setdenoiser;

mod id;

pub use id::ViewId;
