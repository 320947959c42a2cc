//! Simulation and restoration toolkit for wavefront-coded anti-dazzle imaging.
//!
//! The crate covers the non-learned parts of the pipeline:
//!
//! * [`optics`]: pupil fields, the five half-ring phase mask and PSF synthesis
//!   by Fraunhofer propagation.
//! * [`forward`]: irradiance formation for a background scene and an injected laser.
//! * [`sensor`]: photon statistics, electron conversion, noise and digitisation.
//! * [`synthesis`]: reproducible dataset sampling and degradation presets.
//! * [`restore`]: Wiener deconvolution and regulariser fitting.
//! * [`metrics`]: MSE, PSNR, SSIM and MS-SSIM.
//! * [`calib`]: read-noise calibration from dark frames and histogram comparison.
//!
//! All randomness is keyed by explicit seeds (see [`rng`]) so every result is
//! independent of thread count.

pub mod adpf;
pub mod bessel;
pub mod calib;
pub mod error;
pub mod fft;
pub mod forward;
pub mod imageio;
pub mod metrics;
pub mod optics;
pub mod restore;
pub mod rng;
pub mod sensor;
pub mod synthesis;

pub use error::{Error, ErrorKind, Result};
