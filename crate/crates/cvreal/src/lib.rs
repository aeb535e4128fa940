//! Entanglement detection for two-mode continuous-variable states through the
//! realignment of their correlation kernels.
//!
//! The crate covers Gaussian states, photon subtracted and added states,
//! their dynamics under damping into a thermal environment, convex mixtures,
//! and a brute-force Fock-space oracle that cross-checks every closed form by
//! explicit truncated density matrices and singular value decompositions.

pub mod batch;
pub mod ccm;
pub mod channel;
pub mod error;
pub mod fock;
pub mod moments;
pub mod photon;
pub mod realign;
pub mod report;
pub mod sigma;

pub use error::{CvError, Result};
