//! NOMA-aided joint radar and multicast-unicast beamforming.
//!
//! The crate designs transmit beamformers that serve radar-centric and
//! communication-centric user pairs while keeping the transmit beam pattern
//! close to a radar-only reference. Beamformers are found with rank-one
//! penalty methods over convex subproblems solved by [`radcom_conic`].

mod error;
mod lift;
mod penalty;

pub mod baselines;
pub mod bb_noma;
pub mod beampattern;
pub mod cb_noma;
pub mod channel;
pub mod experiments;
pub mod hermitian;
pub mod sca;

pub use error::Error;
pub use penalty::{spectral_linearization, OuterLog, PenaltyConfig, SpectralLinearization};
