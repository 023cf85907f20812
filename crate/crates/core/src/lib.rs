//! Over-the-air equalization with reconfigurable intelligent surfaces.
//!
//! A surface of `M` passive elements sits between a transmitter and a
//! receiver whose links are both Rayleigh multipath. Aligning every
//! element's phase to the first path makes that tap add coherently while the
//! later taps add with random phases, so intersymbol interference fades as
//! `M` grows. The crate provides
//!
//! - [`scenario`]: configuration, path loss and per-tap variances,
//! - [`channel`] and [`ris`]: channel draws, effective taps and phase control,
//! - [`linksim`]: PSK link simulation, SINR and BER,
//! - [`isiprob`]: analytic and simulated ISI-elimination probability,
//! - [`septheory`]: gamma-fitted SINR and MGF-based error probability,
//! - [`experiment`]: CSV experiment runners used by the `otaeq` binary.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod isiprob;
pub mod linksim;
pub mod montecarlo;
pub mod quad;
pub mod ris;
pub mod scenario;
pub mod septheory;

pub use error::{Error, Result};
pub use ris::PhaseMode;
pub use scenario::ScenarioConfig;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenario.md")]
    mod scenario {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/isi_probability.md")]
    mod isi_probability {}
    #[doc = include_str!("../../../book/src/link_simulation.md")]
    mod link_simulation {}
    #[doc = include_str!("../../../book/src/error_analysis.md")]
    mod error_analysis {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
