pub mod csvio;
pub mod diffnet;
pub mod error;
pub mod eval;
pub mod heat;
pub mod multifidelity;
pub mod pinn;
pub mod rng;

pub use error::{Error, Result};

/// Guide chapters, compiled as doctests so their examples keep working.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/jets.md")]
    mod jets {}
    #[doc = include_str!("../../../book/src/heat-oracle.md")]
    mod heat_oracle {}
    #[doc = include_str!("../../../book/src/pinn-loss.md")]
    mod pinn_loss {}
    #[doc = include_str!("../../../book/src/multi-fidelity.md")]
    mod multi_fidelity {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
