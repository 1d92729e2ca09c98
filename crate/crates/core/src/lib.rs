//! Policy-gradient control of a two-strain optogenetic chemostat.
//!
//! [`dynamics`] integrates the plant, [`returns`] scores episodes, [`trainer`]
//! runs REINFORCE over a [`policy`], and [`harness`] expands an
//! [`config::ExperimentConfig`] into scenarios and writes their artifacts.

pub mod checkpoint;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod harness;
pub mod metrics;
pub mod policy;
pub mod references;
pub mod returns;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/returns.md")]
    mod returns {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
