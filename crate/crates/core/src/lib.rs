//! Thermal-zone modelling toolkit: an RC-network plant simulator,
//! output-error identification with linear and bilinear regressors,
//! excitation checks, and a receding-horizon controller for the radiator
//! loop.
//!
//! ```
//! use thermal_nrm::regressors::{regressor_length, RegressorSpec, Structure};
//!
//! let spec = RegressorSpec::new(Structure::NrmMi, 1).unwrap();
//! assert_eq!(regressor_length(&spec), 26);
//! ```

pub mod config;
pub mod dataset;
pub mod disturbance;
pub mod error;
pub mod excitation;
pub mod experiment;
pub mod identify;
pub mod mpc;
pub mod regressors;
pub mod sim;
pub mod thermal;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/plant.md")]
    mod plant {}
    #[doc = include_str!("../../../book/src/regressors.md")]
    mod regressors {}
    #[doc = include_str!("../../../book/src/identification.md")]
    mod identification {}
    #[doc = include_str!("../../../book/src/excitation.md")]
    mod excitation {}
    #[doc = include_str!("../../../book/src/mpc.md")]
    mod mpc {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
