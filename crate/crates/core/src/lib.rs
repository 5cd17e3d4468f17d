//! Cavity QED toolkit for N two-level emitters coupled to a damped bosonic
//! mode, with decoherence laws, damped kink solitons and a dimension-checked
//! microtubule cavity estimate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoherence;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod mtlab;
pub mod ode;
pub mod par;
pub mod qspace;
pub mod soliton;
pub mod spectra;
pub mod units;

pub use error::{Error, Result};
