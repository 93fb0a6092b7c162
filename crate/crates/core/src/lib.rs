// SPDX-License-Identifier: Apache-2.0

//! Operational volume allocation for drayage procurement as a multistage
//! stochastic transportation problem, trained with stochastic dual dynamic
//! programming.

pub mod error;
pub mod eval;
pub mod instancegen;
pub mod lp;
pub mod model;
pub mod scenario;
pub mod sddp;
pub mod stage;

pub use error::{Error, Result};
pub use model::*;
