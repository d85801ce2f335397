//! Operator-valued free probability over finite-dimensional matrix algebras.
//!
//! * [`partition`]: non-crossing partitions and their nesting forests.
//! * [`algebra`]: matrix models of `D ⊂ B ⊂ M` with conditional expectations.
//! * [`series`] and [`transform`]: `B`-valued moment and cumulant series and
//!   the moment-cumulant transform over non-crossing bracketings.
//! * [`canonical`]: the formal-word model realising any cumulant series.
//! * [`freeness`]: the factorisation criterion for freeness with
//!   amalgamation and the checks built around it.
//! * [`band`]: Gaussian band matrices with a variance profile.

pub mod algebra;
pub mod band;
pub mod canonical;
pub mod cli;
pub mod error;
pub mod freeness;
pub mod io;
pub mod partition;
pub mod series;
pub mod transform;

pub use error::{Error, Result};
