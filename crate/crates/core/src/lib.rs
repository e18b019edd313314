//! Time-dependent ROC analysis for survival outcomes.
//!
//! Cumulative/dynamic and incident/dynamic accuracy of a marker for an event
//! time, with counting-process cohorts for markers that change over follow-up.

pub mod case_study;
pub mod cd_roc;
pub mod competing;
pub mod counting;
pub mod cox;
pub mod data;
pub mod error;
pub mod id_roc;
pub mod io;
pub mod km;
pub mod resampling;
pub mod roc;
pub mod series;
pub mod simulate;

pub use error::{Error, Result};
