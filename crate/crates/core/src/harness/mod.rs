//! Experiment configuration, run dispatch, figure recipes and the
//! verification suites behind the `pd-flow` command line.

pub mod config;
pub mod csvout;
pub mod figures;
pub mod run;
pub mod verify;
