//! Experiment runner behind the `ratpoints` binary.

pub mod manifest;
pub mod run;
pub mod selftest;
