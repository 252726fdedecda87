//! Configuration-driven sweeps of the approximation factor, bound fitting and
//! reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod fit;
pub mod report;
pub mod sweep;
