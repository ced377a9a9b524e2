//! Checks shared by the core test targets and the acceptance target.
#![allow(dead_code)]

pub mod metrics;
pub mod monotone;
pub mod oracle;
pub mod planted;
