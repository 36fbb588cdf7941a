//! File formats and experiment artifacts for the cube restoration library:
//! the native cube container, PNG band export, metrics tables, and solver
//! run reports. The `hsirestore` binary in this crate ties them into a
//! batch CLI.

pub mod io;
pub mod report;
