//! Command-line harness: scenario files, run directories, reports and the
//! scripted experiments built on the `blowscope` library.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod exact;
pub mod lemma;
pub mod rundir;
pub mod scenario;
