//! File formats, parallel execution, the synthetic scene generator and the
//! command pipeline behind the `lcfuse` binary.

pub mod cli;
pub mod config;
pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod synth;
