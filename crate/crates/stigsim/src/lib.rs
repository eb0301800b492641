//! File formats, artifact emission and the command implementations behind
//! the `stigsim` binary.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use commands::{cmd_compare, cmd_gen_config, cmd_run, cmd_verify, template_json, Verdict};
pub use error::{Error, Result};
pub use report::{metrics_csv_from_trace, DigestFile, Divergence};
