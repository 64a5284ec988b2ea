//! Configuration, file formats and subcommands behind the `tsmcts` binary.

pub mod commands;
pub mod config;
pub mod envfile;

pub use config::ConfigError;

/// Process exit status for an error: 2 for configuration problems, 1 for
/// anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let config = err.chain().any(|e| {
        e.downcast_ref::<ConfigError>().is_some()
            || matches!(
                e.downcast_ref::<tsmcts::Error>(),
                Some(tsmcts::Error::Config(_))
            )
    });
    if config {
        2
    } else {
        1
    }
}
