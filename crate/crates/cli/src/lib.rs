//! Batch experiments for the `mnac` binary: config files, CSV sweeps,
//! capacity reports and SVG figures.

pub mod config;
mod error;
pub mod format;
pub mod io;
pub mod plot;
pub mod report;
pub mod sweep;
pub mod table;

pub use error::CliError;

/// Worker count from `MNAC_THREADS`; `None` (or 0) leaves rayon's default.
pub fn thread_limit(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::Config(format!(
                "MNAC_THREADS must be a count, got `{v}`"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::thread_limit;

    #[test]
    fn thread_limit_parsing() {
        assert_eq!(thread_limit(None).unwrap(), None);
        assert_eq!(thread_limit(Some("0")).unwrap(), None);
        assert_eq!(thread_limit(Some("4")).unwrap(), Some(4));
        assert!(thread_limit(Some("four")).is_err());
    }
}
