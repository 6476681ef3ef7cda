pub mod argue;
pub mod plan;
pub mod reproduce;
pub mod simulate;

use crate::error::{CliError, CliResult};

/// Parses `a,b` into two reals.
pub(crate) fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts[..] else {
        return Err(format!("expected two comma-separated numbers, got `{s}`"));
    };
    let p = |x: &str| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok([p(a)?, p(b)?])
}

pub(crate) fn required<T>(value: Option<T>, what: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::usage(format!("missing {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        assert_eq!(parse_pair("0.08,0.02"), Ok([0.08, 0.02]));
        assert_eq!(parse_pair(" 0.5 , 0.5"), Ok([0.5, 0.5]));
        assert!(parse_pair("0.1").is_err());
        assert!(parse_pair("0.1,0.2,0.3").is_err());
        assert!(parse_pair("a,b").is_err());
    }
}
