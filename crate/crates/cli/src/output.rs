use std::fmt;
use std::fs;
use std::path::Path;

use microlens::OpticsError;
use serde::Serialize;
use serde_json::Value;

/// Significant digits for every float in machine output.
pub const SIG_DIGITS: usize = 9;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<OpticsError> for CliError {
    fn from(e: OpticsError) -> Self {
        if e.is_input_error() {
            Self::input(e.to_string())
        } else {
            Self::numeric(e.to_string())
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::input(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest text for `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r.is_finite() {
        serde_json::Number::from_f64(r).map_or_else(|| r.to_string(), |n| n.to_string())
    } else {
        r.to_string()
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::numeric(format!("serialize: {e}")))?;
    round_value(&mut v);
    serde_json::to_string_pretty(&v).map_err(|e| CliError::numeric(format!("serialize: {e}")))
}

pub fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", to_json(value)?);
    Ok(())
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
