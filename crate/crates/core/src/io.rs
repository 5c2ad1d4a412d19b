//! Text serialization helpers shared by the model and experiment files and
//! the run outputs.

use crate::error::Error;

/// Converts a TOML decode error into a parse error carrying line and field.
pub(crate) fn toml_error(text: &str, err: toml::de::Error) -> Error {
    let field = err.message().split('`').nth(1).unwrap_or("").to_string();
    let start = err.span().map_or(0, |s| s.start.min(text.len()));
    let mut line = text[..start].matches('\n').count() + 1;
    // nested tables report the span of the whole table; find the key itself
    if !field.is_empty() {
        let key_line = text.lines().enumerate().skip(line - 1).find(|(_, l)| {
            l.trim_start()
                .strip_prefix(field.as_str())
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        });
        if let Some((i, _)) = key_line {
            line = i + 1;
        }
    }
    Error::Parse {
        line,
        field,
        message: err.message().to_string(),
    }
}

/// Fixed 17-significant-digit float rendering used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
