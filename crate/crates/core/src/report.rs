//! Small formatting helpers shared by the JSON and CSV writers.

use serde::Serializer;

/// Serializes finite floats as numbers and non-finite ones as the strings
/// `"inf"`, `"-inf"` or `"nan"` (JSON has no literal for them).
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&fmt_f64(*v))
    }
}

pub fn serialize_opt_extended<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_extended(x, s),
        None => s.serialize_none(),
    }
}

/// Shortest round-trip decimal, locale independent.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
