//! Float formatting shared by every writer in the crate: 17 significant
//! digits, which round-trips any `f64` exactly.

use serde::Serializer;
use serde_json::value::RawValue;

/// Formats `v` with 17 significant digits in scientific notation.
/// Non-finite values are rendered as `nan`, `inf` or `-inf`.
pub fn f64_17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn raw(v: f64) -> Box<RawValue> {
    // JSON has no infinities; they become null.
    let text = if v.is_finite() {
        f64_17(v)
    } else {
        "null".to_string()
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

pub(crate) fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&raw(*v), s)
}

pub(crate) fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&v.map(raw), s)
}

pub(crate) fn ser_opt_vec_f64<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
    let raws: Option<Vec<Box<RawValue>>> = v.as_ref().map(|xs| xs.iter().map(|&x| raw(x)).collect());
    serde::Serialize::serialize(&raws, s)
}
