//! Hand-formatted JSON numbers.
//!
//! Numbers are written in exponent form with 17 significant digits, which
//! reproduces every finite `f64` exactly when parsed back.

use std::fmt::Write;

pub(crate) fn number(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn array(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24 + 2);
    s.push('[');
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        s.push_str(&number(*v));
    }
    s.push(']');
    s
}

pub(crate) fn string(v: &str) -> String {
    serde_json::to_string(v).expect("strings always serialize")
}

/// `"key": value` lines joined into an object body at the given indent.
pub(crate) fn object(entries: &[(String, String)], indent: usize) -> String {
    let pad = " ".repeat(indent + 2);
    let mut s = String::from("{\n");
    for (k, (key, value)) in entries.iter().enumerate() {
        let sep = if k + 1 == entries.len() { "" } else { "," };
        let _ = writeln!(s, "{pad}{}: {value}{sep}", string(key));
    }
    s.push_str(&" ".repeat(indent));
    s.push('}');
    s
}
