//! Deterministic JSON and CSV rendering.
//!
//! Every float is written with 17 significant digits in scientific notation,
//! enough to round-trip an `f64` exactly.

use std::fmt::Write as _;

use serde_json::Value;

pub fn number(x: f64) -> String {
    if x == 0.0 {
        // one spelling for both zeros
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Pretty JSON with two-space indentation and fixed float formatting.
pub fn to_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                match n.as_f64() {
                    Some(x) if x.is_finite() => out.push_str(&number(x)),
                    _ => out.push_str("null"),
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|v| v.is_number()) {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, v, depth + 1);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, v) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, v, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, v, depth + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// One sampled row: `x, f(x), g*(x), f(x) - g*(x)`.
pub struct Row {
    pub x: f64,
    pub f: f64,
    pub g: f64,
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from("x,f(x),g*(x),residual\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", number(r.x), number(r.f), number(r.g), number(r.f - r.g));
    }
    out
}
