//! Field-wise comparison of two run reports, for golden-file regression.
//!
//! Reports of the same experiment are walked structurally; numeric leaves
//! compare under a relative threshold, everything else exactly.  Reports of
//! different experiments refuse to compare.

use std::fmt;
use std::path::Path;

use serde_json::Value;

use crate::RunnerError;

/// One leaf where the two reports disagree.
#[derive(Debug, Clone)]
pub struct FieldDiff {
    /// Dotted path of the leaf, e.g. `criteria.2.value`.
    pub path: String,
    pub left: String,
    pub right: String,
}

impl fmt::Display for FieldDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} != {}", self.path, self.left, self.right)
    }
}

/// Compare two report files field by field.
///
/// Numeric leaves are equal when `|a - b| <= rel_tol * max(|a|, |b|)`;
/// strings, booleans and nulls must match exactly.  An empty result means
/// the reports agree everywhere.
pub fn report_diff(
    left: &Path,
    right: &Path,
    rel_tol: f64,
) -> Result<Vec<FieldDiff>, RunnerError> {
    let a = load(left)?;
    let b = load(right)?;
    let experiment = |v: &Value, path: &Path| -> Result<String, RunnerError> {
        v.get("experiment")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                RunnerError::SchemaMismatch(format!(
                    "{} carries no experiment field",
                    path.display()
                ))
            })
    };
    let ea = experiment(&a, left)?;
    let eb = experiment(&b, right)?;
    if ea != eb {
        return Err(RunnerError::SchemaMismatch(format!(
            "cannot compare a {ea} report against a {eb} report"
        )));
    }
    let mut differences = Vec::new();
    walk("", &a, &b, rel_tol, &mut differences);
    Ok(differences)
}

fn load(path: &Path) -> Result<Value, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn push_diff(out: &mut Vec<FieldDiff>, path: &str, a: &Value, b: &Value) {
    out.push(FieldDiff {
        path: path.to_string(),
        left: a.to_string(),
        right: b.to_string(),
    });
}

fn numbers_match(a: f64, b: f64, rel_tol: f64) -> bool {
    a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

fn walk(path: &str, a: &Value, b: &Value, rel_tol: f64, out: &mut Vec<FieldDiff>) {
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            let mut keys: Vec<&String> = ma.keys().chain(mb.keys()).collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                let child = join(path, key);
                match (ma.get(key), mb.get(key)) {
                    (Some(va), Some(vb)) => walk(&child, va, vb, rel_tol, out),
                    (va, vb) => push_diff(
                        out,
                        &child,
                        va.unwrap_or(&Value::Null),
                        vb.unwrap_or(&Value::Null),
                    ),
                }
            }
        }
        (Value::Array(la), Value::Array(lb)) => {
            if la.len() != lb.len() {
                push_diff(out, &join(path, "length"), a, b);
                return;
            }
            for (index, (va, vb)) in la.iter().zip(lb).enumerate() {
                walk(&join(path, &index.to_string()), va, vb, rel_tol, out);
            }
        }
        (Value::Number(na), Value::Number(nb)) => {
            let (fa, fb) = (na.as_f64(), nb.as_f64());
            let equal = match (fa, fb) {
                (Some(fa), Some(fb)) => numbers_match(fa, fb, rel_tol),
                _ => na == nb,
            };
            if !equal {
                push_diff(out, path, a, b);
            }
        }
        _ => {
            if a != b {
                push_diff(out, path, a, b);
            }
        }
    }
}
