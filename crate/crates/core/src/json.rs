//! JSON encodings shared by the CLI, the corpus and the Python bindings.
//!
//! A complex scalar is `[re, im]`, a matrix is an array of rows, and a
//! rational is `{"num": n, "den": d}` with `d > 0`. Plain numbers are
//! accepted wherever a complex scalar is expected.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{C64, CMatrix, Rational};

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), message: message.into() }
}

/// Rounds away negative zero so reports are byte-stable.
fn clean(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

pub fn complex_to_json(z: C64) -> Value {
    json!([clean(z.re), clean(z.im)])
}

pub fn complex_from_json(v: &Value, path: &str) -> Result<C64> {
    match v {
        Value::Number(n) => Ok(C64::new(n.as_f64().ok_or_else(|| schema(path, "not a finite number"))?, 0.0)),
        Value::Array(parts) if parts.len() == 2 => {
            let re = parts[0].as_f64().ok_or_else(|| schema(&format!("{path}/0"), "expected a number"))?;
            let im = parts[1].as_f64().ok_or_else(|| schema(&format!("{path}/1"), "expected a number"))?;
            if !re.is_finite() || !im.is_finite() {
                return Err(schema(path, "complex entries must be finite"));
            }
            Ok(C64::new(re, im))
        }
        _ => Err(schema(path, "expected a complex scalar [re, im] or a number")),
    }
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn matrix_from_json(v: &Value, path: &str) -> Result<CMatrix> {
    let rows = v.as_array().ok_or_else(|| schema(path, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(schema(path, "matrix has no rows"));
    }
    let mut data: Vec<Vec<C64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}/{i}");
        let entries = row.as_array().ok_or_else(|| schema(&rp, "expected a row array"))?;
        let parsed = entries
            .iter()
            .enumerate()
            .map(|(j, e)| complex_from_json(e, &format!("{rp}/{j}")))
            .collect::<Result<Vec<_>>>()?;
        data.push(parsed);
    }
    let ncols = data[0].len();
    if ncols == 0 || data.iter().any(|r| r.len() != ncols) {
        return Err(schema(path, "rows must be non-empty and of equal length"));
    }
    Ok(CMatrix::from_fn(data.len(), ncols, |i, j| data[i][j]))
}

pub fn rational_to_json(q: &Rational) -> Value {
    json!({"num": q.numer(), "den": q.denom()})
}

pub fn rational_from_json(v: &Value, path: &str) -> Result<Rational> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(Rational::from_integer)
            .ok_or_else(|| schema(path, "rational given as a bare number must be an integer")),
        Value::Object(map) => {
            if let Some(k) = map.keys().find(|k| *k != "num" && *k != "den") {
                return Err(schema(&format!("{path}/{k}"), "unknown field"));
            }
            let num = map
                .get("num")
                .and_then(Value::as_i64)
                .ok_or_else(|| schema(&format!("{path}/num"), "expected an integer"))?;
            let den = map
                .get("den")
                .and_then(Value::as_i64)
                .ok_or_else(|| schema(&format!("{path}/den"), "expected an integer"))?;
            if den <= 0 {
                return Err(schema(&format!("{path}/den"), "denominator must be positive"));
            }
            Ok(Rational::new(num, den))
        }
        _ => Err(schema(path, "expected {\"num\", \"den\"} or an integer")),
    }
}

/// Rational rendered as a float for human-facing summaries.
pub fn rational_to_f64(q: &Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Floats are rounded to 12 significant digits in reports so that bit-level
/// noise in the last place does not leak into the output.
pub fn stable_f64(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    if x == 0.0 {
        return json!(0.0);
    }
    let digits = 12 - 1 - x.abs().log10().floor() as i32;
    let scaled = if (-300..300).contains(&digits) {
        let p = 10f64.powi(digits);
        (x * p).round() / p
    } else {
        x
    };
    json!(clean(scaled))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let m = CMatrix::from_fn(2, 3, |i, j| C64::new(i as f64, -(j as f64)));
        let back = matrix_from_json(&matrix_to_json(&m), "$").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn real_entries_are_accepted() {
        let m = matrix_from_json(&json!([[1, 2.5], [[0, 1], -1]]), "$").unwrap();
        assert_eq!(m[(0, 1)], C64::new(2.5, 0.0));
        assert_eq!(m[(1, 0)], C64::new(0.0, 1.0));
    }

    #[test]
    fn errors_carry_paths() {
        let err = matrix_from_json(&json!([[1, 2], [3, "x"]]), "$/images/a1").unwrap_err();
        assert!(err.to_string().contains("$/images/a1/1/1"), "{err}");
        let err = matrix_from_json(&json!([[1, 2], [3]]), "$").unwrap_err();
        assert!(err.to_string().contains("equal length"));
    }

    #[test]
    fn rationals() {
        let q = rational_from_json(&json!({"num": 6, "den": 4}), "$").unwrap();
        assert_eq!(q, Rational::new(3, 2));
        assert_eq!(rational_to_json(&q), json!({"num": 3, "den": 2}));
        assert_eq!(rational_from_json(&json!(-2), "$").unwrap(), Rational::from_integer(-2));
        assert!(rational_from_json(&json!({"num": 1, "den": 0}), "$").is_err());
        assert!(rational_from_json(&json!({"num": 1, "den": 2, "x": 1}), "$").is_err());
        assert_eq!(rational_to_f64(&Rational::new(-1, 4)), -0.25);
    }

    #[test]
    fn stable_float_rounding() {
        assert_eq!(stable_f64(0.1 + 0.2), json!(0.3));
        assert_eq!(stable_f64(-0.0), json!(0.0));
        assert_eq!(stable_f64(f64::NAN), Value::Null);
    }
}
