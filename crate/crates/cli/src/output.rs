//! Deterministic rendering: every float is rounded to 12 significant digits
//! before it is printed, in JSON and CSV alike.

use std::fmt::Write as _;

use delaymid::{MidDesign, RootSet, SensitivitySweep, Trajectory};
use serde::Serialize;
use serde_json::Value;

const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Same text as the JSON output: shortest round-trip digits, exponent
/// notation for very small or large magnitudes.
fn format_float(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}

fn round_value(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(rounded) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = rounded;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Rounds every numeric cell of a CSV table; text cells pass through.
fn round_csv(table: &str) -> String {
    let mut out = String::with_capacity(table.len());
    for line in table.lines() {
        let cells: Vec<String> = line
            .split(',')
            .map(|cell| match cell.parse::<f64>() {
                Ok(x) if !cell.chars().all(|c| c.is_ascii_digit() || c == '-') => format_float(round_sig(x)),
                _ => cell.to_string(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub struct Rendered {
    json: Value,
    csv: String,
}

impl Rendered {
    fn new(payload: &impl Serialize, csv: String) -> Self {
        let mut json = serde_json::to_value(payload).expect("results serialize");
        round_value(&mut json);
        Rendered {
            json,
            csv: round_csv(&csv),
        }
    }

    pub fn design(design: &MidDesign) -> Self {
        let mut csv = String::from("field,value\n");
        let qp = &design.qp;
        let _ = writeln!(csv, "mode,{}", mode_name(design));
        let _ = writeln!(csv, "n,{}", qp.n());
        let _ = writeln!(csv, "m,{}", qp.m());
        let _ = writeln!(csv, "tau,{:?}", qp.tau());
        let _ = writeln!(csv, "s0,{:?}", design.s0);
        let _ = writeln!(csv, "multiplicity,{}", design.multiplicity);
        for (k, a) in qp.a().iter().enumerate() {
            let _ = writeln!(csv, "a{k},{a:?}");
        }
        for (k, b) in qp.b().iter().enumerate() {
            let _ = writeln!(csv, "b{k},{b:?}");
        }
        for (i, c) in design.candidates.iter().enumerate() {
            let _ = writeln!(csv, "candidate{i},{c:?}");
        }
        Rendered::new(design, csv)
    }

    pub fn roots(set: &RootSet) -> Self {
        Rendered::new(set, set.to_csv())
    }

    pub fn trajectory(trajectory: &Trajectory) -> Self {
        Rendered::new(trajectory, trajectory.to_csv())
    }

    pub fn sweep(sweep: &SensitivitySweep) -> Self {
        Rendered::new(sweep, sweep.to_csv())
    }

    pub fn json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.json).expect("values serialize");
        text.push('\n');
        text
    }

    pub fn csv(&self) -> String {
        self.csv.clone()
    }
}

fn mode_name(design: &MidDesign) -> String {
    serde_json::to_value(design.mode)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Error envelope for a failed run. Core errors keep their own name and
/// details; anything else (unreadable files, bad JSON) is an `InputError`.
pub fn error_json(err: &anyhow::Error) -> String {
    let mut value = match err.downcast_ref::<delaymid::Error>() {
        Some(core) => serde_json::to_value(core.envelope()).expect("envelopes serialize"),
        None => serde_json::json!({
            "error_name": "InputError",
            "message": format!("{err:#}"),
            "details": {},
        }),
    };
    round_value(&mut value);
    value.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(round_sig(0.1353352832366127), 0.135335283237);
        assert_eq!(round_sig(-1234.56789012345678), -1234.56789012);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(1e-300 / 3.0), 3.33333333333e-301);
    }

    #[test]
    fn csv_keeps_integers_and_text() {
        let table = "k,tau,re\n-1,1.0,0.1353352832366127\nmode,classic,3\nim,-3.5339496460712e-17,0\n";
        assert_eq!(
            round_csv(table),
            "k,tau,re\n-1,1.0,0.135335283237\nmode,classic,3\nim,-3.53394964607e-17,0\n"
        );
    }
}
