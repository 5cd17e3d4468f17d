//! Merges CSV outputs and fits the two scaling laws they can carry.

use std::path::PathBuf;

use mtqed::fit::power_law;
use mtqed::mtlab::num;
use serde_json::{json, Map, Value};

use crate::CliError;

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(path: &str, text: &str) -> Result<Table, CliError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Config(format!("{path}: empty file")))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(CliError::Config(format!(
                    "{path}: row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    fn column(&self, path: &str, name: &str) -> Result<Vec<f64>, CliError> {
        let idx = self.header.iter().position(|h| h == name).expect("checked by caller");
        self.rows
            .iter()
            .map(|r| {
                r[idx]
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("{path}: `{name}` value `{}` is not a number", r[idx])))
            })
            .collect()
    }

    fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }
}

struct Law {
    id: &'static str,
    x: &'static str,
    y: &'static str,
    expected: f64,
    tolerance: f64,
}

const LAWS: [Law; 2] = [
    Law {
        id: "splitting_vs_N",
        x: "N",
        y: "splitting",
        expected: 0.5,
        tolerance: 0.01,
    },
    Law {
        id: "rate_vs_D",
        x: "D",
        y: "rate_fit",
        expected: 2.0,
        tolerance: 0.1,
    },
];

const RATIO_WINDOW: (f64, f64) = (0.8, 1.25);

pub fn report(inputs: &[PathBuf]) -> Result<(String, bool), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config("report needs at least one input file".into()));
    }
    let mut data: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = vec![Default::default(); LAWS.len()];
    let mut names = Vec::new();
    for p in inputs {
        let path = p.display().to_string();
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
        let table = Table::parse(&path, &text)?;
        let k = LAWS
            .iter()
            .position(|l| table.has(l.x) && table.has(l.y))
            .ok_or_else(|| CliError::Config(format!("{path}: unrecognised columns [{}]", table.header.join(","))))?;
        let law = &LAWS[k];
        data[k].0.extend(table.column(&path, law.x)?);
        data[k].1.extend(table.column(&path, law.y)?);
        if table.has("ratio") {
            data[k].2.extend(table.column(&path, "ratio")?);
        }
        names.push(Value::String(path));
    }

    let mut fits = Map::new();
    let mut all_pass = true;
    for (law, (xs, ys, ratios)) in LAWS.iter().zip(&data) {
        if xs.is_empty() {
            continue;
        }
        // drop points without a scale, e.g. D = 0
        let (x, y): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| **x > 0.0 && **y > 0.0)
            .map(|(a, b)| (*a, *b))
            .unzip();
        let fit = power_law(&x, &y)?;
        let (lo, hi) = fit.slope_ci95();
        let pass = (fit.slope - law.expected).abs() <= law.tolerance;
        let mut rec = json!({
            "x": law.x,
            "y": law.y,
            "points": fit.points,
            "exponent": num(fit.slope),
            "stderr": num(fit.slope_stderr),
            "ci95": [num(lo), num(hi)],
            "expected": num(law.expected),
            "tolerance": num(law.tolerance),
            "pass": pass,
        });
        let mut law_pass = pass;
        let finite: Vec<f64> = ratios.iter().copied().filter(|r| r.is_finite()).collect();
        if !finite.is_empty() {
            let (rmin, rmax) = finite
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
            let ok = rmin >= RATIO_WINDOW.0 && rmax <= RATIO_WINDOW.1;
            rec["ratio_range"] = json!([num(rmin), num(rmax)]);
            rec["ratio_window"] = json!([num(RATIO_WINDOW.0), num(RATIO_WINDOW.1)]);
            rec["ratio_pass"] = json!(ok);
            law_pass &= ok;
        }
        all_pass &= law_pass;
        fits.insert(law.id.to_string(), rec);
    }
    let doc = json!({ "inputs": names, "fits": fits, "pass": all_pass });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serialises");
    s.push('\n');
    Ok((s, all_pass))
}
