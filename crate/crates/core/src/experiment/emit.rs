use std::path::Path;

use serde_json::{Map, Number, Value};

use super::{ExperimentReport, OutputFormat};
use crate::error::{Error, Result};
use crate::verify::CriteriaReport;

pub const SCHEMA_VERSION: &str = "cvshape-report/1";

const SIG_DIGITS: usize = 6;

/// Rounds to six significant digits; `-0` becomes `0`.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64"));
            *v = Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn csv_rows(stage: &str, report: &CriteriaReport, w: &mut csv::Writer<Vec<u8>>) -> Result<()> {
    for c in &report.nullifiers {
        w.write_record([
            stage.to_string(),
            c.form.clone(),
            round_sig(c.variance).to_string(),
            round_sig(c.bound).to_string(),
            c.pass.to_string(),
            round_sig(c.db).to_string(),
        ])?;
    }
    Ok(())
}

/// Report text: pretty JSON with keys in sorted order, or one CSV row per nullifier.
pub fn render(report: &ExperimentReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut v = serde_json::to_value(report)?;
            round_floats(&mut v);
            let mut s = serde_json::to_string_pretty(&v)?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["stage", "form", "variance", "bound", "pass", "db"])?;
            csv_rows("initial", &report.initial, &mut w)?;
            csv_rows("final", &report.final_report, &mut w)?;
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
        }
    }
}

pub fn emit(report: &ExperimentReport, format: OutputFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render(report, format)?)?;
    Ok(())
}

fn schema_err(msg: impl Into<String>) -> Error {
    Error::Config(format!("report schema: {}", msg.into()))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema_err(format!("{ctx} is missing `{key}`")))
}

fn object<'a>(v: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema_err(format!("{ctx} must be an object")))
}

fn array<'a>(v: &'a Value, ctx: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema_err(format!("{ctx} must be an array")))
}

fn expect_kind(obj: &Map<String, Value>, key: &str, ctx: &str, ok: fn(&Value) -> bool, kind: &str) -> Result<()> {
    if ok(field(obj, key, ctx)?) {
        Ok(())
    } else {
        Err(schema_err(format!("{ctx}.{key} must be {kind}")))
    }
}

fn check_criteria(v: &Value, ctx: &str) -> Result<()> {
    let obj = object(v, ctx)?;
    for (k, item) in array(field(obj, "nullifiers", ctx)?, ctx)?.iter().enumerate() {
        let c = format!("{ctx}.nullifiers[{k}]");
        let o = object(item, &c)?;
        expect_kind(o, "form", &c, Value::is_string, "a string")?;
        for key in ["variance", "bound", "db"] {
            expect_kind(o, key, &c, Value::is_number, "a number")?;
        }
        expect_kind(o, "pass", &c, Value::is_boolean, "a boolean")?;
    }
    for (k, item) in array(field(obj, "pairwise", ctx)?, ctx)?.iter().enumerate() {
        let c = format!("{ctx}.pairwise[{k}]");
        let o = object(item, &c)?;
        expect_kind(o, "nodes", &c, Value::is_array, "an array")?;
        expect_kind(o, "sum_variance", &c, Value::is_number, "a number")?;
        expect_kind(o, "pass", &c, Value::is_boolean, "a boolean")?;
    }
    array(field(obj, "residual_squeezing", ctx)?, ctx)?;
    expect_kind(obj, "reference_convention", ctx, Value::is_string, "a string")
}

/// Structural check of an emitted JSON report.
pub fn validate_report_json(text: &str) -> Result<()> {
    let v: Value = serde_json::from_str(text)?;
    let root = object(&v, "report")?;
    match field(root, "schema_version", "report")?.as_str() {
        Some(SCHEMA_VERSION) => {}
        other => return Err(schema_err(format!("unsupported schema_version {other:?}"))),
    }
    object(field(root, "config", "report")?, "config")?;
    check_criteria(field(root, "initial", "report")?, "initial")?;
    check_criteria(field(root, "final", "report")?, "final")?;
    let shaping = object(field(root, "shaping", "report")?, "shaping")?;
    array(field(shaping, "transcript", "shaping")?, "shaping.transcript")?;
    array(field(root, "published", "report")?, "published")?;
    expect_kind(root, "all_pass", "report", Value::is_boolean, "a boolean")?;
    for key in ["monte_carlo", "ring_route", "calibration", "wall_time_s"] {
        field(root, key, "report")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run, ExperimentConfig, Scenario};

    #[test]
    fn six_significant_digits() {
        assert_eq!(round_sig(0.158_113_883_008), 0.158114);
        assert_eq!(round_sig(-3.010_299_956), -3.0103);
        assert_eq!(round_sig(123_456_789.0), 123_457_000.0);
        assert_eq!(round_sig(-0.0), 0.0);
        assert_eq!(round_sig(1e-300), 1e-300);
    }

    #[test]
    fn json_round_trips_through_the_validator() {
        let r = run(&ExperimentConfig { trials: 200, ..Default::default() }).unwrap();
        let text = render(&r, OutputFormat::Json).unwrap();
        validate_report_json(&text).unwrap();
        assert!(text.contains("\"schema_version\": \"cvshape-report/1\""));
        let broken = text.replace("\"all_pass\"", "\"all_passes\"");
        assert!(validate_report_json(&broken).is_err());
        assert!(validate_report_json("[]").is_err());
    }

    #[test]
    fn csv_has_one_row_per_nullifier() {
        let r = run(&ExperimentConfig { scenario: Scenario::ShortenWire, ..Default::default() }).unwrap();
        let text = render(&r, OutputFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "stage,form,variance,bound,pass,db");
        assert_eq!(lines.len(), 1 + 4 + 2);
        assert!(lines[5].starts_with("final,p1 + x4,"));
    }
}
