//! Structured records of verified estimates and their JSON/CSV forms.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// One measured value and the parameters it was measured at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub params: BTreeMap<String, f64>,
    pub value: f64,
}

impl Sample {
    pub fn new<'a>(params: impl IntoIterator<Item = (&'a str, f64)>, value: f64) -> Self {
        Self {
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            value,
        }
    }
}

/// Rule deciding `passed` from the samples, fit and tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Every sample value is at most the tolerance.
    MaxAtMost,
    /// Fitted exponent is at most the tolerance (used as a threshold), and
    /// the bound constant, if recorded, is finite.
    ExponentAtMost,
    /// `|fitted exponent - target| <= tolerance`.
    ExponentNear { target: f64 },
    /// Each value is at most the previous one times `1 + tolerance`.
    NonIncreasing,
    /// Each value is strictly below the previous one.
    StrictlyDecreasing,
    /// `max/min` of the values is below the tolerance.
    RatioBelow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub samples: Vec<Sample>,
    pub fitted_exponent: Option<f64>,
    pub bound_constant: Option<f64>,
    pub passed: bool,
    #[serde(rename = "tolerance")]
    pub tolerance_used: f64,
    pub rule: Rule,
}

impl EstimateReport {
    pub fn new(
        name: impl Into<String>,
        samples: Vec<Sample>,
        fitted_exponent: Option<f64>,
        bound_constant: Option<f64>,
        rule: Rule,
        tolerance: f64,
    ) -> Self {
        let mut report = Self {
            name: name.into(),
            samples,
            fitted_exponent,
            bound_constant,
            passed: false,
            tolerance_used: tolerance,
            rule,
        };
        report.passed = report.recheck();
        report
    }

    /// Recomputes the verdict from the stored data.
    pub fn recheck(&self) -> bool {
        let values: Vec<f64> = self.samples.iter().map(|s| s.value).collect();
        let tol = self.tolerance_used;
        if values.iter().any(|v| v.is_nan()) {
            return false;
        }
        match self.rule {
            Rule::MaxAtMost => values.iter().all(|v| *v <= tol),
            Rule::ExponentAtMost => {
                self.bound_constant.is_none_or(f64::is_finite)
                    && self.fitted_exponent.is_some_and(|e| e <= tol)
            }
            Rule::ExponentNear { target } => self.fitted_exponent.is_some_and(|e| (e - target).abs() <= tol),
            Rule::NonIncreasing => values.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol)),
            Rule::StrictlyDecreasing => values.windows(2).all(|w| w[1] < w[0]),
            Rule::RatioBelow => {
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                !values.is_empty() && min > 0.0 && max / min < tol
            }
        }
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    /// One row per sample: parameter columns (sorted by name), then value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let keys: Vec<&String> = self
            .samples
            .first()
            .map(|s| s.params.keys().collect())
            .unwrap_or_default();
        let mut header: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
        header.push("value");
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row: Vec<String> = keys
                .iter()
                .map(|k| s.params.get(*k).map(|v| fmt_f64(*v)).unwrap_or_default())
                .collect();
            row.push(fmt_f64(s.value));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Least-squares slope of `ln y` against `ln x`; skips non-positive entries.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Floats at 17 significant digits, the form used in every JSON and CSV
/// output so identical runs give identical bytes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

struct FixedPrecision;

impl serde_json::ser::Formatter for FixedPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if !value.is_finite() {
            return writer.write_all(b"null");
        }
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with every float at 17 significant digits.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedPrecision);
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    String::from_utf8(out).expect("JSON is UTF-8")
}
