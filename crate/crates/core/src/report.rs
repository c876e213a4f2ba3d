//! Structured outputs of checks and experiments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Values at or below this are excluded from log-linear fits.
pub const FIT_FLOOR: f64 = 1e-14;

/// Named boolean side condition of a check (monotonicity, spectral gap, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Result of one identity check.
///
/// `pass` holds exactly when `max_residual <= tolerance` and every side
/// condition passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub max_residual: f64,
    pub per_level: BTreeMap<usize, f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub metadata: BTreeMap<String, Value>,
    pub conditions: Vec<Condition>,
    /// Location of the worst residual, e.g. `level 3, i=1, j=2`.
    pub worst: Option<String>,
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        VerificationReport {
            name: name.into(),
            max_residual: 0.0,
            per_level: BTreeMap::new(),
            tolerance,
            pass: true,
            metadata: BTreeMap::new(),
            conditions: Vec::new(),
            worst: None,
            warnings: Vec::new(),
        }
    }

    /// Records a residual at a level; the per-level entry keeps the maximum.
    pub fn record(&mut self, level: usize, residual: f64, location: impl FnOnce() -> String) {
        let entry = self.per_level.entry(level).or_insert(0.0);
        if residual > *entry || residual.is_nan() {
            *entry = residual;
        }
        self.record_global(residual, location);
    }

    /// Records a residual that is not tied to a level.
    pub fn record_global(&mut self, residual: f64, location: impl FnOnce() -> String) {
        if residual > self.max_residual || residual.is_nan() || self.worst.is_none() {
            self.max_residual = if self.max_residual.is_nan() {
                self.max_residual
            } else {
                residual.max(self.max_residual)
            };
            if residual.is_nan() {
                self.max_residual = f64::NAN;
            }
            self.worst = Some(location());
        }
        self.refresh();
    }

    pub fn condition(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.conditions.push(Condition {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
        self.refresh();
    }

    pub fn meta(&mut self, key: &str, value: impl Serialize) {
        self.metadata.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    fn refresh(&mut self) {
        self.pass = self.max_residual <= self.tolerance && self.conditions.iter().all(|c| c.pass);
    }

    /// Failure summary naming the worst location and any failed conditions.
    pub fn failure_message(&self) -> Option<String> {
        if self.pass {
            return None;
        }
        let mut parts = Vec::new();
        if self.max_residual > self.tolerance || self.max_residual.is_nan() {
            parts.push(format!(
                "residual {:.3e} > {:.1e} at {}",
                self.max_residual,
                self.tolerance,
                self.worst.as_deref().unwrap_or("?")
            ));
        }
        for c in self.conditions.iter().filter(|c| !c.pass) {
            parts.push(format!("{}: {}", c.name, c.detail));
        }
        Some(format!("{}: {}", self.name, parts.join("; ")))
    }

    /// Sorted-key JSON.
    pub fn to_json(&self) -> String {
        sorted_json(self)
    }
}

/// Measured norms as a function of a swept integer, with a log-linear fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub name: String,
    pub parameter: String,
    pub values: BTreeMap<usize, f64>,
    /// Least-squares slope of `ln(value)` against the parameter.
    pub fit_rate: Option<f64>,
    /// `exp(intercept)`: the empirical prefactor.
    pub fit_prefactor: Option<f64>,
    /// Coefficient of determination of the fit.
    pub fit_quality: Option<f64>,
    /// Input-level window used for each parameter value.
    pub window: BTreeMap<usize, (usize, usize)>,
    pub metadata: BTreeMap<String, Value>,
}

impl DecaySeries {
    pub fn new(name: impl Into<String>, parameter: impl Into<String>) -> Self {
        DecaySeries {
            name: name.into(),
            parameter: parameter.into(),
            values: BTreeMap::new(),
            fit_rate: None,
            fit_prefactor: None,
            fit_quality: None,
            window: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, param: usize, value: f64, window: (usize, usize)) {
        self.values.insert(param, value);
        self.window.insert(param, window);
        self.refit();
    }

    pub fn meta(&mut self, key: &str, value: impl Serialize) {
        self.metadata.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    fn refit(&mut self) {
        let pts: Vec<(f64, f64)> = self
            .values
            .iter()
            .filter(|(_, &v)| v > FIT_FLOOR)
            .map(|(&k, &v)| (k as f64, v.ln()))
            .collect();
        match log_linear_fit(&pts) {
            Some((slope, intercept, r2)) => {
                self.fit_rate = Some(slope);
                self.fit_prefactor = Some(intercept.exp());
                self.fit_quality = Some(r2);
            }
            None => {
                self.fit_rate = None;
                self.fit_prefactor = None;
                self.fit_quality = None;
            }
        }
    }

    pub fn values_vec(&self) -> Vec<f64> {
        self.values.values().copied().collect()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.values_vec().windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_json(&self) -> String {
        sorted_json(self)
    }

    /// `parameter,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},value\n", self.parameter);
        for (k, v) in &self.values {
            out.push_str(&format!("{k},{v:e}\n"));
        }
        out
    }
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, R²)`.
pub fn log_linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Some((slope, intercept, r2))
}

/// Pretty JSON with object keys sorted (serde_json's map is ordered).
pub fn sorted_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).unwrap_or(Value::Null);
    serde_json::to_string_pretty(&v).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_tracks_residual_and_conditions() {
        let mut r = VerificationReport::new("x", 1e-10);
        r.record(1, 1e-12, || "level 1".into());
        assert!(r.pass);
        r.record(2, 1e-8, || "level 2, i=1".into());
        assert!(!r.pass);
        assert_eq!(r.worst.as_deref(), Some("level 2, i=1"));
        assert!(r.failure_message().unwrap().contains("level 2, i=1"));
        let mut r = VerificationReport::new("y", 1e-10);
        r.condition("monotone", false, "dropped at 3");
        assert!(!r.pass);
    }

    #[test]
    fn fit_recovers_exact_geometric_rate() {
        let mut s = DecaySeries::new("geo", "k");
        for k in 0..5 {
            s.push(k, 3.0 * 0.6f64.powi(k as i32), (0, 1));
        }
        assert!((s.fit_rate.unwrap() - 0.6f64.ln()).abs() < 1e-12);
        assert!((s.fit_prefactor.unwrap() - 3.0).abs() < 1e-12);
        assert!((s.fit_quality.unwrap() - 1.0).abs() < 1e-12);
        assert!(s.is_strictly_decreasing());
    }

    #[test]
    fn fit_ignores_numerical_zeros() {
        let mut s = DecaySeries::new("zeros", "k");
        s.push(0, 0.0, (0, 1));
        s.push(1, 1e-16, (0, 1));
        assert!(s.fit_rate.is_none());
    }

    #[test]
    fn json_keys_sorted() {
        let r = VerificationReport::new("z", 1.0);
        let js = r.to_json();
        let a = js.find("\"conditions\"").unwrap();
        let b = js.find("\"max_residual\"").unwrap();
        let c = js.find("\"warnings\"").unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn csv_has_header() {
        let mut s = DecaySeries::new("s", "k");
        s.push(0, 0.5, (1, 2));
        assert_eq!(s.to_csv(), "k,value\n0,5e-1\n");
    }
}
