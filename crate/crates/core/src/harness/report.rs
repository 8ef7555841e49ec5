use serde::{Deserialize, Serialize};

use crate::error::{BsdeError, Result};
use crate::schemes::IndexError;

pub const CSV_HEADER: [&str; 10] =
    ["problem", "scheme", "backend", "mesh", "beta", "n", "err_y", "err_z", "metric_t2", "runtime_ms"];

/// Label in the `problem` column of the slope footer row.
pub const SLOPE_ROW: &str = "fitted_slope";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub problem: String,
    pub scheme: String,
    pub backend: String,
    pub mesh: String,
    pub beta: f64,
    pub n: usize,
    pub err_y: f64,
    pub err_z: f64,
    pub metric_t2: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Sorted by `n`.
    pub rows: Vec<ReportRow>,
    /// Slope of `ln sqrt(metric_t2)` against `ln n`.
    pub fitted_slope: Option<f64>,
    /// Rows left out of the fit because they sit at the backend floor.
    pub excluded_n: Vec<usize>,
    pub per_index: Vec<(usize, Vec<IndexError>)>,
    pub config_echo: serde_json::Value,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: impl std::fmt::Display) -> BsdeError {
    BsdeError::InvalidArgument(format!("malformed CSV report: {e}"))
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.problem.clone(),
                r.scheme.clone(),
                r.backend.clone(),
                r.mesh.clone(),
                num(r.beta),
                r.n.to_string(),
                num(r.err_y),
                num(r.err_z),
                num(r.metric_t2),
                num(r.runtime_ms),
            ])
            .map_err(csv_err)?;
        }
        let slope = self.fitted_slope.map_or_else(|| "NaN".to_string(), num);
        let mut footer = vec![String::new(); CSV_HEADER.len()];
        footer[0] = SLOPE_ROW.to_string();
        footer[8] = slope;
        w.write_record(&footer).map_err(csv_err)?;
        String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
    }

    /// Rows and fitted slope from [`ConvergenceReport::to_csv`] output.
    pub fn rows_from_csv(text: &str) -> Result<(Vec<ReportRow>, Option<f64>)> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(csv_err("unexpected header"));
        }
        let mut rows = Vec::new();
        let mut slope = None;
        let f = |s: &str| s.parse::<f64>().map_err(csv_err);
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            if &rec[0] == SLOPE_ROW {
                let v = f(&rec[8])?;
                slope = (!v.is_nan()).then_some(v);
                continue;
            }
            rows.push(ReportRow {
                problem: rec[0].to_string(),
                scheme: rec[1].to_string(),
                backend: rec[2].to_string(),
                mesh: rec[3].to_string(),
                beta: f(&rec[4])?,
                n: rec[5].parse().map_err(csv_err)?,
                err_y: f(&rec[6])?,
                err_z: f(&rec[7])?,
                metric_t2: f(&rec[8])?,
                runtime_ms: f(&rec[9])?,
            });
        }
        Ok((rows, slope))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| BsdeError::InvalidArgument(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BsdeError::InvalidArgument(format!("malformed JSON report: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(n: usize, e: f64) -> ReportRow {
        ReportRow {
            problem: "p".into(),
            scheme: "cn2".into(),
            backend: "grid".into(),
            mesh: "graded".into(),
            beta: 5.0,
            n,
            err_y: e,
            err_z: e * 3.3,
            metric_t2: e * e / 7.0,
            runtime_ms: 1.0 / 3.0,
        }
    }

    fn report(es: &[f64], slope: Option<f64>) -> ConvergenceReport {
        ConvergenceReport {
            rows: es.iter().enumerate().map(|(k, &e)| row(4 << k, e)).collect(),
            fitted_slope: slope,
            excluded_n: vec![],
            per_index: vec![],
            config_echo: serde_json::json!({"seed": 1}),
        }
    }

    #[test]
    fn csv_layout() {
        let r = report(&[0.1, 0.02, 0.004], Some(-2.0));
        let text = r.to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("fitted_slope,"));
    }

    proptest! {
        #[test]
        fn csv_and_json_round_trip(es in proptest::collection::vec(1e-300f64..1e3, 3..6), s in -5.0f64..5.0) {
            let r = report(&es, Some(s));
            let (rows, slope) = ConvergenceReport::rows_from_csv(&r.to_csv().unwrap()).unwrap();
            prop_assert_eq!(&rows, &r.rows);
            prop_assert_eq!(slope, Some(s));
            let back = ConvergenceReport::from_json(&r.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
