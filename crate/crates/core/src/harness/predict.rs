//! One-step-ahead prediction interval from a CSV history.
//!
//! Input has header `x,y`. Every row but the last is history; the last row
//! supplies the test covariate and its `y` cell is ignored (it may be empty).

use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::bounds::{self, BoundResult};
use crate::conformal::{
    calibrate_pretrained, calibrate_split, interval_from_rule, Mode, PredictionRule,
};
use crate::error::{Error, Result};
use crate::process::{DataPoint, RegressionFn};
use crate::scoring::{LeastSquaresAr, ResidualScore};

fn default_alpha() -> f64 {
    0.1
}

/// Calibration settings for [`predict_next`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// AR order `L` of the least-squares fit; must be 0 with `regression`.
    #[serde(default)]
    pub memory: usize,
    /// Training block size; defaults to half the history.
    #[serde(default)]
    pub n0: Option<usize>,
    /// Pretrained regression function; switches off training.
    #[serde(default)]
    pub regression: Option<RegressionFn>,
    /// `β(0), β(1), …`; missing lags are taken as 1.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
}

/// Serializes `±∞` as the strings `"inf"` / `"-inf"` so JSON stays valid.
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else if *v == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictReport {
    #[serde(serialize_with = "serialize_extended")]
    pub lower: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub upper: f64,
    pub unbounded: bool,
    pub empty: bool,
    #[serde(serialize_with = "serialize_extended")]
    pub threshold: f64,
    pub m_cal: usize,
    pub level: f64,
    pub alpha: f64,
    pub mode: Mode,
    pub x_test: f64,
    /// Coverage lower bound from the supplied `β` table.
    pub bound: Option<BoundResult>,
}

/// History and test covariate parsed from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictInput {
    pub history: Vec<DataPoint>,
    pub x_test: f64,
}

fn parse_cell(row: usize, column: &str, raw: &str) -> Result<f64> {
    let t = raw.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumericCell {
            row,
            column: column.to_owned(),
            value: raw.to_owned(),
        })
}

/// Reads `x,y` rows; row numbers in errors count data rows from 1.
pub fn read_history<R: Read>(reader: R) -> Result<PredictInput> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedCsv(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["x", "y"] {
        return Err(Error::MalformedCsv(format!(
            "expected header \"x,y\", got {:?}",
            names.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedCsv(e.to_string()))?;
        rows.push((
            i + 1,
            rec.get(0).unwrap_or("").to_owned(),
            rec.get(1).unwrap_or("").to_owned(),
        ));
    }
    let Some((last_row, last_x, _)) = rows.pop() else {
        return Err(Error::MalformedCsv("no data rows".into()));
    };
    let history = rows
        .iter()
        .map(|(row, x, y)| {
            Ok(DataPoint::new(
                parse_cell(*row, "x", x)?,
                parse_cell(*row, "y", y)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictInput {
        history,
        x_test: parse_cell(last_row, "x", &last_x)?,
    })
}

fn padded_beta(beta: &[f64], len: usize) -> Result<Vec<f64>> {
    if let Some((tau, v)) = beta
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::Config(format!(
            "beta({tau}) = {v} lies outside [0, 1]"
        )));
    }
    let mut out = beta.to_vec();
    if out.len() < len {
        out.resize(len, 1.0);
    }
    Ok(out)
}

/// Calibrates on the history and returns the interval at the test covariate.
pub fn predict_next(input: &PredictInput, cfg: &PredictConfig) -> Result<PredictReport> {
    let n = input.history.len();
    let memory = cfg.memory;
    let rule: PredictionRule = match cfg.regression {
        Some(f) => {
            if memory != 0 {
                return Err(Error::Config(
                    "a pretrained regression function has memory 0".into(),
                ));
            }
            if n < memory + 2 {
                return Err(Error::CalibrationBlockTooShort {
                    n1: n,
                    needed: memory + 2,
                });
            }
            calibrate_pretrained(Arc::new(ResidualScore::new(f)), &input.history, cfg.alpha)?
        }
        None => {
            let n0 = cfg.n0.unwrap_or(n / 2);
            let n1 = n.saturating_sub(n0);
            if n0 == 0 || n1 < memory + 2 {
                return Err(Error::CalibrationBlockTooShort {
                    n1,
                    needed: memory + 2,
                });
            }
            calibrate_split(&LeastSquaresAr::new(memory), &input.history, n0, cfg.alpha)?
        }
    };
    let interval = interval_from_rule(&rule, input.x_test)?;
    let bound = match &cfg.beta {
        None => None,
        Some(beta) => Some(match rule.mode {
            Mode::Pretrained => {
                bounds::mixing_lower_bound(cfg.alpha, n, memory, &padded_beta(beta, n + 1)?)?
            }
            Mode::Split { n0 } => {
                let n1 = n - n0;
                bounds::split_mixing_lower_bound(
                    cfg.alpha,
                    n1,
                    memory,
                    &padded_beta(beta, n1 + 1)?,
                )?
            }
        }),
    };
    Ok(PredictReport {
        lower: interval.lower,
        upper: interval.upper,
        unbounded: interval.is_unbounded(),
        empty: interval.is_empty(),
        threshold: rule.threshold,
        m_cal: rule.m_cal,
        level: rule.level,
        alpha: cfg.alpha,
        mode: rule.mode,
        x_test: input.x_test,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_of(rows: &[(f64, f64)], x_test: f64) -> String {
        let mut s = String::from("x,y\n");
        for (x, y) in rows {
            s.push_str(&format!("{x},{y}\n"));
        }
        s.push_str(&format!("{x_test},\n"));
        s
    }

    #[test]
    fn constant_series_gives_point_interval() {
        let rows: Vec<(f64, f64)> = (0..30).map(|i| (i as f64 / 30.0, 2.5)).collect();
        let input = read_history(csv_of(&rows, 0.4).as_bytes()).unwrap();
        assert_eq!(input.history.len(), 30);
        let report = predict_next(
            &input,
            &PredictConfig {
                alpha: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.threshold.abs() < 1e-9);
        assert!((report.lower - 2.5).abs() < 1e-9 && (report.upper - 2.5).abs() < 1e-9);
        assert_eq!(report.m_cal, 15);
    }

    #[test]
    fn short_history_rejected() {
        let rows = [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)];
        let input = read_history(csv_of(&rows, 3.0).as_bytes()).unwrap();
        let err = predict_next(
            &input,
            &PredictConfig {
                alpha: 0.1,
                memory: 1,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(
            err.to_string().starts_with("calibration block too short"),
            "{err}"
        );
    }

    #[test]
    fn tiny_alpha_is_unbounded() {
        let rows: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, (i * i) as f64)).collect();
        let input = read_history(csv_of(&rows, 10.0).as_bytes()).unwrap();
        let cfg = PredictConfig {
            alpha: 0.01,
            regression: Some(RegressionFn::Zero),
            ..Default::default()
        };
        let report = predict_next(&input, &cfg).unwrap();
        assert!(report.unbounded);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["lower"], "-inf");
        assert_eq!(json["upper"], "inf");
    }

    #[test]
    fn beta_table_yields_bound() {
        let rows: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 / 40.0, (i % 3) as f64)).collect();
        let input = read_history(csv_of(&rows, 0.5).as_bytes()).unwrap();
        let cfg = PredictConfig {
            alpha: 0.1,
            beta: Some(vec![1.0, 0.0]),
            ..Default::default()
        };
        let b = predict_next(&input, &cfg).unwrap().bound.unwrap();
        // n1 = 20, L = 0: τ = 1, τ* = 1 gives (1 + 0.1)/20 + 0
        assert!((b.value - (0.9 - 1.1 / 20.0)).abs() < 1e-12);
        let bad = PredictConfig {
            beta: Some(vec![1.5]),
            ..cfg
        };
        assert!(predict_next(&input, &bad).is_err());
    }

    #[test]
    fn input_errors_are_distinct() {
        let header = read_history("a,b\n1,2\n3,\n".as_bytes()).unwrap_err();
        assert!(matches!(header, Error::MalformedCsv(_)));
        let ragged = read_history("x,y\n1,2\n3,4,5\n6,\n".as_bytes()).unwrap_err();
        assert!(matches!(ragged, Error::MalformedCsv(_)));
        let cell = read_history("x,y\n1,2\n3,abc\n6,\n".as_bytes()).unwrap_err();
        match cell {
            Error::NonNumericCell { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "y", "abc"));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            read_history("x,y\n".as_bytes()),
            Err(Error::MalformedCsv(_))
        ));
    }
}
