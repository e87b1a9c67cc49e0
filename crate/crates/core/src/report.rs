//! CSV and JSON serialization of uncertainty reports and shared number formatting.

use std::io::Write;

use serde::Serialize;

use crate::domain::{Method, ReportMetadata, UncertaintyReport};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Formats a real with 17 significant digits, which round-trips every `f64`.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    format!("{v:.16e}")
}

/// Writes `method,x1..xd,mean,variance,negative_variance`, one row per eval point.
pub fn write_report_csv<T: Scalar, W: Write>(report: &UncertaintyReport<T>, mut out: W) -> Result<()> {
    let dim = report.eval_points.first().map_or(0, Vec::len);
    let mut header = vec!["method".to_string()];
    header.extend((1..=dim).map(|k| format!("x{k}")));
    header.extend(["mean", "variance", "negative_variance"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for ((x, m), v) in report.eval_points.iter().zip(&report.mean).zip(&report.variance) {
        let mut row = vec![report.method.tag().to_string()];
        row.extend(x.iter().map(|c| format_real(c.to_f64_lossy())));
        row.push(format_real(m.to_f64_lossy()));
        row.push(format_real(v.to_f64_lossy()));
        row.push((*v < T::zero()).to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportJson<'a> {
    method: Method,
    negative_variance: bool,
    metadata: &'a ReportMetadata,
    eval_points: Vec<Vec<f64>>,
    mean: Vec<f64>,
    variance: Vec<f64>,
}

/// Serializes the full report, metadata included, as pretty JSON.
pub fn report_to_json<T: Scalar>(report: &UncertaintyReport<T>) -> Result<String> {
    let conv = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
    let json = ReportJson {
        method: report.method,
        negative_variance: report.negative_variance,
        metadata: &report.metadata,
        eval_points: report.eval_points.iter().map(|p| conv(p)).collect(),
        mean: conv(&report.mean),
        variance: conv(&report.variance),
    };
    serde_json::to_string_pretty(&json).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_round_trips() {
        for v in [0.1, -13.187_2, 1e-300, 6.02e23, 1.0 / 3.0] {
            let s = format_real(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn csv_and_json_shapes() {
        let report = UncertaintyReport::new(
            Method::LuDarmofal,
            vec![vec![0.0, 1.0], vec![0.5, -0.5]],
            vec![1.0, 2.0],
            vec![0.25, -1e-18],
            ReportMetadata {
                cubature_size: Some(13),
                ..Default::default()
            },
        );
        assert!(report.negative_variance);
        let mut buf = Vec::new();
        write_report_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "method,x1,x2,mean,variance,negative_variance");
        assert!(lines.next().unwrap().starts_with("LD,0,1.0000000000000000e0,"));
        assert!(lines.next().unwrap().ends_with(",true"));

        let json: serde_json::Value = serde_json::from_str(&report_to_json(&report).unwrap()).unwrap();
        assert_eq!(json["method"], "LD");
        assert_eq!(json["metadata"]["cubature_size"], 13);
        assert_eq!(json["variance"][0], 0.25);
    }
}
