use serde::{Deserialize, Serialize};

use super::{fsd_profile, fsd_split_from_profile, MetricsError, ScanCurve, SplitPoint};
use crate::util::csv_string;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFsd {
    pub scan_id: String,
    /// 1/Å; `None` when the scan could not be evaluated.
    pub fsd_full: Option<f64>,
    pub fsd_compress: Option<f64>,
    pub fsd_stretch: Option<f64>,
    pub n_valid_points: usize,
    pub error: Option<String>,
}

pub fn evaluate_scan(model: &ScanCurve, reference: &ScanCurve, split: SplitPoint) -> ScanFsd {
    let mut out = ScanFsd {
        scan_id: reference.id.clone(),
        fsd_full: None,
        fsd_compress: None,
        fsd_stretch: None,
        n_valid_points: 0,
        error: None,
    };
    match fsd_profile(model, reference) {
        Ok(p) => {
            out.n_valid_points = p.n_valid_points();
            out.fsd_full = p.max_abs_derivative(|_| true);
            if out.fsd_full.is_none() {
                out.error = Some(MetricsError::InsufficientData(out.n_valid_points).to_string());
            }
            let (c, s) = fsd_split_from_profile(&p, split.alpha(reference));
            out.fsd_compress = c;
            out.fsd_stretch = s;
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsdAggregate {
    pub n_scans: usize,
    pub n_full: usize,
    pub n_compress: usize,
    pub n_stretch: usize,
    pub mean_full: f64,
    pub mean_compress: Option<f64>,
    pub mean_stretch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsdReport {
    pub scans: Vec<ScanFsd>,
    pub aggregate: FsdAggregate,
}

fn mean(values: impl Iterator<Item = f64>) -> (usize, Option<f64>) {
    let (mut n, mut s) = (0, 0.0);
    for v in values {
        n += 1;
        s += v;
    }
    (n, (n > 0).then(|| s / n as f64))
}

/// Arithmetic means over the scans that have each value, in input order.
pub fn aggregate_report(scans: Vec<ScanFsd>) -> Result<FsdReport, MetricsError> {
    let (n_full, mean_full) = mean(scans.iter().filter_map(|s| s.fsd_full));
    let mean_full = mean_full.ok_or(MetricsError::NoValidScans)?;
    let (n_compress, mean_compress) = mean(scans.iter().filter_map(|s| s.fsd_compress));
    let (n_stretch, mean_stretch) = mean(scans.iter().filter_map(|s| s.fsd_stretch));
    Ok(FsdReport {
        aggregate: FsdAggregate {
            n_scans: scans.len(),
            n_full,
            n_compress,
            n_stretch,
            mean_full,
            mean_compress,
            mean_stretch,
        },
        scans,
    })
}

impl FsdReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// One row per scan.
    pub fn to_csv(&self) -> String {
        csv_string(&self.scans)
    }
}
