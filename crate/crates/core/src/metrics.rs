//! Depth completion error metrics over the pixels where both maps are valid.
//!
//! Depth errors are reported in millimeters and inverse-depth errors in 1/km,
//! the usual KITTI units. [`MetricReport::in_meters`] gives the meter-based
//! variant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{is_valid, DepthMap};

/// Thresholds of the accuracy-under-threshold metrics: `1.25`, `1.25²`, `1.25³`.
pub const DELTA_THRESHOLDS: [f64; 3] = [1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    /// Root mean squared error, mm.
    pub rmse: f64,
    /// Mean absolute error, mm.
    pub mae: f64,
    /// RMSE of inverse depth, 1/km.
    pub irmse: f64,
    /// MAE of inverse depth, 1/km.
    pub imae: f64,
    /// Mean relative error.
    pub rel: f64,
    /// Percentage of pixels with `max(D/D*, D*/D)` below each of [`DELTA_THRESHOLDS`].
    pub delta: [f64; 3],
    /// Pixels where both maps are valid.
    pub pixel_count: usize,
    /// Pixels with valid ground truth but no valid prediction; excluded from the metrics above.
    pub missing_count: usize,
}

impl MetricReport {
    /// RMSE in meters.
    pub fn rmse_m(&self) -> f64 {
        self.rmse / 1000.0
    }

    /// The same report with depth errors in meters and inverse-depth errors in 1/m.
    pub fn in_meters(&self) -> MetricReport {
        MetricReport {
            rmse: self.rmse / 1000.0,
            mae: self.mae / 1000.0,
            irmse: self.irmse / 1000.0,
            imae: self.imae / 1000.0,
            ..*self
        }
    }
}

pub fn evaluate(prediction: &DepthMap, truth: &DepthMap) -> Result<MetricReport> {
    truth.check_shape(prediction, "prediction")?;
    let mut n = 0usize;
    let mut missing = 0usize;
    let (mut se, mut ae, mut ise, mut iae, mut rel) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut hits = [0usize; 3];
    for (&d, &t) in prediction.as_slice().iter().zip(truth.as_slice()) {
        if !is_valid(t) {
            continue;
        }
        if !is_valid(d) {
            missing += 1;
            continue;
        }
        n += 1;
        let err = d - t;
        se += err * err;
        ae += err.abs();
        let inv_err = 1.0 / d - 1.0 / t;
        ise += inv_err * inv_err;
        iae += inv_err.abs();
        rel += err.abs() / t;
        let ratio = (d / t).max(t / d);
        for (hit, &thr) in hits.iter_mut().zip(&DELTA_THRESHOLDS) {
            if ratio < thr {
                *hit += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let nf = n as f64;
    Ok(MetricReport {
        rmse: (se / nf).sqrt() * 1000.0,
        mae: ae / nf * 1000.0,
        irmse: (ise / nf).sqrt() * 1000.0,
        imae: iae / nf * 1000.0,
        rel: rel / nf,
        delta: hits.map(|h| 100.0 * h as f64 / nf),
        pixel_count: n,
        missing_count: missing,
    })
}
