//! Per-pass geometric decay factor of a gap trace.

use proxsvrg::optimizers::TraceRecord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `exp(slope)`: the fitted gap ratio per effective pass.
    pub factor: f64,
    /// Least-squares slope of `ln(gap)` against passes.
    pub slope: f64,
    /// Records used by the fit.
    pub points: usize,
}

/// Least-squares line through `(passes, ln gap)` over records with
/// `start <= passes <= end` and `gap >= floor`. `None` with fewer than two
/// usable records.
pub fn fit_decay(records: &[TraceRecord], start: f64, end: f64, floor: f64) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.passes >= start && r.passes <= end)
        .filter_map(|r| r.gap.filter(|&g| g >= floor && g.is_finite()).map(|g| (r.passes, g.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(DecayFit {
        factor: slope.exp(),
        slope,
        points: pts.len(),
    })
}
