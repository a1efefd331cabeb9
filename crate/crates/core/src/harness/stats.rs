use serde::{Deserialize, Serialize};

use super::{CellStatus, SweepRecord};

/// How quantiles between order statistics are interpolated.
pub const QUANTILE_METHOD: &str = "type7-linear";

/// `(k+2)/(k+1)`.
pub fn theory_exponent(k: usize) -> f64 {
    (k as f64 + 2.0) / (k as f64 + 1.0)
}

/// Linear-interpolation quantile of sorted data. Infinite entries (unmixed
/// runs) propagate when the interpolation touches them.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return sorted[lo];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if b.is_infinite() {
        return b;
    }
    a + frac * (b - a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedCurve {
    pub n: usize,
    pub k: usize,
    pub exponent: f64,
    /// Sorted `t_mix / n^exponent`; unmixed cells are `inf`.
    pub values: Vec<f64>,
    pub method: String,
}

/// Sorted scaled mixing times of the records at size `n`.
pub fn sorted_scaled<'a>(
    records: impl IntoIterator<Item = &'a SweepRecord>,
    n: usize,
    k: usize,
    exponent: Option<f64>,
) -> SortedCurve {
    let e = exponent.unwrap_or_else(|| theory_exponent(k));
    let scale = (n as f64).powf(e);
    let mut values: Vec<f64> = records
        .into_iter()
        .filter(|r| r.instance.n == n && r.instance.k == k && r.status != CellStatus::Overlap)
        .map(|r| r.t_mix.map_or(f64::INFINITY, |t| t as f64 / scale))
        .collect();
    values.sort_by(f64::total_cmp);
    SortedCurve {
        n,
        k,
        exponent: e,
        values,
        method: QUANTILE_METHOD.to_string(),
    }
}

/// `curve(q) / reference(q)` at each requested quantile.
pub fn normalized_ratios(curve: &SortedCurve, reference: &SortedCurve, qs: &[f64]) -> Vec<(f64, f64)> {
    qs.iter()
        .map(|&q| (q, quantile(&curve.values, q) / quantile(&reference.values, q)))
        .collect()
}
