//! Per-method summary tables for benchmark runs.

use nomix_simbench::BenchmarkRecord;

use crate::io::{fmt_f64, fmt_opt, CsvTable};

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman and Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
}

pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Stats {
        count: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        q25: quantile_sorted(&sorted, 0.25),
        q75: quantile_sorted(&sorted, 0.75),
    })
}

pub type Metric = (String, Box<dyn Fn(&BenchmarkRecord) -> Option<f64>>);

/// One row per (method, noise level, metric), in order of first appearance.
pub fn summary_table(records: &[BenchmarkRecord], metrics: &[Metric]) -> CsvTable {
    let mut groups: Vec<(&str, f64)> = Vec::new();
    for r in records {
        if !groups.iter().any(|&(m, s)| m == r.method && s == r.sigma_e2) {
            groups.push((&r.method, r.sigma_e2));
        }
    }
    let mut table = CsvTable::new(&["method", "sigma_e2", "metric", "count", "mean", "q25", "q75"]);
    for (method, sigma_e2) in groups {
        let members: Vec<&BenchmarkRecord> = records
            .iter()
            .filter(|r| r.method == method && r.sigma_e2 == sigma_e2)
            .collect();
        for (name, get) in metrics {
            let values: Vec<f64> = members.iter().filter_map(|r| get(r)).collect();
            let s = stats(&values);
            table.push(vec![
                method.to_string(),
                fmt_f64(sigma_e2),
                name.clone(),
                values.len().to_string(),
                fmt_opt(s.map(|s| s.mean)),
                fmt_opt(s.map(|s| s.q25)),
                fmt_opt(s.map(|s| s.q75)),
            ]);
        }
    }
    table
}
