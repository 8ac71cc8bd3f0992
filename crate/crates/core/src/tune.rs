//! Grid search over the injection exponent on validation samples.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{aggregate, prepare_all, Metric, MetricKind, Pipeline, DEFAULT_KS};
use crate::ingest::SequenceSample;

/// 0.00, 0.01, ..., 1.00 followed by 2, 3, ..., 100.
pub fn gamma_grid() -> Vec<f64> {
    (0..=100)
        .map(|i| f64::from(i) / 100.0)
        .chain((2..=100).map(f64::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub ks: Vec<usize>,
    pub metric: Metric,
    pub rows: Vec<SweepRow>,
    pub best_gamma: f64,
    pub best_value: f64,
    pub n_samples: usize,
}

impl Sweep {
    pub fn value(&self, row: &SweepRow, metric: Metric) -> Option<f64> {
        let pos = self.ks.iter().position(|&k| k == metric.k)?;
        Some(match metric.kind {
            MetricKind::Hr => row.hr[pos],
            MetricKind::Ndcg => row.ndcg[pos],
        })
    }

    /// Header plus one row per grid point.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gamma");
        for k in &self.ks {
            let _ = write!(out, "\thr@{k}");
        }
        for k in &self.ks {
            let _ = write!(out, "\tndcg@{k}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{}", row.gamma);
            for v in row.hr.iter().chain(&row.ndcg) {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates every grid point of [`gamma_grid`] and picks the gamma that
/// maximizes `metric`, preferring the smallest gamma on ties.
pub fn tune_gamma(
    samples: &[SequenceSample],
    pipeline: &Pipeline,
    metric: Metric,
) -> Result<Sweep> {
    tune_gamma_over(samples, pipeline, metric, &gamma_grid(), &DEFAULT_KS)
}

pub fn tune_gamma_over(
    samples: &[SequenceSample],
    pipeline: &Pipeline,
    metric: Metric,
    grid: &[f64],
    ks: &[usize],
) -> Result<Sweep> {
    if samples.is_empty() {
        return Err(Error::EmptyValidation);
    }
    if !ks.contains(&metric.k) {
        return Err(Error::Invalid(format!(
            "{metric} is not among the cutoffs {ks:?}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Invalid("empty gamma grid".into()));
    }
    // distances do not depend on gamma, so each sample is prepared once
    let prepared = prepare_all(samples, pipeline)?;
    let inert = matches!(pipeline.grounding.injection, crate::ground::Injection::None);
    // positions[s][g]
    let positions: Vec<Vec<Option<usize>>> = prepared
        .par_iter()
        .map(|p| {
            grid.iter()
                .map(|&g| p.position(if inert { 0.0 } else { g }))
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    let mut n_samples = 0;
    for (j, &gamma) in grid.iter().enumerate() {
        let column: Vec<Option<usize>> = positions.iter().map(|p| p[j]).collect();
        let (hr, ndcg, n) = aggregate(&column, ks);
        n_samples = n;
        rows.push(SweepRow { gamma, hr, ndcg });
    }
    if n_samples == 0 {
        return Err(Error::EmptyValidation);
    }

    let mut sweep = Sweep {
        ks: ks.to_vec(),
        metric,
        rows,
        best_gamma: 0.0,
        best_value: f64::NEG_INFINITY,
        n_samples,
    };
    let mut best = (grid[0], f64::NEG_INFINITY);
    for row in &sweep.rows {
        let v = sweep.value(row, metric).expect("metric cutoff checked");
        if v > best.1 {
            best = (row.gamma, v);
        }
    }
    (sweep.best_gamma, sweep.best_value) = best;
    Ok(sweep)
}
