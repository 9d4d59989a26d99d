//! CSV output for metrics and sweep curves.

use std::io::Write;

use crate::error::Result;

use super::metrics::MetricsRecord;
use super::stats::{ci95, mean};

pub const METRICS_HEADER: &str =
    "run_seed,repetition,scenario,param,fpr,fnr,collision_rate,loglik_mean,loglik_var,pred_var_mean,pred_var_var,min_sep_mean";
pub const CURVES_HEADER: &str = "level,collision_proportion,variance_mean,ci95_low,ci95_high";

pub fn write_metrics<W: Write>(out: &mut W, run_seed: u64, rows: &[(usize, MetricsRecord)]) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for (rep, m) in rows {
        writeln!(
            out,
            "{run_seed},{rep},{},{},{},{},{},{},{},{},{},{}",
            m.scenario.name(),
            m.scenario.param(),
            m.fpr,
            m.fnr,
            m.collision_rate,
            m.loglik_mean,
            m.loglik_var,
            m.pred_var_mean,
            m.pred_var_var,
            m.min_sep_mean()
        )?;
    }
    Ok(())
}

/// One sweep level summarized across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub level: f64,
    pub collision_proportion: f64,
    pub variance_mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

/// `per_rep[r][k]` is repetition `r` at level `k`. The interval is over
/// the repetitions' collision proportions.
pub fn curve(per_rep: &[Vec<MetricsRecord>]) -> Vec<CurvePoint> {
    let levels = per_rep.first().map_or(0, Vec::len);
    (0..levels)
        .map(|k| {
            let rates: Vec<f64> = per_rep.iter().map(|r| r[k].collision_rate).collect();
            let vars: Vec<f64> = per_rep.iter().map(|r| r[k].pred_var_mean).collect();
            let (lo, hi) = ci95(&rates);
            CurvePoint {
                level: per_rep[0][k].scenario.param(),
                collision_proportion: mean(&rates),
                variance_mean: mean(&vars),
                ci95_low: lo,
                ci95_high: hi,
            }
        })
        .collect()
}

pub fn write_curves<W: Write>(out: &mut W, points: &[CurvePoint]) -> Result<()> {
    writeln!(out, "{CURVES_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.level, p.collision_proportion, p.variance_mean, p.ci95_low, p.ci95_high
        )?;
    }
    Ok(())
}
