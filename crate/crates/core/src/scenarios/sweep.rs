use serde::Serialize;

use super::{run_energy_only, ScenarioConfig, ScenarioKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delay_per_meter_s: f64,
    pub kind: ScenarioKind,
    pub total_energy: f64,
}

/// Total energy of every scenario kind at each delay-per-meter value, with
/// the base seed throughout. Rows come out in sweep order, then kind order,
/// whatever the number of worker threads.
pub fn delay_sweep(base: &ScenarioConfig, sweep: &[f64], jobs: usize) -> Result<Vec<SweepRow>> {
    if sweep.is_empty() {
        return Err(Error::InvalidConfig("delay sweep needs at least one value".into()));
    }
    if let Some(bad) = sweep.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidConfig(format!(
            "delay sweep value {bad} must be positive"
        )));
    }
    let points: Vec<(f64, ScenarioKind)> = sweep
        .iter()
        .flat_map(|&v| ScenarioKind::ALL.into_iter().map(move |k| (v, k)))
        .collect();
    let eval = |&(v, kind): &(f64, ScenarioKind)| -> Result<SweepRow> {
        let mut cfg = base.with_kind(kind);
        cfg.link.delay_per_meter_s = v;
        let run = run_energy_only(&cfg)?;
        Ok(SweepRow {
            delay_per_meter_s: v,
            kind,
            total_energy: run.total_energy(),
        })
    };

    let jobs = jobs.clamp(1, points.len());
    if jobs == 1 {
        return points.iter().map(eval).collect();
    }
    let chunk = points.len().div_ceil(jobs);
    let results: Vec<Result<Vec<SweepRow>>> = std::thread::scope(|s| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(eval).collect::<Result<Vec<_>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut rows = Vec::with_capacity(points.len());
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}
