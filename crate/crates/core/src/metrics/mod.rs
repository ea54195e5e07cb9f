//! Benchmark metrics over generated view sets.
//!
//! Geometry scores filter each view at a confidence level before the
//! registered-Chamfer pipeline; motion scores subsample frames and keep the
//! lowest-indexed tracks before the track-matching pipeline. Both average
//! over every unordered view pair.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::policy::{decode_rendered, sample_trajectory, DenoiseSchedule, PolicyParams};
use crate::rewards::{geometry_reward, motion_distance, GeometryRewardConfig};
use crate::seed::derive_seed;
use crate::trainer::TrainWorld;
use crate::world::ViewObservation;
use crate::{Error, Result};

fn check_views(views: &[ViewObservation]) -> Result<()> {
    if views.len() < 2 {
        return Err(Error::WrongViewCount {
            expected: 2,
            got: views.len(),
        });
    }
    Ok(())
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

/// Registered-Chamfer pair distance with points below `level` removed.
pub fn geometry_pair(a: &ViewObservation, b: &ViewObservation, level: f64, cfg: &GeometryRewardConfig) -> Result<(f64, f64)> {
    geometry_reward(a, b, &cfg.with_threshold(level))
}

/// Mean of `exp(−d_g)` over all view pairs at confidence `level`.
pub fn geometry_score(views: &[ViewObservation], level: f64, cfg: &GeometryRewardConfig) -> Result<f64> {
    check_views(views)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, j) in pairs(views.len()) {
        sum += geometry_pair(&views[i], &views[j], level, cfg)?.0;
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Motion pair distance on every `frame_interval`-th frame and the first
/// `density` tracks. Returns `(r_m, d_m)`.
pub fn motion_pair(a: &ViewObservation, b: &ViewObservation, density: usize, frame_interval: usize) -> Result<(f64, f64)> {
    let prep = |v: &ViewObservation| v.tracks.take_tracks(density).and_then(|t| t.sample_frames(frame_interval));
    motion_distance(&prep(a)?, a.camera.first(), &prep(b)?, b.camera.first())
}

/// Mean of `exp(−d_m)` over all view pairs.
pub fn motion_score(views: &[ViewObservation], density: usize, frame_interval: usize) -> Result<f64> {
    check_views(views)?;
    if density == 0 || frame_interval == 0 {
        return Err(Error::Config("density and frame_interval must be >= 1".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, j) in pairs(views.len()) {
        sum += motion_pair(&views[i], &views[j], density, frame_interval)?.0;
        n += 1;
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub confidence_levels: Vec<f64>,
    pub densities: Vec<usize>,
    pub frame_interval: usize,
    /// Sampling std used for greedy decoding.
    pub greedy_sigma: f64,
    pub geometry: GeometryRewardConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            confidence_levels: vec![0.1, 0.5, 0.7],
            densities: vec![10, 20, 30],
            frame_interval: 5,
            greedy_sigma: 1e-8,
            geometry: GeometryRewardConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.confidence_levels.is_empty() || self.densities.is_empty() {
            return Err(Error::Config("need at least one confidence level and one density".into()));
        }
        if self.confidence_levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Config("confidence levels must lie in [0, 1]".into()));
        }
        if self.densities.contains(&0) || self.frame_interval == 0 {
            return Err(Error::Config("densities and frame_interval must be >= 1".into()));
        }
        if !(self.greedy_sigma > 0.0) {
            return Err(Error::Config("greedy_sigma must be > 0".into()));
        }
        self.geometry.validate()
    }
}

pub fn geometry_key(level: f64) -> String {
    format!("geometry_{level}")
}

pub fn motion_key(density: usize) -> String {
    format!("motion_{density}")
}

/// Metric means keyed `geometry_<level>` and `motion_<density>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub cells: BTreeMap<String, f64>,
    pub pair_count: usize,
    /// Pairs for which at least one cell could not be computed (scored 0).
    pub failed_pairs: usize,
}

impl MetricReport {
    pub fn geometry(&self, level: f64) -> Option<f64> {
        self.cells.get(&geometry_key(level)).copied()
    }

    pub fn motion(&self, density: usize) -> Option<f64> {
        self.cells.get(&motion_key(density)).copied()
    }
}

/// Per-pair detail: geometry at the first confidence level, motion at the
/// last density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub world_id: usize,
    pub pair: String,
    pub d_g: f64,
    pub r_g: f64,
    pub d_m: f64,
    pub r_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    pub rows: Vec<PairRow>,
}

struct PairCells {
    values: Vec<f64>,
    failed: bool,
    row: PairRow,
}

fn score_pair(world_id: usize, i: usize, j: usize, a: &ViewObservation, b: &ViewObservation, cfg: &EvalConfig) -> PairCells {
    let mut failed = false;
    let mut values = Vec::with_capacity(cfg.confidence_levels.len() + cfg.densities.len());
    let mut geo = Vec::new();
    for &level in &cfg.confidence_levels {
        let r = geometry_pair(a, b, level, &cfg.geometry);
        failed |= r.is_err();
        geo.push(r.as_ref().ok().copied());
        values.push(r.map(|x| x.0).unwrap_or(0.0));
    }
    let mut mot = Vec::new();
    for &density in &cfg.densities {
        let r = motion_pair(a, b, density, cfg.frame_interval);
        failed |= r.is_err();
        mot.push(r.as_ref().ok().copied());
        values.push(r.map(|x| x.0).unwrap_or(0.0));
    }
    let (r_g, d_g) = geo[0].unwrap_or((0.0, f64::INFINITY));
    let (r_m, d_m) = mot.last().copied().flatten().unwrap_or((0.0, f64::INFINITY));
    PairCells {
        values,
        failed,
        row: PairRow {
            world_id,
            pair: format!("{i}-{j}"),
            d_g,
            r_g,
            d_m,
            r_m,
        },
    }
}

/// Scores already generated view sets, one per world.
pub fn evaluate_views(world_views: &[(usize, Vec<ViewObservation>)], cfg: &EvalConfig) -> Result<Evaluation> {
    cfg.validate()?;
    if world_views.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    for (_, v) in world_views {
        check_views(v)?;
    }
    let scored: Vec<Vec<PairCells>> = world_views
        .par_iter()
        .map(|(id, views)| {
            pairs(views.len())
                .map(|(i, j)| score_pair(*id, i, j, &views[i], &views[j], cfg))
                .collect()
        })
        .collect();
    let keys: Vec<String> = cfg
        .confidence_levels
        .iter()
        .map(|&l| geometry_key(l))
        .chain(cfg.densities.iter().map(|&d| motion_key(d)))
        .collect();
    let mut sums = vec![0.0; keys.len()];
    let mut rows = Vec::new();
    let mut failed_pairs = 0;
    for cells in scored.into_iter().flatten() {
        for (s, v) in sums.iter_mut().zip(&cells.values) {
            *s += v;
        }
        failed_pairs += cells.failed as usize;
        rows.push(cells.row);
    }
    let n = rows.len() as f64;
    Ok(Evaluation {
        report: MetricReport {
            cells: keys.into_iter().zip(sums.into_iter().map(|s| s / n)).collect(),
            pair_count: rows.len(),
            failed_pairs,
        },
        rows,
    })
}

/// Decodes one greedy rollout per world under `params` and scores it. The
/// initial noise of world `k` is drawn from a stream derived from `seed`
/// and the world id.
pub fn evaluate_run(params: &PolicyParams, worlds: &[TrainWorld], steps: usize, gain: f64, cfg: &EvalConfig, seed: u64) -> Result<Evaluation> {
    if worlds.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    cfg.validate()?;
    let sched = DenoiseSchedule::constant(steps, cfg.greedy_sigma);
    let views: Vec<(usize, Vec<ViewObservation>)> = worlds
        .par_iter()
        .map(|w| {
            let traj = sample_trajectory(params, &w.cond, &sched, derive_seed(seed, &[w.id as u64]))?;
            Ok((w.id, decode_rendered(&traj.final_latent().z, &w.base_views, gain)?))
        })
        .collect::<Result<_>>()?;
    evaluate_views(&views, cfg)
}

pub fn write_rows_csv<W: Write>(mut w: W, rows: &[PairRow]) -> std::io::Result<()> {
    writeln!(w, "world_id,pair,d_g,r_g,d_m,r_m")?;
    for r in rows {
        writeln!(w, "{},{},{:?},{:?},{:?},{:?}", r.world_id, r.pair, r.d_g, r.r_g, r.d_m, r.r_m)?;
    }
    Ok(())
}

pub fn save_evaluation(report_path: &Path, csv_path: &Path, eval: &Evaluation) -> Result<()> {
    crate::world::io::write_json(report_path, &eval.report)?;
    let mut buf = Vec::new();
    write_rows_csv(&mut buf, &eval.rows).map_err(|e| Error::io(csv_path, e))?;
    std::fs::write(csv_path, buf).map_err(|e| Error::io(csv_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_keys_and_round_trip() {
        let mut cells = BTreeMap::new();
        for l in [0.1, 0.5, 0.7] {
            cells.insert(geometry_key(l), 0.1 + l / 3.0);
        }
        for d in [10, 20, 30] {
            cells.insert(motion_key(d), 1.0 / d as f64);
        }
        let r = MetricReport {
            cells,
            pair_count: 3,
            failed_pairs: 0,
        };
        let text = serde_json::to_string(&r).unwrap();
        for k in ["geometry_0.1", "geometry_0.5", "geometry_0.7", "motion_10", "motion_20", "motion_30"] {
            assert!(text.contains(&format!("\"{k}\"")), "{text}");
        }
        let back: MetricReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.geometry(0.5), Some(0.1 + 0.5 / 3.0));
        assert_eq!(back.motion(20), Some(0.05));
    }

    #[test]
    fn pair_enumeration() {
        assert_eq!(pairs(3).collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(pairs(2).count(), 1);
    }
}
