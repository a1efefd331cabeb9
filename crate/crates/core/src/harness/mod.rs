//! Reproducible experiment campaigns over many instances.
//!
//! Every cell of a campaign is a pure function of the campaign config and
//! seed. Cells are computed on a rayon pool in fixed-size batches and written
//! by a single writer, so neither the worker count nor an interruption changes
//! the final set of records.

mod stats;
mod store;
mod sweep;

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use stats::{normalized_ratios, quantile, sorted_scaled, theory_exponent, SortedCurve};
pub use store::{load, OpenReport, Store};
pub use sweep::{
    exponent_campaign, exponent_jobs, length_jobs, position_jobs, sweep_lengths, sweep_positions, ExponentSummary,
    NMedian, PositionMode,
};

use crate::error::{Error, Result};
use crate::graph::PerturbedCycle;
use crate::kernel::WalkParams;
use crate::mixing::{mixing_time_within, StartSet};
use crate::rng::PRNG_ID;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub n: usize,
    pub k: usize,
    /// Edges as `(u, v)` vertex pairs, in the order they were requested.
    pub edges: Vec<(usize, usize)>,
    pub lengths: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Mixed,
    NotMixed,
    /// The requested placement put two edges on a common vertex.
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub schema: u32,
    pub key: String,
    pub campaign: String,
    pub cell: Vec<i64>,
    pub instance: InstanceRecord,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub eps: f64,
    pub start: String,
    pub t_max: u64,
    pub t_mix: Option<u64>,
    pub status: CellStatus,
    pub seed: u64,
    pub prng: String,
    /// Milliseconds spent on the cell. Not part of the canonical export.
    #[serde(default)]
    pub wall_ms: f64,
}

/// Settings shared by every cell of a campaign.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub params: WalkParams,
    pub eps: f64,
    pub start: StartSet,
    /// Defaults to `50 n^2`.
    pub t_max: Option<u64>,
    pub seed: u64,
    pub threads: usize,
}

impl CampaignConfig {
    pub fn new(params: WalkParams, seed: u64) -> Self {
        CampaignConfig {
            params,
            eps: 0.25,
            start: StartSet::Single(0),
            t_max: None,
            seed,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn t_max_for(&self, n: usize) -> u64 {
        self.t_max.unwrap_or_else(|| crate::mixing::default_t_max(n))
    }
}

/// One unit of work: a cell, its instance (or the reason there is none),
/// and its store key.
#[derive(Debug, Clone)]
pub struct Job {
    pub campaign: String,
    pub cell: Vec<i64>,
    pub instance: InstanceRecord,
    pub graph: Option<PerturbedCycle>,
    pub key: String,
}

impl Job {
    pub fn new(
        campaign: &str,
        cell: Vec<i64>,
        n: usize,
        edges: Vec<(usize, usize)>,
        seed: Option<u64>,
        keyed_by_cell: bool,
        cfg: &CampaignConfig,
    ) -> Job {
        let graph = PerturbedCycle::from_edges(n, &edges).ok();
        let lengths = edges
            .iter()
            .map(|&(u, v)| crate::graph::signed_residue(v as i64 - u as i64, n))
            .collect();
        let instance = InstanceRecord {
            n,
            k: edges.len(),
            edges,
            lengths,
            seed,
        };
        let key = record_key(campaign, &cell, &instance, graph.as_ref(), keyed_by_cell, cfg);
        Job {
            campaign: campaign.to_string(),
            cell,
            instance,
            graph,
            key,
        }
    }
}

fn record_key(
    campaign: &str,
    cell: &[i64],
    inst: &InstanceRecord,
    graph: Option<&PerturbedCycle>,
    keyed_by_cell: bool,
    cfg: &CampaignConfig,
) -> String {
    let mut key = String::new();
    if keyed_by_cell {
        let cells: Vec<String> = cell.iter().map(|c| c.to_string()).collect();
        write!(key, "{campaign} cell={} ", cells.join(",")).unwrap();
    }
    match graph {
        Some(g) => write!(key, "{g}").unwrap(),
        None => {
            let e: Vec<String> = inst.edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
            write!(key, "n={} edges={}", inst.n, e.join(",")).unwrap()
        }
    }
    let w = &cfg.params;
    write!(
        key,
        " p={} q={} a={} eps={} start={} t_max={}",
        w.p,
        w.q,
        w.a,
        cfg.eps,
        cfg.start,
        cfg.t_max_for(inst.n)
    )
    .unwrap();
    key
}

fn compute(job: &Job, cfg: &CampaignConfig) -> Result<SweepRecord> {
    let t_max = cfg.t_max_for(job.instance.n);
    let clock = Instant::now();
    let (t_mix, status) = match &job.graph {
        None => (None, CellStatus::Overlap),
        Some(g) => match mixing_time_within(g, &cfg.params, cfg.eps, cfg.start, Some(t_max)) {
            Ok(t) => (Some(t), CellStatus::Mixed),
            Err(Error::NotMixed { .. }) => (None, CellStatus::NotMixed),
            Err(e) => return Err(e),
        },
    };
    Ok(SweepRecord {
        schema: SCHEMA_VERSION,
        key: job.key.clone(),
        campaign: job.campaign.clone(),
        cell: job.cell.clone(),
        instance: job.instance.clone(),
        p: cfg.params.p,
        q: cfg.params.q,
        a: cfg.params.a,
        eps: cfg.eps,
        start: cfg.start.to_string(),
        t_max,
        t_mix,
        status,
        seed: cfg.seed,
        prng: PRNG_ID.to_string(),
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}

/// Counts of what a run did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub computed: usize,
    pub skipped: usize,
    pub not_mixed: usize,
    pub overlap: usize,
}

/// Compute every job whose key is not yet in the store, appending records
/// in job order. `limit` stops after that many new records (for staged runs).
pub fn run_jobs(
    jobs: &[Job],
    cfg: &CampaignConfig,
    store: &mut Store,
    limit: Option<usize>,
) -> Result<RunSummary> {
    cfg.validate()?;
    let mut summary = RunSummary::default();
    let mut seen = std::collections::HashSet::new();
    let mut todo: Vec<&Job> = Vec::new();
    for j in jobs {
        if store.contains(&j.key) || !seen.insert(j.key.as_str()) {
            summary.skipped += 1;
        } else {
            todo.push(j);
        }
    }
    if let Some(l) = limit {
        todo.truncate(l);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let batch = (cfg.threads * 2).max(1);
    for chunk in todo.chunks(batch) {
        let recs: Vec<Result<SweepRecord>> = pool.install(|| {
            use rayon::prelude::*;
            chunk.par_iter().map(|j| compute(j, cfg)).collect()
        });
        for r in recs {
            let r = r?;
            match r.status {
                CellStatus::NotMixed => summary.not_mixed += 1,
                CellStatus::Overlap => summary.overlap += 1,
                CellStatus::Mixed => {}
            }
            store.append(r)?;
            summary.computed += 1;
        }
    }
    Ok(summary)
}

/// Records sorted by key, one JSON object per line, without wall time.
pub fn canonical_export<'a>(records: impl IntoIterator<Item = &'a SweepRecord>) -> Result<String> {
    let mut recs: Vec<&SweepRecord> = records.into_iter().collect();
    recs.sort_by(|a, b| a.key.cmp(&b.key));
    let mut out = String::new();
    for r in recs {
        let mut v = serde_json::to_value(r)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_ms");
        }
        out.push_str(&serde_json::to_string(&v)?);
        out.push('\n');
    }
    Ok(out)
}

/// Heatmap rows `x,y,tmix`; unmixed cells get `nan`, overlapping ones are omitted.
pub fn heatmap_csv<'a>(records: impl IntoIterator<Item = &'a SweepRecord>) -> String {
    let mut rows: Vec<(i64, i64, String)> = records
        .into_iter()
        .filter(|r| r.status != CellStatus::Overlap)
        .map(|r| {
            let x = r.cell.first().copied().unwrap_or(0);
            let y = r.cell.get(1).copied().unwrap_or(0);
            let t = r.t_mix.map_or_else(|| "nan".to_string(), |t| t.to_string());
            (x, y, t)
        })
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::from("x,y,tmix\n");
    for (x, y, t) in rows {
        writeln!(out, "{x},{y},{t}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CampaignConfig {
        CampaignConfig::new(WalkParams::default(), 7)
    }

    #[test]
    fn keys_identify_config() {
        let c = cfg();
        let a = Job::new("x", vec![1, 2], 50, vec![(0, 10), (20, 33)], None, true, &c);
        let b = Job::new("x", vec![1, 2], 50, vec![(20, 33), (0, 10)], None, true, &c);
        assert_eq!(a.key, b.key);
        let mut c2 = cfg();
        c2.eps = 0.1;
        let d = Job::new("x", vec![1, 2], 50, vec![(0, 10), (20, 33)], None, true, &c2);
        assert_ne!(a.key, d.key);
        assert_eq!(a.instance.lengths, vec![10, 13]);
    }

    #[test]
    fn lengths_follow_request_direction() {
        let c = cfg();
        let j = Job::new("x", vec![], 100, vec![(90, 10), (30, 60)], None, false, &c);
        assert_eq!(j.instance.lengths, vec![20, 30]);
    }

    #[test]
    fn overlap_jobs_are_flagged() {
        let c = cfg();
        let j = Job::new("x", vec![0], 30, vec![(0, 5), (5, 9)], None, true, &c);
        assert!(j.graph.is_none());
        let r = compute(&j, &c).unwrap();
        assert_eq!(r.status, CellStatus::Overlap);
        assert_eq!(r.t_mix, None);
    }

    #[test]
    fn csv_layout() {
        let c = cfg();
        let j = Job::new("x", vec![3, 4], 20, vec![(0, 3), (7, 11)], None, true, &c);
        let r = compute(&j, &c).unwrap();
        let csv = heatmap_csv([&r]);
        assert!(csv.starts_with("x,y,tmix\n3,4,"));
    }
}
