use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::stats::{quantile, theory_exponent};
use super::{run_jobs, CampaignConfig, CellStatus, Job, RunSummary, Store};
use crate::error::{Error, Result};
use crate::graph::sample_instance;
use crate::mixing::{exponent_fit, ExponentFit};
use crate::rng;

const PLACEMENT_TRIES: usize = 10_000;

fn distinct(points: &[usize]) -> bool {
    let mut v = points.to_vec();
    v.sort_unstable();
    v.windows(2).all(|w| w[0] != w[1])
}

fn edge_at(x: usize, l: i64, n: usize) -> (usize, usize) {
    (x, (x as i64 + l).rem_euclid(n as i64) as usize)
}

/// Edges `(x_i, x_i + l_i)` at uniformly random positions, resampled until
/// all endpoints are distinct. `fixed` pins the first positions.
fn random_placement(n: usize, lengths: &[i64], fixed: &[usize], seed: u64) -> Vec<(usize, usize)> {
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for _ in 0..PLACEMENT_TRIES {
        edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let x = fixed.get(i).copied().unwrap_or_else(|| rng.random_range(0..n));
                edge_at(x, l, n)
            })
            .collect();
        let pts: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        if distinct(&pts) {
            break;
        }
    }
    edges
}

/// One cell per `(l1, l2)` on the grid `1, 1+step, ... <= n/2`, each with its
/// own random placement.
pub fn length_jobs(n: usize, step: usize, cfg: &CampaignConfig) -> Result<Vec<Job>> {
    if n < 8 {
        return Err(Error::Config(format!("length sweep needs n >= 8, got {n}")));
    }
    if step == 0 {
        return Err(Error::Config("grid step must be at least 1".into()));
    }
    let mut jobs = Vec::new();
    for l1 in (1..=n / 2).step_by(step) {
        for l2 in (1..=n / 2).step_by(step) {
            let seed = rng::derive(cfg.seed, &[n as u64, l1 as u64, l2 as u64]);
            let edges = random_placement(n, &[l1 as i64, l2 as i64], &[], seed);
            jobs.push(Job::new("lengths", vec![l1 as i64, l2 as i64], n, edges, Some(seed), true, cfg));
        }
    }
    Ok(jobs)
}

pub fn sweep_lengths(
    n: usize,
    step: usize,
    cfg: &CampaignConfig,
    store: &mut Store,
    limit: Option<usize>,
) -> Result<RunSummary> {
    run_jobs(&length_jobs(n, step, cfg)?, cfg, store, limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositionMode {
    /// Every free left endpoint on the grid `0, step, 2 step, ... < n`.
    Grid { step: usize },
    /// Independent uniform placements of the free edges.
    Random { count: usize },
}

fn check_lengths(n: usize, lengths: &[i64]) -> Result<()> {
    if lengths.is_empty() {
        return Err(Error::Config("need at least one length".into()));
    }
    for &l in lengths {
        if l.rem_euclid(n as i64) == 0 || 2 * l.unsigned_abs() as usize > n {
            return Err(Error::Config(format!("length {l} is not valid for n={n}")));
        }
    }
    if 4 * lengths.len() > 2 * n {
        return Err(Error::Config(format!("{} edges do not fit on n={n}", lengths.len())));
    }
    Ok(())
}

/// First edge at `(0, l_1)`; the other left endpoints vary.
pub fn position_jobs(
    n: usize,
    lengths: &[i64],
    mode: PositionMode,
    cfg: &CampaignConfig,
) -> Result<Vec<Job>> {
    check_lengths(n, lengths)?;
    let k = lengths.len();
    let mut jobs = Vec::new();
    match mode {
        PositionMode::Grid { step } => {
            if step == 0 {
                return Err(Error::Config("grid step must be at least 1".into()));
            }
            let axis: Vec<usize> = (0..n).step_by(step).collect();
            let mut idx = vec![0usize; k - 1];
            loop {
                let xs: Vec<usize> = std::iter::once(0).chain(idx.iter().map(|&i| axis[i])).collect();
                let edges: Vec<(usize, usize)> =
                    xs.iter().zip(lengths).map(|(&x, &l)| edge_at(x, l, n)).collect();
                let cell = xs[1..].iter().map(|&x| x as i64).collect();
                jobs.push(Job::new("positions", cell, n, edges, None, true, cfg));
                let mut d = 0;
                while d < k - 1 && idx[d] + 1 == axis.len() {
                    idx[d] = 0;
                    d += 1;
                }
                if d == k - 1 {
                    break;
                }
                idx[d] += 1;
            }
        }
        PositionMode::Random { count } => {
            for i in 0..count {
                let seed = rng::derive(cfg.seed, &[n as u64, i as u64]);
                let edges = random_placement(n, lengths, &[0], seed);
                jobs.push(Job::new("positions", vec![i as i64], n, edges, Some(seed), true, cfg));
            }
        }
    }
    Ok(jobs)
}

pub fn sweep_positions(
    n: usize,
    lengths: &[i64],
    mode: PositionMode,
    cfg: &CampaignConfig,
    store: &mut Store,
    limit: Option<usize>,
) -> Result<RunSummary> {
    run_jobs(&position_jobs(n, lengths, mode, cfg)?, cfg, store, limit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NMedian {
    pub n: usize,
    pub instances: usize,
    pub mixed: usize,
    pub median: f64,
    /// `median / n^((k+2)/(k+1))`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub k: usize,
    pub theory: f64,
    pub per_n: Vec<NMedian>,
    pub fit: ExponentFit,
    /// `max / min` of the medians scaled by `n^theory`, `n`, and `n^2`.
    pub spread_theory: f64,
    pub spread_linear: f64,
    pub spread_quadratic: f64,
}

fn spread(per_n: &[NMedian], e: f64) -> f64 {
    let v: Vec<f64> = per_n.iter().map(|m| m.median / (m.n as f64).powf(e)).collect();
    let hi = v.iter().copied().fold(f64::MIN, f64::max);
    let lo = v.iter().copied().fold(f64::MAX, f64::min);
    hi / lo
}

/// Exponent-campaign jobs: `instances` random instances per `n`. Identical
/// instances share a key and are computed once.
pub fn exponent_jobs(k: usize, ns: &[usize], instances: usize, cfg: &CampaignConfig) -> Result<Vec<Job>> {
    let mut distinct_n = ns.to_vec();
    distinct_n.sort_unstable();
    distinct_n.dedup();
    if distinct_n.len() < 3 || instances < 5 {
        return Err(Error::Config(format!(
            "need at least 3 distinct n and 5 instances each (got {} and {instances})",
            distinct_n.len()
        )));
    }
    let mut jobs = Vec::new();
    for &n in &distinct_n {
        for i in 0..instances {
            let seed = rng::derive(cfg.seed, &[n as u64, k as u64, i as u64]);
            let g = sample_instance(n, k, seed)?;
            let edges = g
                .edges()
                .iter()
                .map(|&(lo, hi)| (g.hubs()[lo], g.hubs()[hi]))
                .collect();
            jobs.push(Job::new("exponent", vec![n as i64, i as i64], n, edges, Some(seed), false, cfg));
        }
    }
    Ok(jobs)
}

/// Median mixing time per `n` and the log-log slope through the medians.
/// Unmixed runs count as infinitely slow.
pub fn exponent_campaign(
    k: usize,
    ns: &[usize],
    instances: usize,
    cfg: &CampaignConfig,
    store: &mut Store,
) -> Result<ExponentSummary> {
    let jobs = exponent_jobs(k, ns, instances, cfg)?;
    run_jobs(&jobs, cfg, store, None)?;
    let theory = theory_exponent(k);
    let mut per_n = Vec::new();
    for chunk in jobs.chunks(instances) {
        let n = chunk[0].instance.n;
        let mut vals: Vec<f64> = chunk
            .iter()
            .map(|j| {
                let r = store.get(&j.key).expect("job was run");
                match (r.status, r.t_mix) {
                    (CellStatus::Mixed, Some(t)) => t as f64,
                    _ => f64::INFINITY,
                }
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        let mixed = vals.iter().filter(|v| v.is_finite()).count();
        let median = quantile(&vals, 0.5);
        if !median.is_finite() {
            return Err(Error::Campaign {
                n,
                not_mixed: instances - mixed,
                total: instances,
            });
        }
        per_n.push(NMedian {
            n,
            instances,
            mixed,
            median,
            scaled: median / (n as f64).powf(theory),
        });
    }
    let pts: Vec<(f64, f64)> = per_n.iter().map(|m| (m.n as f64, m.median)).collect();
    let fit = exponent_fit(&pts)?;
    Ok(ExponentSummary {
        k,
        theory,
        spread_theory: spread(&per_n, theory),
        spread_linear: spread(&per_n, 1.0),
        spread_quadratic: spread(&per_n, 2.0),
        per_n,
        fit,
    })
}
