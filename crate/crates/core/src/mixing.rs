//! Total-variation distance to uniform, mixing times, and log-log scaling fits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PerturbedCycle;
use crate::kernel::{DistVector, Operator, WalkParams};

/// Half the L1 distance between two probability vectors.
pub fn tv_distance(d1: &DistVector, d2: &DistVector) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::Dimension {
            expected: d1.len(),
            got: d2.len(),
        });
    }
    let s: f64 = d1.values().iter().zip(d2.values()).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * s)
}

#[inline]
pub fn tv_to_uniform(d: &[f64]) -> f64 {
    let u = 1.0 / d.len() as f64;
    0.5 * d.iter().map(|x| (x - u).abs()).sum::<f64>()
}

/// Which starting vertices the worst-case distance is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartSet {
    All,
    /// Every hub and its two cycle neighbours.
    Hubs,
    Single(usize),
}

impl StartSet {
    pub fn vertices(&self, g: &PerturbedCycle) -> Result<Vec<usize>> {
        let n = g.n();
        let mut v = match *self {
            StartSet::All => (0..n).collect(),
            StartSet::Hubs => {
                let mut v = Vec::with_capacity(3 * g.hubs().len());
                for &h in g.hubs() {
                    v.extend([(h + n - 1) % n, h, (h + 1) % n]);
                }
                if v.is_empty() {
                    v.push(0);
                }
                v
            }
            StartSet::Single(s) => {
                if s >= n {
                    return Err(Error::Domain(format!("start {s} outside [0,{n})")));
                }
                vec![s]
            }
        };
        v.sort_unstable();
        v.dedup();
        Ok(v)
    }

    /// Default for a given size: every start when affordable.
    pub fn default_for(n: usize) -> Self {
        if n <= 512 {
            StartSet::All
        } else {
            StartSet::Single(0)
        }
    }
}

impl fmt::Display for StartSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartSet::All => write!(f, "all"),
            StartSet::Hubs => write!(f, "hubs"),
            StartSet::Single(v) => write!(f, "single:{v}"),
        }
    }
}

impl FromStr for StartSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(StartSet::All),
            "hubs" => Ok(StartSet::Hubs),
            _ => s
                .strip_prefix("single:")
                .and_then(|v| v.parse().ok())
                .map(StartSet::Single)
                .ok_or_else(|| Error::Parse(format!("start set must be all|hubs|single:V, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProfileOptions {
    /// Defaults to `50 n^2`.
    pub t_max: Option<u64>,
    /// Defaults to `max(1, t_max / 4096)`.
    pub record_every: Option<u64>,
    /// Targets for which the first hitting time is reported; evolution stops
    /// once the smallest is reached.
    pub eps: Vec<f64>,
}

pub fn default_t_max(n: usize) -> u64 {
    50 * (n as u64) * (n as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub instance: String,
    pub starts: String,
    /// Recorded `(t, d(t))` pairs, always including `t = 0` and the final step.
    pub points: Vec<(u64, f64)>,
    /// First `t` with `d(t) <= eps`, per queried `eps`, or `None` when not reached.
    pub t_mix: Vec<(f64, Option<u64>)>,
    pub last_t: u64,
    pub last_d: f64,
    /// Largest observed one-step increase of `d`; non-positive up to rounding.
    pub max_increase: f64,
}

impl MixingProfile {
    pub fn mixed(&self) -> bool {
        self.t_mix.iter().all(|(_, t)| t.is_some())
    }

    pub fn t_mix_for(&self, eps: f64) -> Option<u64> {
        self.t_mix.iter().find(|(e, _)| *e == eps).and_then(|(_, t)| *t)
    }
}

/// Evolve the given initial distributions and record the worst-case distance
/// to uniform. Never fails on slow mixing; inspect [`MixingProfile::mixed`].
pub fn evolve_profile(
    g: &PerturbedCycle,
    w: &WalkParams,
    initial: Vec<DistVector>,
    starts_label: &str,
    opts: &ProfileOptions,
) -> Result<MixingProfile> {
    if initial.is_empty() {
        return Err(Error::Domain("start set is empty".into()));
    }
    for d in &initial {
        if d.len() != g.n() {
            return Err(Error::Dimension {
                expected: g.n(),
                got: d.len(),
            });
        }
        if (d.total() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("start distribution sums to {}", d.total())));
        }
    }
    for &e in &opts.eps {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Domain(format!("eps must lie in (0,1), got {e}")));
        }
    }
    let op = Operator::new(g, w)?;
    let t_max = opts.t_max.unwrap_or_else(|| default_t_max(g.n()));
    if t_max < 1 {
        return Err(Error::Domain("t_max must be at least 1".into()));
    }
    let every = opts.record_every.unwrap_or((t_max / 4096).max(1)).max(1);
    let floor = if opts.eps.is_empty() {
        f64::NEG_INFINITY
    } else {
        opts.eps.iter().cloned().fold(f64::INFINITY, f64::min)
    };

    let mut cur: Vec<Vec<f64>> = initial.into_iter().map(|d| d.0).collect();
    let mut next = vec![0.0; g.n()];
    let worst = |vs: &[Vec<f64>]| vs.iter().map(|v| tv_to_uniform(v)).fold(0.0, f64::max);

    let mut d = worst(&cur);
    let mut points = vec![(0, d)];
    let mut t_mix: Vec<(f64, Option<u64>)> = opts.eps.iter().map(|&e| (e, None)).collect();
    let mut max_increase = f64::NEG_INFINITY;
    let mut t = 0u64;
    let mark = |t_mix: &mut Vec<(f64, Option<u64>)>, t: u64, d: f64| {
        for (e, slot) in t_mix.iter_mut() {
            if slot.is_none() && d <= *e {
                *slot = Some(t);
            }
        }
    };
    mark(&mut t_mix, 0, d);

    while t < t_max && !(d <= floor) {
        let mut nd = 0.0f64;
        for v in cur.iter_mut() {
            nd = nd.max(op.step_into_tv(v, &mut next));
            std::mem::swap(v, &mut next);
        }
        t += 1;
        max_increase = max_increase.max(nd - d);
        d = nd;
        mark(&mut t_mix, t, d);
        if t % every == 0 {
            points.push((t, d));
        }
    }
    if points.last().map(|p| p.0) != Some(t) {
        points.push((t, d));
    }
    Ok(MixingProfile {
        instance: g.to_string(),
        starts: starts_label.to_string(),
        points,
        t_mix,
        last_t: t,
        last_d: d,
        max_increase: if t == 0 { 0.0 } else { max_increase },
    })
}

/// Worst-case distance profile over a start set. Fails with
/// [`Error::NotMixed`] when the smallest queried `eps` is not reached by `t_max`.
pub fn distance_profile(
    g: &PerturbedCycle,
    w: &WalkParams,
    starts: StartSet,
    opts: &ProfileOptions,
) -> Result<MixingProfile> {
    w.check_for(g)?;
    let initial = starts
        .vertices(g)?
        .into_iter()
        .map(|v| DistVector::point_mass(g.n(), v))
        .collect();
    let prof = evolve_profile(g, w, initial, &starts.to_string(), opts)?;
    if !prof.mixed() {
        return Err(Error::NotMixed {
            t_max: prof.last_t,
            last_d: prof.last_d,
        });
    }
    Ok(prof)
}

/// Least `t` with worst-case distance at most `eps`, evolving stepwise.
pub fn mixing_time(g: &PerturbedCycle, w: &WalkParams, eps: f64, starts: StartSet) -> Result<u64> {
    mixing_time_within(g, w, eps, starts, None)
}

pub fn mixing_time_within(
    g: &PerturbedCycle,
    w: &WalkParams,
    eps: f64,
    starts: StartSet,
    t_max: Option<u64>,
) -> Result<u64> {
    w.check_for(g)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
    }
    let n = g.n();
    let t_max = t_max.unwrap_or_else(|| default_t_max(n));
    let op = Operator::new(g, w)?;
    // Each start's distance is non-increasing, so the worst-case hitting time
    // is the largest per-start hitting time.
    let mut worst = 0u64;
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    for v in starts.vertices(g)? {
        cur.iter_mut().for_each(|x| *x = 0.0);
        cur[v] = 1.0;
        let mut d = tv_to_uniform(&cur);
        let mut t = 0u64;
        while d > eps {
            if t >= t_max {
                return Err(Error::NotMixed { t_max, last_d: d });
            }
            d = op.step_into_tv(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            t += 1;
        }
        worst = worst.max(t);
    }
    Ok(worst)
}

/// Worst pairwise distance `max_{i,j} ||P^t(i,.) - P^t(j,.)||_TV` for
/// `t = 0..=t_max`. Quadratic in `n` per step, so limited to small cycles.
pub fn pairwise_profile(g: &PerturbedCycle, w: &WalkParams, t_max: u64) -> Result<Vec<f64>> {
    const GUARD: usize = 256;
    let n = g.n();
    if n > GUARD {
        return Err(Error::Size {
            size: n as u128,
            guard: GUARD as u128,
        });
    }
    let op = Operator::new(g, w)?;
    let mut rows: Vec<Vec<f64>> = (0..n).map(|v| DistVector::point_mass(n, v).0).collect();
    let mut next = vec![0.0; n];
    let worst = |rows: &[Vec<f64>]| {
        let mut m = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let s: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).abs()).sum();
                m = m.max(0.5 * s);
            }
        }
        m
    };
    let mut out = vec![worst(&rows)];
    for _ in 0..t_max {
        for r in rows.iter_mut() {
            op.step_into(r, &mut next);
            std::mem::swap(r, &mut next);
        }
        out.push(worst(&rows));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares in log space.
    pub residual: f64,
}

/// Least-squares fit of `ln t = intercept + slope * ln n`.
pub fn exponent_fit(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(Error::Arity(format!(
            "exponent fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Arity("exponent fit needs distinct n values".into()));
    }
    if points.iter().any(|&(n, t)| !(n > 0.0 && t > 0.0)) {
        return Err(Error::Domain("exponent fit needs positive n and t".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    Ok(ExponentFit {
        slope,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_instance;

    #[test]
    fn tv_basics() {
        let d = DistVector(vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(tv_distance(&d, &d).unwrap(), 0.0);
        let pm = DistVector::point_mass(4, 0);
        assert!((tv_distance(&pm, &DistVector::uniform(4)).unwrap() - 0.75).abs() < 1e-15);
        let a = DistVector(vec![0.5, 0.5, 0.0, 0.0]);
        let b = DistVector(vec![0.0, 0.0, 0.5, 0.5]);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        assert!(matches!(
            tv_distance(&a, &DistVector::uniform(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn rotation_never_mixes() {
        let g = PerturbedCycle::cycle(12).unwrap();
        let w = WalkParams::new(1.0, 0.0, 0.0).unwrap();
        let opts = ProfileOptions {
            t_max: Some(500),
            eps: vec![0.25],
            ..Default::default()
        };
        match distance_profile(&g, &w, StartSet::Single(0), &opts) {
            Err(Error::NotMixed { t_max, last_d }) => {
                assert_eq!(t_max, 500);
                assert!((last_d - (1.0 - 1.0 / 12.0)).abs() < 1e-12);
            }
            other => panic!("expected not-mixed, got {other:?}"),
        }
    }

    #[test]
    fn uniform_start_is_mixed_at_zero() {
        let g = sample_instance(30, 2, 1).unwrap();
        let w = WalkParams::default();
        let opts = ProfileOptions {
            t_max: Some(10),
            eps: vec![0.9],
            ..Default::default()
        };
        let p = evolve_profile(&g, &w, vec![DistVector::uniform(30)], "uniform", &opts).unwrap();
        assert_eq!(p.t_mix_for(0.9), Some(0));
        assert!(p.points.iter().all(|(_, d)| *d < 1e-15));
    }

    #[test]
    fn point_start_profile_begins_at_one_minus_inv_n() {
        let g = sample_instance(40, 1, 2).unwrap();
        let opts = ProfileOptions {
            t_max: Some(2000),
            record_every: Some(1),
            eps: vec![],
        };
        let p = evolve_profile(&g, &WalkParams::default(), vec![DistVector::point_mass(40, 0)], "single:0", &opts)
            .unwrap();
        assert!((p.points[0].1 - (1.0 - 1.0 / 40.0)).abs() < 1e-12);
        assert_eq!(p.points.len(), 2001);
        assert!(p.max_increase <= 1e-12);
        assert!(p.points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
    }

    #[test]
    fn tiny_cycle_mixing_time() {
        // n = 4 lazy walk (loop 1/4): first t with d(t) <= 1/4 from a point mass
        let g = PerturbedCycle::cycle(4).unwrap();
        let w = WalkParams::new(0.5, 0.25, 0.0).unwrap();
        let t = mixing_time(&g, &w, 0.25, StartSet::Single(0)).unwrap();
        assert_eq!(t, TINY_CYCLE_TMIX);
    }

    // Frozen from dense matrix powering: d(0)=3/4, d(1)=1/4 exactly.
    const TINY_CYCLE_TMIX: u64 = 1;

    #[test]
    fn fast_path_agrees_with_profile() {
        for seed in 0..6 {
            let g = sample_instance(60, 2, seed).unwrap();
            let w = WalkParams::new(0.55, 0.15, 0.2).unwrap();
            for starts in [StartSet::All, StartSet::Hubs, StartSet::Single(7)] {
                let opts = ProfileOptions {
                    eps: vec![0.1],
                    ..Default::default()
                };
                let prof = distance_profile(&g, &w, starts, &opts).unwrap();
                assert_eq!(mixing_time(&g, &w, 0.1, starts).unwrap(), prof.t_mix_for(0.1).unwrap());
            }
        }
    }

    #[test]
    fn fused_distance_matches_separate_pass() {
        let g = sample_instance(97, 3, 1).unwrap();
        let op = Operator::new(&g, &WalkParams::default()).unwrap();
        let mut a = DistVector::point_mass(97, 5).0;
        let mut b = vec![0.0; 97];
        for _ in 0..50 {
            let d = op.step_into_tv(&a, &mut b);
            assert!((d - tv_to_uniform(&b)).abs() < 1e-14);
            std::mem::swap(&mut a, &mut b);
        }
    }

    #[test]
    fn start_sets() {
        let g = PerturbedCycle::from_edges(20, &[(0, 10)]).unwrap();
        assert_eq!(StartSet::Hubs.vertices(&g).unwrap(), vec![0, 1, 9, 10, 11, 19]);
        assert_eq!(StartSet::All.vertices(&g).unwrap().len(), 20);
        assert!(StartSet::Single(20).vertices(&g).is_err());
        for s in ["all", "hubs", "single:7"] {
            assert_eq!(s.parse::<StartSet>().unwrap().to_string(), s);
        }
        assert!("single:x".parse::<StartSet>().is_err());
    }

    #[test]
    fn fit_recovers_synthetic_exponents() {
        let pts: Vec<(f64, f64)> = [100.0, 300.0, 1000.0, 5000.0]
            .iter()
            .map(|&n: &f64| (n, 7.0 * n.powf(1.5)))
            .collect();
        let f = exponent_fit(&pts).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-9);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-9);
        assert!(f.residual < 1e-18);
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&n: &f64| (n, 3.0 * n * n)).collect();
        assert!((exponent_fit(&pts).unwrap().slope - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fit_arity() {
        assert!(matches!(exponent_fit(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::Arity(_))));
        assert!(exponent_fit(&[(1.0, 1.0), (1.0, 2.0), (3.0, 2.0)]).is_err());
    }

    #[test]
    fn pairwise_is_submultiplicative() {
        let g = sample_instance(14, 2, 6).unwrap();
        let w = WalkParams::new(0.45, 0.15, 0.3).unwrap();
        let d = pairwise_profile(&g, &w, 60).unwrap();
        for s in 1..30 {
            for t in 1..30 {
                assert!(d[s + t] <= d[s] * d[t] + 1e-9, "s={s} t={t}");
            }
        }
    }
}
