//! Trajectory simulation and the statistics of the loop-erased track.
//!
//! The loop erasure is taken on the universal cover. Each cycle copy in the
//! cover is a line `Z`; crossing a chord either opens a new line (pushed on a
//! stack) or, when done from the point where the current line was entered,
//! returns to the parent line (popped). At the stopping time the stack is the
//! loop-erased track: a sequence of line segments joined by chord crossings.
//!
//! Decisions are read off that track. A hub passed straight through while
//! moving forward is a `G` decision at that hub; a chord crossed from hub `j`
//! is a `J` decision at `j`. The traffic `y_i` is the net signed number of
//! crossings of chord `i`, and arc usages count forward passes of the track.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{log2n, PerturbedCycle};
use crate::kernel::{apply_move, sample_move, Move, WalkParams};
use crate::rng;

/// Usage of one cycle segment between consecutive cut points (hubs, start,
/// endpoint): net forward crossings of each edge inside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentUsage {
    pub start: usize,
    pub len: usize,
    pub usage: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    pub x0: usize,
    #[serde(rename = "L")]
    pub travel: u64,
    pub tau: u64,
    pub max_backtrack: u64,
    pub n_g: Vec<u64>,
    pub n_j: Vec<u64>,
    pub y: Vec<i64>,
    /// `u_j = N_G(j) + N_J(m(j))`: departures of the track into arc `j`.
    pub u: Vec<i64>,
    pub endpoint: usize,
    pub b2_held: bool,
    /// The track left the start arc backwards before committing forward.
    pub initial_backtrack: bool,
    /// Pieces of the loop-erased track that run backwards along the cycle.
    pub backward_segments: u64,
    pub segments: Vec<SegmentUsage>,
}

impl TrackStats {
    /// `x0 + L + sum y_i l_i (mod n)`.
    pub fn predicted_endpoint(&self, g: &PerturbedCycle) -> usize {
        predicted_endpoint(g, self.x0, self.travel as i64, &self.y)
    }
}

pub fn predicted_endpoint(g: &PerturbedCycle, x0: usize, travel: i64, y: &[i64]) -> usize {
    let n = g.n() as i64;
    let shift: i64 = y
        .iter()
        .zip(g.lengths())
        .map(|(y, l)| (y.rem_euclid(n) * l.rem_euclid(n)) % n)
        .sum();
    (x0 as i64 + travel + shift).rem_euclid(n) as usize
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    entry: i64,
    /// Coordinate the chord to the next frame was taken from.
    exit: i64,
}

/// Number of integers `c` in `[lo, hi)` with `c == h (mod n)`.
fn lifts_in(lo: i64, hi: i64, h: i64, n: i64) -> u64 {
    if hi <= lo {
        return 0;
    }
    ((hi - 1 - h).div_euclid(n) - (lo - 1 - h).div_euclid(n)) as u64
}

/// Simulate from `x0` until the cycle displacement first reaches `travel`.
pub fn run_track(
    g: &PerturbedCycle,
    w: &WalkParams,
    x0: usize,
    travel: u64,
    seed: u64,
) -> Result<TrackStats> {
    w.validate()?;
    let budget = (100.0 * travel as f64 / w.drift()).ceil() as u64;
    run_track_budget(g, w, x0, travel, seed, budget)
}

fn run_track_budget(
    g: &PerturbedCycle,
    w: &WalkParams,
    x0: usize,
    travel: u64,
    seed: u64,
    budget: u64,
) -> Result<TrackStats> {
    if travel < 1 {
        return Err(Error::Domain("travel distance L must be at least 1".into()));
    }
    if x0 >= g.n() {
        return Err(Error::Domain(format!("start {x0} outside [0,{})", g.n())));
    }
    let n = g.n();
    let ni = n as i64;
    let h = g.hubs().len();
    let mut rng = rng::seeded(seed);

    let mut v = x0;
    let mut z = x0 as i64;
    let mut frames = vec![Frame { entry: z, exit: z }];
    let mut beta = 0i64;
    let mut peak = 0i64;
    let mut max_back = 0i64;
    let mut cross = vec![0i64; n];
    let mut t = 0u64;

    while beta < travel as i64 {
        if t >= budget {
            return Err(Error::Runaway { budget, travel });
        }
        t += 1;
        let mv = sample_move(g, w, v, &mut rng);
        match mv {
            Move::Forward => {
                cross[v] += 1;
                z += 1;
                beta += 1;
                peak = peak.max(beta);
            }
            Move::Backward => {
                cross[if v == 0 { n - 1 } else { v - 1 }] -= 1;
                z -= 1;
                beta -= 1;
                max_back = max_back.max(peak - beta);
            }
            Move::Across => {
                let target = apply_move(g, v, mv);
                let top = frames.len() - 1;
                if top > 0 && z == frames[top].entry {
                    frames.pop();
                    z = frames[top - 1].exit;
                } else {
                    frames[top].exit = z;
                    z = target as i64;
                    frames.push(Frame { entry: z, exit: z });
                }
            }
            Move::Stay => {}
        }
        v = apply_move(g, v, mv);
    }
    let last = frames.len() - 1;
    frames[last].exit = z;

    // Read decisions off the loop-erased track.
    let mut n_g = vec![0u64; h];
    let mut n_j = vec![0u64; h];
    let mut backward_segments = 0u64;
    let mut initial_backtrack = false;
    for (f, fr) in frames.iter().enumerate() {
        let (s, e) = (fr.entry, fr.exit);
        if f < last {
            let j = g.hub_index(e.rem_euclid(ni) as usize).expect("chord leaves from a hub");
            n_j[j] += 1;
        }
        if e >= s {
            // the entry point of a jumped-to line continues the jump, so it is
            // not a fresh decision; the root's entry is
            let lo = if f == 0 { s } else { s + 1 };
            for (j, &hv) in g.hubs().iter().enumerate() {
                n_g[j] += lifts_in(lo, e, hv as i64, ni);
            }
        } else {
            if f == 0 {
                initial_backtrack = true;
            }
            backward_segments += 1;
        }
    }
    let mut y = vec![0i64; g.k()];
    for (i, &(lo, hi)) in g.edges().iter().enumerate() {
        y[i] = n_j[lo] as i64 - n_j[hi] as i64;
    }
    let u = (0..h)
        .map(|j| n_g[j] as i64 + n_j[g.partner(j)] as i64)
        .collect();

    let segments = cut_segments(g, x0, v)
        .into_iter()
        .map(|(start, len)| SegmentUsage {
            start,
            len,
            usage: cross[start],
        })
        .collect();

    Ok(TrackStats {
        x0,
        travel,
        tau: t,
        max_backtrack: max_back as u64,
        n_g,
        n_j,
        y,
        u,
        endpoint: v,
        b2_held: (max_back as f64) < log2n(n),
        initial_backtrack,
        backward_segments,
        segments,
    })
}

/// Cycle segments `[c, c')` between consecutive distinct cut points
/// (hubs, `x0`, `endpoint`), starting from the smallest cut point.
pub fn cut_segments(g: &PerturbedCycle, x0: usize, endpoint: usize) -> Vec<(usize, usize)> {
    let n = g.n();
    let mut cuts: Vec<usize> = g.hubs().to_vec();
    cuts.push(x0);
    cuts.push(endpoint);
    cuts.sort_unstable();
    cuts.dedup();
    (0..cuts.len())
        .map(|i| {
            let next = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + n };
            (cuts[i], next - cuts[i])
        })
        .collect()
}

/// Rebuild segment usages from the traffic vector alone, using flow
/// conservation at every cut point and `sum len * usage = L`.
pub fn reconstruct_segments(
    g: &PerturbedCycle,
    x0: usize,
    endpoint: usize,
    travel: u64,
    y: &[i64],
) -> Result<Vec<SegmentUsage>> {
    if y.len() != g.k() {
        return Err(Error::Arity(format!("{} traffic entries for k={}", y.len(), g.k())));
    }
    let segs = cut_segments(g, x0, endpoint);
    // offset of each segment relative to the first
    let mut rel = vec![0i64; segs.len()];
    for i in 1..segs.len() {
        let c = segs[i].0;
        let mut delta = 0i64;
        if let Some(j) = g.hub_index(c) {
            let (e, sign) = g.edge_of_hub(j);
            delta -= sign * y[e];
        }
        if c == x0 {
            delta += 1;
        }
        if c == endpoint {
            delta -= 1;
        }
        rel[i] = rel[i - 1] + delta;
    }
    let weighted: i64 = segs.iter().zip(&rel).map(|(s, r)| s.1 as i64 * r).sum();
    let rest = travel as i64 - weighted;
    let n = g.n() as i64;
    if rest.rem_euclid(n) != 0 {
        return Err(Error::Domain(format!(
            "traffic {y:?} is inconsistent with endpoint {endpoint} (residual {})",
            rest.rem_euclid(n)
        )));
    }
    let base = rest / n;
    Ok(segs
        .into_iter()
        .zip(rel)
        .map(|((start, len), r)| SegmentUsage {
            start,
            len,
            usage: base + r,
        })
        .collect())
}

/// Independent tracks from `x0` with per-trial seeds derived from `seed`.
pub fn run_tracks(
    g: &PerturbedCycle,
    w: &WalkParams,
    x0: usize,
    travel: u64,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrackStats>> {
    (0..trials)
        .into_par_iter()
        .map(|i| run_track(g, w, x0, travel, rng::derive(seed, &[i as u64])))
        .collect()
}

/// Empirical eventual-continuation frequencies at one hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEstimate {
    pub hub: usize,
    pub trials: u64,
    pub go: u64,
    pub jump: u64,
    pub backtrack: u64,
    pub p_g: f64,
    pub p_j: f64,
    pub se_g: f64,
    pub se_j: f64,
    pub backtrack_freq: f64,
}

impl DecisionEstimate {
    fn from_counts(hub: usize, go: u64, jump: u64, backtrack: u64) -> Self {
        let trials = go + jump + backtrack;
        let t = trials.max(1) as f64;
        let (pg, pj) = (go as f64 / t, jump as f64 / t);
        DecisionEstimate {
            hub,
            trials,
            go,
            jump,
            backtrack,
            p_g: pg,
            p_j: pj,
            se_g: (pg * (1.0 - pg) / t).sqrt(),
            se_j: (pj * (1.0 - pj) / t).sqrt(),
            backtrack_freq: backtrack as f64 / t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Go,
    Jump,
    Backtrack,
}

/// The two cycle copies meeting at a hub and its partner, as seen from the hub:
/// forward and backward distances to the next hubs on each side.
#[derive(Debug, Clone, Copy)]
struct HubNeighbourhood {
    root_fwd: i64,
    root_back: i64,
    partner_fwd: i64,
    partner_back: i64,
}

impl HubNeighbourhood {
    fn new(g: &PerturbedCycle, hub: usize) -> Self {
        let h = g.hubs().len();
        let arcs = g.arcs();
        let m = g.partner(hub);
        HubNeighbourhood {
            root_fwd: arcs[hub] as i64,
            root_back: arcs[(hub + h - 1) % h] as i64,
            partner_fwd: arcs[m] as i64,
            partner_back: arcs[(m + h - 1) % h] as i64,
        }
    }

    fn limits(&self, partner_side: bool) -> (i64, i64) {
        if partner_side {
            (self.partner_fwd, self.partner_back)
        } else {
            (self.root_fwd, self.root_back)
        }
    }
}

/// Probability that a biased walk (up `p`, down `q`) started at 1 reaches
/// `top` before 0.
fn climb_prob(p: f64, q: f64, top: i64) -> f64 {
    if q == 0.0 {
        return 1.0;
    }
    let r = q / p;
    (1.0 - r) / (1.0 - r.powi(top as i32))
}

/// Probability that the same walk started at -1 reaches `-bottom` before 0.
fn fall_prob(p: f64, q: f64, bottom: i64) -> f64 {
    if q == 0.0 {
        return if bottom == 1 { 1.0 } else { 0.0 };
    }
    let r = q / p;
    r.powi((bottom - 1) as i32) * (1.0 - r) / (1.0 - r.powi(bottom as i32))
}

fn decide_fast(nb: &HubNeighbourhood, w: &WalkParams, rng: &mut rng::Rng) -> Outcome {
    let mut partner_side = false;
    loop {
        let u: f64 = rng.random();
        let (fwd, back) = nb.limits(partner_side);
        if u < w.p {
            // excursion into the forward arc: finish it or come back
            if rng.random::<f64>() < climb_prob(w.p, w.q, fwd) {
                return if partner_side { Outcome::Jump } else { Outcome::Go };
            }
        } else if u < w.p + w.q {
            if rng.random::<f64>() < fall_prob(w.p, w.q, back) {
                return Outcome::Backtrack;
            }
        } else if u < w.p + w.q + w.a {
            partner_side = !partner_side;
        }
    }
}

fn decide_stepwise(nb: &HubNeighbourhood, w: &WalkParams, rng: &mut rng::Rng) -> Outcome {
    let mut partner_side = false;
    let mut z = 0i64;
    loop {
        let u: f64 = rng.random();
        let mv = crate::kernel::classify(u, w, z == 0);
        match mv {
            Move::Forward => z += 1,
            Move::Backward => z -= 1,
            Move::Across => partner_side = !partner_side,
            Move::Stay => {}
        }
        let (fwd, back) = nb.limits(partner_side);
        if z == fwd {
            return if partner_side { Outcome::Jump } else { Outcome::Go };
        }
        if z == -back {
            return Outcome::Backtrack;
        }
    }
}

fn tally(hub: usize, outcomes: impl Iterator<Item = Outcome>) -> DecisionEstimate {
    let (mut go, mut jump, mut back) = (0, 0, 0);
    for o in outcomes {
        match o {
            Outcome::Go => go += 1,
            Outcome::Jump => jump += 1,
            Outcome::Backtrack => back += 1,
        }
    }
    DecisionEstimate::from_counts(hub, go, jump, back)
}

fn check_hub(g: &PerturbedCycle, hub: usize) -> Result<()> {
    if hub >= g.hubs().len() {
        return Err(Error::Domain(format!("hub index {hub} but only {} hubs", g.hubs().len())));
    }
    Ok(())
}

/// Start at hub `hub` and classify which hub is reached next: the following
/// hub along the cycle (G), the hub after the partner via the chord (J), or a
/// preceding hub (backtrack).
///
/// Excursions away from the hub are resolved with their exact gambler's-ruin
/// exit law instead of step by step; the outcome distribution is that of the
/// walk itself.
pub fn estimate_decisions(
    g: &PerturbedCycle,
    w: &WalkParams,
    hub: usize,
    trials: u64,
    seed: u64,
) -> Result<DecisionEstimate> {
    w.validate()?;
    check_hub(g, hub)?;
    let nb = HubNeighbourhood::new(g, hub);
    let mut rng = rng::seeded(seed);
    Ok(tally(hub, (0..trials).map(|_| decide_fast(&nb, w, &mut rng))))
}

/// Same classification as [`estimate_decisions`], simulating every step.
pub fn estimate_decisions_stepwise(
    g: &PerturbedCycle,
    w: &WalkParams,
    hub: usize,
    trials: u64,
    seed: u64,
) -> Result<DecisionEstimate> {
    w.validate()?;
    check_hub(g, hub)?;
    let nb = HubNeighbourhood::new(g, hub);
    let mut rng = rng::seeded(seed);
    Ok(tally(hub, (0..trials).map(|_| decide_stepwise(&nb, w, &mut rng))))
}

/// Limits of the eventual continuation probabilities on two infinite lines
/// joined at a chord: `p_G = (p-q+a)/(p-q+2a)`, `p_J = a/(p-q+2a)`.
pub fn pg_closed_form(w: &WalkParams) -> Result<(f64, f64)> {
    if !(w.p > w.q) || w.a < 0.0 {
        return Err(Error::Domain(format!("need p > q and a >= 0 (p={}, q={}, a={})", w.p, w.q, w.a)));
    }
    let d = w.p - w.q + 2.0 * w.a;
    Ok(((w.p - w.q + w.a) / d, w.a / d))
}

/// Solve `A x = b` for several right-hand sides by Gaussian elimination with
/// partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Degenerate(format!("zero pivot in column {col}")));
        }
        a.swap(col, piv);
        for r in rhs.iter_mut() {
            r.swap(col, piv);
        }
        let inv = 1.0 / a[col][col];
        for row in col + 1..n {
            let f = a[row][col] * inv;
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(row);
            for (x, &y) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * y;
            }
            for r in rhs.iter_mut() {
                r[row] -= f * r[col];
            }
        }
    }
    for r in rhs.iter_mut() {
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|c| a[row][c] * r[c]).sum();
            r[row] = (r[row] - s) / a[row][row];
        }
    }
    Ok(rhs)
}

/// Exact continuation probabilities on two segments `[-arm, arm]` joined by
/// a chord at 0, absorbed at the far ends; reaching `+arm` on the starting
/// segment is G, on the other segment J. Returned conditional on not exiting
/// through `-arm`.
pub fn absorption_oracle(w: &WalkParams, arm: usize) -> Result<(f64, f64)> {
    if arm < 2 {
        return Err(Error::Domain(format!("arm must be at least 2, got {arm}")));
    }
    if w.p + w.q <= 0.0 {
        return Err(Error::Degenerate("p = q = 0 leaves the walk stuck".into()));
    }
    let arm = arm as i64;
    let per = (2 * arm - 1) as usize;
    let idx = |side: usize, x: i64| side * per + (x + arm - 1) as usize;
    let size = 2 * per;
    let mut mat = vec![vec![0.0; size]; size];
    let mut go = vec![0.0; size];
    let mut jump = vec![0.0; size];
    for side in 0..2 {
        for x in (1 - arm)..arm {
            let r = idx(side, x);
            let hub = x == 0;
            mat[r][r] = w.p + w.q + if hub { w.a } else { 0.0 };
            for (nx, prob) in [(x + 1, w.p), (x - 1, w.q)] {
                if nx == arm {
                    if side == 0 {
                        go[r] += prob;
                    } else {
                        jump[r] += prob;
                    }
                } else if nx > -arm {
                    mat[r][idx(side, nx)] -= prob;
                }
            }
            if hub {
                mat[r][idx(1 - side, 0)] -= w.a;
            }
        }
    }
    let sol = solve_dense(mat, vec![go, jump])?;
    let start = idx(0, 0);
    let (pg, pj) = (sol[0][start], sol[1][start]);
    let total = pg + pj;
    if !(total > 0.0) {
        return Err(Error::Degenerate("walk never reaches a far end".into()));
    }
    Ok((pg / total, pj / total))
}

/// Gambler's-ruin facts for the biased lazy walk along the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamblerFacts {
    /// `q / p`.
    pub ratio: f64,
    /// Mean hitting time of `+1` from 0: `1 / (p - q)`, whatever the loop mass.
    pub expected_tau1: f64,
}

impl GamblerFacts {
    /// Probability of ever reaching `-b` from 0: `(q/p)^b`.
    pub fn escape_prob(&self, b: u32) -> f64 {
        if b == 0 {
            1.0
        } else {
            self.ratio.powi(b as i32)
        }
    }
}

pub fn gambler_facts(w: &WalkParams) -> Result<GamblerFacts> {
    if !(w.p > w.q) || w.q < 0.0 {
        return Err(Error::Domain(format!("need p > q >= 0 (p={}, q={})", w.p, w.q)));
    }
    Ok(GamblerFacts {
        ratio: w.q / w.p,
        expected_tau1: 1.0 / (w.p - w.q),
    })
}

/// Monte Carlo mean and standard error of the hitting time of `+1` from 0.
pub fn simulate_tau1(w: &WalkParams, runs: u64, seed: u64) -> Result<(f64, f64)> {
    gambler_facts(w)?;
    if runs < 2 {
        return Err(Error::Domain("need at least 2 runs".into()));
    }
    let mut rng = rng::seeded(seed);
    let (mut sum, mut sq) = (0.0f64, 0.0f64);
    for _ in 0..runs {
        let mut pos = 0i64;
        let mut t = 0u64;
        while pos < 1 {
            let u: f64 = rng.random();
            t += 1;
            if u < w.p {
                pos += 1;
            } else if u < w.p + w.q {
                pos -= 1;
            }
        }
        sum += t as f64;
        sq += (t * t) as f64;
    }
    let m = runs as f64;
    let mean = sum / m;
    let var = (sq - m * mean * mean) / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}

/// Endpoint statistics for one realized traffic vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadBucket {
    pub y: Vec<i64>,
    pub count: u64,
    /// Mean of `X_T - (x0 + L + sum y_i l_i)`, lifted to `(-n/2, n/2]`.
    pub mean_offset: f64,
    pub std_offset: f64,
    pub se_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSpread {
    pub time: u64,
    /// `(p - q) T`.
    pub travel: f64,
    pub trials: u64,
    pub buckets: Vec<SpreadBucket>,
}

impl EndpointSpread {
    pub fn bucket(&self, y: &[i64]) -> Option<&SpreadBucket> {
        self.buckets.iter().find(|b| b.y == y)
    }

    pub fn largest(&self) -> Option<&SpreadBucket> {
        self.buckets.iter().max_by_key(|b| b.count)
    }
}

/// Run to the fixed time `time` and return `(X_T, net chord traffic)`.
pub fn run_fixed_time(
    g: &PerturbedCycle,
    w: &WalkParams,
    x0: usize,
    time: u64,
    seed: u64,
) -> (usize, Vec<i64>) {
    let mut rng = rng::seeded(seed);
    let mut v = x0;
    let mut y = vec![0i64; g.k()];
    for _ in 0..time {
        let mv = sample_move(g, w, v, &mut rng);
        if mv == Move::Across {
            let (e, sign) = g.edge_of_hub(g.hub_index(v).expect("hub"));
            y[e] += sign;
        }
        v = apply_move(g, v, mv);
    }
    (v, y)
}

/// Bucket trials run to time `time` by their traffic vector and summarize the
/// endpoint around each bucket's predicted centre.
pub fn conditional_endpoint_spread(
    g: &PerturbedCycle,
    w: &WalkParams,
    x0: usize,
    time: u64,
    trials: u64,
    seed: u64,
) -> Result<EndpointSpread> {
    w.validate()?;
    if time < 1 {
        return Err(Error::Domain("time must be at least 1".into()));
    }
    if x0 >= g.n() {
        return Err(Error::Domain(format!("start {x0} outside [0,{})", g.n())));
    }
    let n = g.n() as f64;
    let travel = w.drift() * time as f64;
    let runs: Vec<(usize, Vec<i64>)> = (0..trials)
        .into_par_iter()
        .map(|i| run_fixed_time(g, w, x0, time, rng::derive(seed, &[i])))
        .collect();
    let mut groups: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    for (end, y) in runs {
        let centre = predicted_endpoint(g, x0, 0, &y) as f64 + travel;
        let mut off = (end as f64 - centre).rem_euclid(n);
        if 2.0 * off > n {
            off -= n;
        }
        groups.entry(y).or_default().push(off);
    }
    let buckets = groups
        .into_iter()
        .map(|(y, offs)| {
            let c = offs.len() as f64;
            let mean = offs.iter().sum::<f64>() / c;
            let var = if offs.len() > 1 {
                offs.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / (c - 1.0)
            } else {
                0.0
            };
            SpreadBucket {
                y,
                count: offs.len() as u64,
                mean_offset: mean,
                std_offset: var.sqrt(),
                se_mean: (var / c).sqrt(),
            }
        })
        .collect();
    Ok(EndpointSpread {
        time,
        travel,
        trials,
        buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_instance;

    #[test]
    fn deterministic_rotation_track() {
        let g = PerturbedCycle::cycle(12).unwrap();
        let w = WalkParams::new(1.0, 0.0, 0.0).unwrap();
        let s = run_track(&g, &w, 0, 5, 1).unwrap();
        assert_eq!(s.tau, 5);
        assert_eq!(s.endpoint, 5);
        assert_eq!(s.max_backtrack, 0);
        assert!(s.b2_held);
        assert_eq!(s.segments, vec![
            SegmentUsage { start: 0, len: 5, usage: 1 },
            SegmentUsage { start: 5, len: 7, usage: 0 },
        ]);
    }

    #[test]
    fn lift_counting() {
        assert_eq!(lifts_in(0, 10, 3, 10), 1);
        assert_eq!(lifts_in(0, 3, 3, 10), 0);
        assert_eq!(lifts_in(-20, 25, 3, 10), 5);
        assert_eq!(lifts_in(5, 5, 5, 10), 0);
    }

    #[test]
    fn endpoint_identity_and_flow() {
        let g = PerturbedCycle::from_edges(400, &[(10, 170), (90, 300)]).unwrap();
        let w = WalkParams::default();
        for seed in 0..200 {
            let s = run_track(&g, &w, 37, 2000, seed).unwrap();
            assert_eq!(s.endpoint, s.predicted_endpoint(&g));
            let rebuilt = reconstruct_segments(&g, s.x0, s.endpoint, s.travel, &s.y).unwrap();
            assert_eq!(rebuilt, s.segments, "seed {seed}");
            if s.backward_segments == 0 {
                for (j, &hv) in g.hubs().iter().enumerate() {
                    let seg = s.segments.iter().find(|x| x.start == hv).unwrap();
                    assert_eq!(s.u[j], seg.usage, "seed {seed} hub {j}");
                }
            }
        }
    }

    #[test]
    fn runaway_budget() {
        let g = PerturbedCycle::cycle(10).unwrap();
        let w = WalkParams::default();
        assert!(matches!(
            run_track_budget(&g, &w, 0, 100, 3, 150),
            Err(Error::Runaway { budget: 150, travel: 100 })
        ));
        assert!(run_track_budget(&g, &w, 0, 100, 3, 100_000).is_ok());
    }

    #[test]
    fn closed_form_values() {
        let (g, j) = pg_closed_form(&WalkParams::default()).unwrap();
        assert_eq!((g, j), (2.0 / 3.0, 1.0 / 3.0));
        let (g, j) = pg_closed_form(&WalkParams::new(0.4, 0.0, 0.3).unwrap()).unwrap();
        assert!((g - 0.7).abs() < 1e-15 && (j - 0.3).abs() < 1e-15);
        assert_eq!(pg_closed_form(&WalkParams::new(0.6, 0.2, 0.0).unwrap()).unwrap(), (1.0, 0.0));
        let flat = WalkParams { p: 0.3, q: 0.3, a: 0.2 };
        assert!(matches!(pg_closed_form(&flat), Err(Error::Domain(_))));
    }

    #[test]
    fn absorption_converges_to_closed_form() {
        let w = WalkParams::default();
        let (cg, _) = pg_closed_form(&w).unwrap();
        let errs: Vec<f64> = [25, 50, 100, 200]
            .iter()
            .map(|&arm| (absorption_oracle(&w, arm).unwrap().0 - cg).abs())
            .collect();
        assert!(errs[3] < 1e-8);
        let a100 = absorption_oracle(&w, 100).unwrap().0;
        let a200 = absorption_oracle(&w, 200).unwrap().0;
        assert!((a100 - a200).abs() < 1e-6);
        assert!(errs.windows(2).all(|e| e[1] <= e[0]), "{errs:?}");
    }

    #[test]
    fn absorption_without_chord() {
        let w = WalkParams::new(0.5, 0.3, 0.0).unwrap();
        for arm in [2, 5, 40] {
            assert_eq!(absorption_oracle(&w, arm).unwrap(), (1.0, 0.0));
        }
        assert!(absorption_oracle(&WalkParams::default(), 1).is_err());
        let stuck = WalkParams { p: 0.0, q: 0.0, a: 0.0 };
        assert!(matches!(absorption_oracle(&stuck, 10), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gambler_closed_forms() {
        let f = gambler_facts(&WalkParams::default()).unwrap();
        assert_eq!(f.escape_prob(1), 0.5);
        assert_eq!(f.expected_tau1, 4.0);
        let f = gambler_facts(&WalkParams::new(0.7, 0.0, 0.3).unwrap()).unwrap();
        assert_eq!(f.escape_prob(3), 0.0);
        assert!(gambler_facts(&WalkParams { p: 0.2, q: 0.3, a: 0.0 }).is_err());
    }

    #[test]
    fn ruin_probabilities() {
        // top = 1 means the first forward step already finishes the arc
        assert_eq!(climb_prob(0.5, 0.25, 1), 1.0);
        assert_eq!(fall_prob(0.5, 0.25, 1), 1.0);
        // from 1, reach 2 before 0: p/(p+q)
        assert!((climb_prob(0.5, 0.25, 2) - 2.0 / 3.0).abs() < 1e-15);
        // from -1, reach -2 before 0: q/(p+q)
        assert!((fall_prob(0.5, 0.25, 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fast_and_stepwise_decisions_agree() {
        let g = PerturbedCycle::from_edges(200, &[(20, 110)]).unwrap();
        let w = WalkParams::new(0.45, 0.2, 0.2).unwrap();
        let a = estimate_decisions(&g, &w, 0, 20_000, 1).unwrap();
        let b = estimate_decisions_stepwise(&g, &w, 0, 20_000, 2).unwrap();
        let se = (a.se_g.powi(2) + b.se_g.powi(2)).sqrt();
        assert!((a.p_g - b.p_g).abs() < 4.0 * se, "{} vs {}", a.p_g, b.p_g);
    }

    #[test]
    fn no_chord_mass_means_always_go() {
        let g = PerturbedCycle::from_edges(1000, &[(0, 500)]).unwrap();
        let w = WalkParams::new(0.6, 0.2, 0.0).unwrap();
        let e = estimate_decisions(&g, &w, 0, 1000, 0).unwrap();
        assert_eq!(e.p_g, 1.0);
        assert!(estimate_decisions(&g, &w, 2, 10, 0).is_err());
    }

    #[test]
    fn fixed_time_identity() {
        let g = sample_instance(300, 2, 4).unwrap();
        let w = WalkParams::default();
        let sp = conditional_endpoint_spread(&g, &w, 0, 400, 300, 9).unwrap();
        assert_eq!(sp.buckets.iter().map(|b| b.count).sum::<u64>(), 300);
        // offsets are beta(0,T) - (p-q)T: mean near zero
        for b in sp.buckets.iter().filter(|b| b.count > 30) {
            assert!(b.mean_offset.abs() < 4.0 * b.se_mean + 1.0);
        }
    }

    #[test]
    fn arc_usage_recovers_travel() {
        let g = sample_instance(10_000, 1, 11).unwrap();
        let w = WalkParams::default();
        let travel = (0.1 * 1e6) as u64;
        let max_arc = *g.arcs().iter().max().unwrap() as i64;
        for seed in 0..3 {
            let s = run_track(&g, &w, 0, travel, seed).unwrap();
            assert_eq!(s.backward_segments, 0);
            let total: i64 = s.u.iter().zip(g.arcs()).map(|(u, &a)| u * a as i64).sum();
            assert!((total - travel as i64).abs() <= max_arc, "{total} vs {travel}");
        }
    }

    #[test]
    fn cycle_spread_matches_step_variance() {
        let g = PerturbedCycle::cycle(100_000).unwrap();
        let w = WalkParams::default();
        let var = w.p + w.q - w.drift() * w.drift();
        let sp = conditional_endpoint_spread(&g, &w, 0, 2000, 4000, 5).unwrap();
        assert_eq!(sp.buckets.len(), 1);
        let want = (var * 2000.0).sqrt();
        let got = sp.buckets[0].std_offset;
        assert!((got / want - 1.0).abs() < 0.1, "{got} vs {want}");
    }

    #[test]
    fn tracks_are_reproducible() {
        let g = sample_instance(500, 1, 3).unwrap();
        let a = run_tracks(&g, &WalkParams::default(), 0, 300, 8, 42).unwrap();
        let b = run_tracks(&g, &WalkParams::default(), 0, 300, 8, 42).unwrap();
        assert_eq!(a, b);
    }
}
