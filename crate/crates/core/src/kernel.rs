//! The transition operator: forward `p`, backward `q`, across `a` at hubs,
//! remaining mass as a loop.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PerturbedCycle;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub p: f64,
    pub q: f64,
    pub a: f64,
}

const SUM_SLACK: f64 = 1e-12;

impl WalkParams {
    pub fn new(p: f64, q: f64, a: f64) -> Result<Self> {
        let w = WalkParams { p, q, a };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let WalkParams { p, q, a } = *self;
        if !(p.is_finite() && q.is_finite() && a.is_finite()) {
            return Err(Error::InvalidParams("non-finite probability".into()));
        }
        if q < 0.0 || a < 0.0 {
            return Err(Error::InvalidParams(format!("need q >= 0 and a >= 0 (q={q}, a={a})")));
        }
        if p <= q {
            return Err(Error::InvalidParams(format!("need p > q (p={p}, q={q})")));
        }
        if p + q + a > 1.0 + SUM_SLACK {
            return Err(Error::InvalidParams(format!("p + q + a = {} > 1", p + q + a)));
        }
        Ok(())
    }

    /// Full check against an instance: chords must be usable when present.
    pub fn check_for(&self, g: &PerturbedCycle) -> Result<()> {
        self.validate()?;
        if g.k() > 0 && self.a <= 0.0 {
            return Err(Error::InvalidParams("a must be positive when k > 0".into()));
        }
        Ok(())
    }

    /// Loop probability at a non-hub (`hub = false`) or hub vertex.
    pub fn loop_mass(&self, hub: bool) -> f64 {
        let base = (1.0 - self.p - self.q).max(0.0);
        if hub {
            (base - self.a).max(0.0)
        } else {
            base
        }
    }

    pub fn drift(&self) -> f64 {
        self.p - self.q
    }
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            p: 0.5,
            q: 0.25,
            a: 0.25,
        }
    }
}

/// A probability vector over the `n` cycle vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector(pub Vec<f64>);

impl DistVector {
    pub fn point_mass(n: usize, v: usize) -> Self {
        let mut d = vec![0.0; n];
        d[v] = 1.0;
        DistVector(d)
    }

    pub fn uniform(n: usize) -> Self {
        DistVector(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Outcome of a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Forward,
    Backward,
    Across,
    Stay,
}

fn check_vertex(g: &PerturbedCycle, v: usize) -> Result<()> {
    if v >= g.n() {
        return Err(Error::Domain(format!("vertex {v} outside [0,{})", g.n())));
    }
    Ok(())
}

/// Row `v` of the transition matrix as `(target, probability)` pairs sorted by
/// target, with coincident targets merged and zero entries dropped.
pub fn transition_row(g: &PerturbedCycle, w: &WalkParams, v: usize) -> Result<Vec<(usize, f64)>> {
    w.validate()?;
    check_vertex(g, v)?;
    let n = g.n();
    let hub = g.hub_index(v);
    let mut row = vec![
        ((v + 1) % n, w.p),
        ((v + n - 1) % n, w.q),
        (v, w.loop_mass(hub.is_some())),
    ];
    if let Some(j) = hub {
        row.push((g.hubs()[g.partner(j)], w.a));
    }
    row.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (t, m) in row {
        match merged.last_mut() {
            Some(last) if last.0 == t => last.1 += m,
            _ => merged.push((t, m)),
        }
    }
    merged.retain(|e| e.1 != 0.0);
    Ok(merged)
}

/// The full transition matrix, row `v` holding the law of one step from `v`.
pub fn dense_matrix(g: &PerturbedCycle, w: &WalkParams) -> Result<Vec<Vec<f64>>> {
    const GUARD: usize = 2048;
    if g.n() > GUARD {
        return Err(Error::Size { size: g.n() as u128, guard: GUARD as u128 });
    }
    (0..g.n())
        .map(|v| {
            let mut row = vec![0.0; g.n()];
            for (t, m) in transition_row(g, w, v)? {
                row[t] += m;
            }
            Ok(row)
        })
        .collect()
}

/// Precomputed operator for repeated distribution evolution.
#[derive(Debug, Clone)]
pub struct Operator {
    n: usize,
    p: f64,
    q: f64,
    stay: f64,
    a: f64,
    jumps: Vec<(usize, usize)>,
}

impl Operator {
    pub fn new(g: &PerturbedCycle, w: &WalkParams) -> Result<Self> {
        w.validate()?;
        let jumps = (0..g.hubs().len())
            .map(|j| (g.hubs()[j], g.hubs()[g.partner(j)]))
            .collect();
        Ok(Operator {
            n: g.n(),
            p: w.p,
            q: w.q,
            stay: w.loop_mass(false),
            a: w.a,
            jumps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `dst = src * P`. Summation order is fixed, so results are reproducible.
    pub fn step_into(&self, src: &[f64], dst: &mut [f64]) {
        let n = self.n;
        debug_assert!(src.len() == n && dst.len() == n);
        let (p, q, s) = (self.p, self.q, self.stay);
        dst[0] = s * src[0] + p * src[n - 1] + q * src[1];
        dst[n - 1] = s * src[n - 1] + p * src[n - 2] + q * src[0];
        let (body, left, right) = (&src[1..n - 1], &src[..n - 2], &src[2..]);
        for (((d, &x), &l), &r) in dst[1..n - 1].iter_mut().zip(body).zip(left).zip(right) {
            *d = s * x + p * l + q * r;
        }
        for &(h, t) in &self.jumps {
            let m = self.a * src[h];
            dst[h] -= m;
            dst[t] += m;
        }
    }

    /// `dst = src * P`, returning the total-variation distance of `dst` to
    /// uniform computed in the same pass.
    pub fn step_into_tv(&self, src: &[f64], dst: &mut [f64]) -> f64 {
        let n = self.n;
        debug_assert!(src.len() == n && dst.len() == n);
        let u = 1.0 / n as f64;
        let (p, q, s) = (self.p, self.q, self.stay);
        dst[0] = s * src[0] + p * src[n - 1] + q * src[1];
        dst[n - 1] = s * src[n - 1] + p * src[n - 2] + q * src[0];
        let (body, left, right) = (&src[1..n - 1], &src[..n - 2], &src[2..]);
        for (((d, &x), &l), &r) in dst[1..n - 1].iter_mut().zip(body).zip(left).zip(right) {
            *d = s * x + p * l + q * r;
        }
        // eight partial sums, fixed order
        let mut lanes = [0.0f64; 8];
        let chunks = dst.chunks_exact(8);
        let tail = chunks.remainder();
        for c in chunks {
            for (acc, &x) in lanes.iter_mut().zip(c) {
                *acc += (x - u).abs();
            }
        }
        let mut acc = lanes.iter().sum::<f64>();
        for &x in tail {
            acc += (x - u).abs();
        }
        if !self.jumps.is_empty() {
            for &(h, _) in &self.jumps {
                acc -= (dst[h] - u).abs();
            }
            for &(h, t) in &self.jumps {
                let m = self.a * src[h];
                dst[h] -= m;
                dst[t] += m;
            }
            for &(h, _) in &self.jumps {
                acc += (dst[h] - u).abs();
            }
        }
        0.5 * acc
    }
}

/// One application of the operator to a distribution.
pub fn step_distribution(g: &PerturbedCycle, w: &WalkParams, d: &DistVector) -> Result<DistVector> {
    if d.len() != g.n() {
        return Err(Error::Dimension {
            expected: g.n(),
            got: d.len(),
        });
    }
    let op = Operator::new(g, w)?;
    let mut out = vec![0.0; g.n()];
    op.step_into(&d.0, &mut out);
    Ok(DistVector(out))
}

/// Draw a move from vertex `v` using exactly one `f64` draw.
///
/// The unit interval is split as `[0,p)` forward, `[p,p+q)` backward,
/// `[p+q,p+q+a)` across (hubs only), remainder loop.
#[inline]
pub fn sample_move(g: &PerturbedCycle, w: &WalkParams, v: usize, rng: &mut Rng) -> Move {
    let u: f64 = rng.random();
    classify(u, w, g.hub_index(v).is_some())
}

#[inline]
pub(crate) fn classify(u: f64, w: &WalkParams, hub: bool) -> Move {
    if u < w.p {
        Move::Forward
    } else if u < w.p + w.q {
        Move::Backward
    } else if hub && u < w.p + w.q + w.a {
        Move::Across
    } else {
        Move::Stay
    }
}

/// Target vertex of a move from `v`.
#[inline]
pub fn apply_move(g: &PerturbedCycle, v: usize, m: Move) -> usize {
    let n = g.n();
    match m {
        Move::Forward => if v + 1 == n { 0 } else { v + 1 },
        Move::Backward => if v == 0 { n - 1 } else { v - 1 },
        Move::Across => {
            let j = g.hub_index(v).expect("across move only at hubs");
            g.hubs()[g.partner(j)]
        }
        Move::Stay => v,
    }
}

pub fn sample_step(g: &PerturbedCycle, w: &WalkParams, v: usize, rng: &mut Rng) -> usize {
    apply_move(g, v, sample_move(g, w, v, rng))
}
