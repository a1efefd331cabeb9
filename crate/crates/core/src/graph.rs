//! Cycle graphs perturbed by a handful of chords between distinct "hub" vertices.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// The cycle `Z_n` with `k` extra edges forming a perfect matching on `2k` hubs.
///
/// Hubs are stored sorted. Hub indices (0-based) refer to positions in that
/// sorted list. Each extra edge `i` is oriented from hub `minus(i)` to hub
/// `plus(i)` with `minus(i) < plus(i)`; its signed length is the cycle
/// displacement of a jump in that direction, normalized to `(-n/2, n/2]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbedCycle {
    n: usize,
    hubs: Vec<usize>,
    partner: Vec<usize>,
    edges: Vec<(usize, usize)>,
    lengths: Vec<i64>,
    arcs: Vec<usize>,
}

/// How to obtain an instance: sampled from a seed, or spelled out as chords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceSpec {
    Random { n: usize, k: usize, seed: u64 },
    Explicit { n: usize, edges: Vec<(usize, usize)> },
}

/// Normalize a displacement to the representative in `(-n/2, n/2]`.
pub fn signed_residue(d: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = d.rem_euclid(n);
    if 2 * r > n {
        r - n
    } else {
        r
    }
}

impl PerturbedCycle {
    /// The plain cycle on `n` vertices.
    pub fn cycle(n: usize) -> Result<Self> {
        Self::from_edges(n, &[])
    }

    /// Build an instance from chords given as vertex pairs.
    pub fn from_edges(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInstance(format!("cycle needs n >= 3, got {n}")));
        }
        let mut hubs: Vec<usize> = Vec::with_capacity(2 * pairs.len());
        for &(u, v) in pairs {
            if u >= n || v >= n {
                return Err(Error::InvalidInstance(format!(
                    "edge ({u},{v}) has a vertex outside [0,{n})"
                )));
            }
            hubs.push(u);
            hubs.push(v);
        }
        hubs.sort_unstable();
        if hubs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInstance(
                "hubs must be 2k distinct vertices".to_string(),
            ));
        }
        let slot = |v: usize| hubs.binary_search(&v).expect("hub present");
        let mut partner = vec![usize::MAX; hubs.len()];
        let mut edges: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (slot(u), slot(v));
                partner[a] = b;
                partner[b] = a;
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        Ok(Self::assemble(n, hubs, partner, edges))
    }

    fn assemble(
        n: usize,
        hubs: Vec<usize>,
        partner: Vec<usize>,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        let lengths = edges
            .iter()
            .map(|&(lo, hi)| signed_residue(hubs[hi] as i64 - hubs[lo] as i64, n))
            .collect();
        let h = hubs.len();
        let arcs = (0..h)
            .map(|j| {
                if j + 1 < h {
                    hubs[j + 1] - hubs[j]
                } else {
                    hubs[0] + n - hubs[j]
                }
            })
            .collect();
        PerturbedCycle {
            n,
            hubs,
            partner,
            edges,
            lengths,
            arcs,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of extra edges.
    pub fn k(&self) -> usize {
        self.edges.len()
    }

    pub fn hubs(&self) -> &[usize] {
        &self.hubs
    }

    /// Pairing function on hub indices.
    pub fn partner(&self, j: usize) -> usize {
        self.partner[j]
    }

    /// Oriented edges as `(minus, plus)` hub indices.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn lengths(&self) -> &[i64] {
        &self.lengths
    }

    /// `arcs()[j]` is the cycle distance from hub `j` to hub `j+1` (cyclically).
    pub fn arcs(&self) -> &[usize] {
        &self.arcs
    }

    /// Hub index of vertex `v`, if it is a hub.
    #[inline]
    pub fn hub_index(&self, v: usize) -> Option<usize> {
        self.hubs.binary_search(&v).ok()
    }

    /// Edge index carrying hub `j` and the sign of a jump leaving `j`:
    /// `+1` when `j` is the minus end, `-1` otherwise.
    pub fn edge_of_hub(&self, j: usize) -> (usize, i64) {
        let lo = j.min(self.partner[j]);
        let i = self
            .edges
            .binary_search_by_key(&lo, |e| e.0)
            .expect("every hub lies on an edge");
        (i, if self.edges[i].0 == j { 1 } else { -1 })
    }

    /// Event B1: every arc is longer than `threshold` (default `ln(n)^2`).
    pub fn check_b1(&self, threshold: Option<f64>) -> bool {
        let t = threshold.unwrap_or_else(|| log2n(self.n));
        self.arcs.iter().all(|&a| a as f64 > t)
    }

    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec::Explicit {
            n: self.n,
            edges: self
                .edges
                .iter()
                .map(|&(lo, hi)| (self.hubs[lo], self.hubs[hi]))
                .collect(),
        }
    }
}

/// `ln(n)^2`, the backtrack scale used throughout.
pub fn log2n(n: usize) -> f64 {
    let l = (n as f64).ln();
    l * l
}

/// Sample hubs uniformly among `2k`-subsets and a uniform perfect matching on them.
pub fn sample_instance(n: usize, k: usize, seed: u64) -> Result<PerturbedCycle> {
    if n < 3 || n < 2 * k {
        return Err(Error::InvalidInstance(format!(
            "need n >= max(3, 2k); got n={n}, k={k}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut hubs = index::sample(&mut rng, n, 2 * k).into_vec();
    hubs.sort_unstable();
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.shuffle(&mut rng);
    let pairs: Vec<(usize, usize)> = order
        .chunks_exact(2)
        .map(|c| (hubs[c[0]], hubs[c[1]]))
        .collect();
    PerturbedCycle::from_edges(n, &pairs)
}

pub fn from_spec(spec: &InstanceSpec) -> Result<PerturbedCycle> {
    match spec {
        InstanceSpec::Random { n, k, seed } => sample_instance(*n, *k, *seed),
        InstanceSpec::Explicit { n, edges } => PerturbedCycle::from_edges(*n, edges),
    }
}

/// Canonical one-line form: `n=<n> k=<k> hubs=<h,...> match=<j:j',...>`
/// with 0-based hub indices in `match`.
impl fmt::Display for PerturbedCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hubs: Vec<String> = self.hubs.iter().map(|h| h.to_string()).collect();
        let m: Vec<String> = self.edges.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        write!(
            f,
            "n={} k={} hubs={} match={}",
            self.n,
            self.k(),
            hubs.join(","),
            m.join(",")
        )
    }
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSpec::Random { n, k, seed } => write!(f, "n={n} k={k} seed={seed}"),
            InstanceSpec::Explicit { n, edges } => {
                let e: Vec<String> = edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
                write!(f, "n={n} edges={}", e.join(","))
            }
        }
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad {what} entry '{x}'")))
        })
        .collect()
}

fn parse_pair(s: &str, sep: char) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(sep)
        .ok_or_else(|| Error::Parse(format!("expected pair 'a{sep}b', got '{s}'")))?;
    let a = a.trim().parse().map_err(|_| Error::Parse(format!("bad pair '{s}'")))?;
    let b = b.trim().parse().map_err(|_| Error::Parse(format!("bad pair '{s}'")))?;
    Ok((a, b))
}

/// Accepts the canonical instance line, `n=.. k=.. seed=..`, or `n=.. edges=u-v,...`.
impl FromStr for InstanceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut n = None;
        let mut k = None;
        let mut seed = None;
        let mut hubs: Option<Vec<usize>> = None;
        let mut matching: Option<Vec<(usize, usize)>> = None;
        let mut edges: Option<Vec<(usize, usize)>> = None;
        for tok in s.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{tok}'")))?;
            let num = |v: &str| -> Result<u64> {
                v.parse().map_err(|_| Error::Parse(format!("bad number for {key}: '{v}'")))
            };
            match key {
                "n" => n = Some(num(val)? as usize),
                "k" => k = Some(num(val)? as usize),
                "seed" => seed = Some(num(val)?),
                "hubs" => hubs = Some(parse_list(val, "hub")?),
                "match" => {
                    matching = Some(
                        val.split(',')
                            .filter(|x| !x.is_empty())
                            .map(|x| parse_pair(x, ':'))
                            .collect::<Result<_>>()?,
                    )
                }
                "edges" => {
                    edges = Some(
                        val.split(',')
                            .filter(|x| !x.is_empty())
                            .map(|x| parse_pair(x, '-'))
                            .collect::<Result<_>>()?,
                    )
                }
                _ => return Err(Error::Parse(format!("unknown key '{key}'"))),
            }
        }
        let n = n.ok_or_else(|| Error::Parse("missing n=".into()))?;
        if let Some(seed) = seed {
            let k = k.ok_or_else(|| Error::Parse("seeded instance needs k=".into()))?;
            return Ok(InstanceSpec::Random { n, k, seed });
        }
        let edges = match (edges, hubs, matching) {
            (Some(e), _, _) => e,
            (None, Some(h), Some(m)) => {
                let mut used = vec![false; h.len()];
                let mut out = Vec::with_capacity(m.len());
                for (a, b) in m {
                    if a >= h.len() || b >= h.len() || a == b || used[a] || used[b] {
                        return Err(Error::InvalidInstance(format!(
                            "match entry {a}:{b} is not a valid pairing of {} hubs",
                            h.len()
                        )));
                    }
                    used[a] = true;
                    used[b] = true;
                    out.push((h[a], h[b]));
                }
                if used.iter().any(|u| !u) {
                    return Err(Error::InvalidInstance("matching leaves a hub unpaired".into()));
                }
                out
            }
            (None, None, None) if k == Some(0) => Vec::new(),
            _ => return Err(Error::Parse("need seed=, edges=, or hubs= with match=".into())),
        };
        if let Some(k) = k {
            if k != edges.len() {
                return Err(Error::InvalidInstance(format!(
                    "k={k} but {} edges given",
                    edges.len()
                )));
            }
        }
        Ok(InstanceSpec::Explicit { n, edges })
    }
}

impl FromStr for PerturbedCycle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        from_spec(&s.parse()?)
    }
}
