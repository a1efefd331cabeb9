//! The modular map `f_l(y) = sum y_i l_i (mod n)` and the geometry of its
//! image over boxes of traffic vectors.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PerturbedCycle;
use crate::rng;

/// Largest box the enumerators will walk.
pub const ENUM_GUARD: u128 = 100_000_000;

pub fn f_l(y: &[i64], l: &[i64], n: usize) -> Result<usize> {
    if y.len() != l.len() {
        return Err(Error::Arity(format!("y has {} entries, l has {}", y.len(), l.len())));
    }
    let n = n as i128;
    let s: i128 = y.iter().zip(l).map(|(&a, &b)| a as i128 * b as i128).sum();
    Ok(s.rem_euclid(n) as usize)
}

/// Distance from `x` to 0 on `Z_n`.
#[inline]
pub fn cyclic_distance(x: usize, n: usize) -> usize {
    let x = x % n;
    x.min(n - x)
}

/// `n / m^k`.
pub fn standard_distance(n: usize, k: usize, m: usize) -> f64 {
    n as f64 / (m as f64).powi(k as i32)
}

/// `ceil(sqrt(rho) * n^(1/(2k+2)))`.
pub fn default_m(n: usize, k: usize, rho: f64) -> usize {
    (rho.sqrt() * (n as f64).powf(1.0 / (2 * k + 2) as f64)).ceil().max(1.0) as usize
}

fn guard(side: u128, k: usize) -> Result<()> {
    let size = side.checked_pow(k as u32).unwrap_or(u128::MAX);
    if size > ENUM_GUARD {
        return Err(Error::Size { size, guard: ENUM_GUARD });
    }
    Ok(())
}

/// Visit every `y` with `y_i` in `lo_i..=hi_i`, passing `f_l(y)` incrementally.
fn for_each_box(
    l: &[i64],
    n: usize,
    lo: &[i64],
    hi: &[i64],
    mut visit: impl FnMut(&[i64], usize),
) {
    let k = l.len();
    let ni = n as i64;
    let step: Vec<i64> = l.iter().map(|x| x.rem_euclid(ni)).collect();
    let mut y = lo.to_vec();
    let mut val = f_l(&y, l, n).expect("same arity") as i64;
    loop {
        visit(&y, val as usize);
        let mut i = 0;
        loop {
            if i == k {
                return;
            }
            if y[i] < hi[i] {
                y[i] += 1;
                val = (val + step[i]) % ni;
                break;
            }
            val = (val - (hi[i] - lo[i]) % ni * step[i] % ni).rem_euclid(ni);
            y[i] = lo[i];
            i += 1;
        }
    }
}

/// `y` and `-y` are equally close; report the one whose first nonzero entry
/// is positive.
fn canonical_sign(y: &mut [i64]) {
    if y.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        y.iter_mut().for_each(|c| *c = -*c);
    }
}

/// Minimum of `d(f_l(y), 0)` over nonzero `y` in `[-m, m]^k`, with a witness.
pub fn min_nonzero_distance(l: &[i64], n: usize, m: usize) -> Result<(usize, Vec<i64>)> {
    if m < 1 || l.is_empty() {
        return Err(Error::Domain("need m >= 1 and k >= 1".into()));
    }
    guard(2 * m as u128 + 1, l.len())?;
    let k = l.len();
    let mi = m as i64;
    let mut best = (usize::MAX, vec![0; k]);
    for_each_box(l, n, &vec![-mi; k], &vec![mi; k], |y, v| {
        let d = cyclic_distance(v, n);
        if d < best.0 && y.iter().any(|&c| c != 0) {
            best = (d, y.to_vec());
        }
    });
    canonical_sign(&mut best.1);
    Ok(best)
}

/// Random-search upper bound on [`min_nonzero_distance`] for boxes too large
/// to enumerate.
pub fn min_nonzero_distance_sampled(
    l: &[i64],
    n: usize,
    m: usize,
    samples: u64,
    seed: u64,
) -> Result<(usize, Vec<i64>)> {
    if m < 1 || l.is_empty() {
        return Err(Error::Domain("need m >= 1 and k >= 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let mi = m as i64;
    let mut best = (usize::MAX, vec![0; l.len()]);
    let mut y = vec![0i64; l.len()];
    for _ in 0..samples {
        for c in y.iter_mut() {
            *c = rng.random_range(-mi..=mi);
        }
        if y.iter().all(|&c| c == 0) {
            continue;
        }
        let d = cyclic_distance(f_l(&y, l, n)?, n);
        if d < best.0 {
            best = (d, y.clone());
        }
    }
    canonical_sign(&mut best.1);
    Ok(best)
}

/// Number of nonzero `y` in `[-m, m]^k` with `d(f_l(y), 0) <= floor(alpha s)`.
pub fn window_hit_count(l: &[i64], n: usize, m: usize, alpha: f64) -> Result<u64> {
    if m < 1 || l.is_empty() {
        return Err(Error::Domain("need m >= 1 and k >= 1".into()));
    }
    guard(2 * m as u128 + 1, l.len())?;
    let k = l.len();
    let half = (alpha * standard_distance(n, k, m)).floor() as usize;
    let mi = m as i64;
    let mut hits = 0u64;
    for_each_box(l, n, &vec![-mi; k], &vec![mi; k], |y, v| {
        if cyclic_distance(v, n) <= half && y.iter().any(|&c| c != 0) {
            hits += 1;
        }
    });
    Ok(hits)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Expected [`window_hit_count`] for uniform `l` on `Z_n^k`, `n` prime:
/// `((2m+1)^k - 1)(2 floor(alpha s) + 1) / n`.
pub fn expected_window_hits(n: usize, k: usize, m: usize, alpha: f64) -> Result<f64> {
    if !is_prime(n as u64) {
        return Err(Error::Domain(format!("{n} is not prime")));
    }
    if !(alpha > 0.0) || k == 0 || m == 0 {
        return Err(Error::Domain("need alpha > 0, k >= 1, m >= 1".into()));
    }
    let half = (alpha * standard_distance(n, k, m)).floor();
    let width = (2.0 * half + 1.0).min(n as f64);
    let points = ((2 * m + 1) as f64).powi(k as i32) - 1.0;
    Ok(points * width / n as f64)
}

/// A coordinate-wise sign box, or the union of all of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignPattern {
    All,
    Signs(Vec<i8>),
}

impl SignPattern {
    /// The `2^k` patterns in lexicographic order, `+1` before `-1`.
    pub fn enumerate(k: usize) -> Vec<Vec<i8>> {
        (0..1u64 << k)
            .map(|bits| (0..k).map(|i| if bits >> i & 1 == 0 { 1 } else { -1 }).collect())
            .collect()
    }
}

fn pattern_bounds(pattern: &SignPattern, k: usize, m: usize) -> Result<(Vec<i64>, Vec<i64>)> {
    let top = m as i64 - 1;
    match pattern {
        SignPattern::All => Ok((vec![-top; k], vec![top; k])),
        SignPattern::Signs(b) => {
            if b.len() != k {
                return Err(Error::Arity(format!("{} signs for k={k}", b.len())));
            }
            let lo = b.iter().map(|&s| if s < 0 { -top } else { 0 }).collect();
            let hi = b.iter().map(|&s| if s < 0 { 0 } else { top }).collect();
            Ok((lo, hi))
        }
    }
}

/// `{f_l(y) + L mod n}` over `y` with `|y_i| < m` in the requested sign box,
/// sorted and deduplicated.
pub fn xi_set(g: &PerturbedCycle, travel: i64, m: usize, pattern: &SignPattern) -> Result<Vec<usize>> {
    xi_set_for(g.lengths(), g.n(), travel, m, pattern)
}

pub fn xi_set_for(
    l: &[i64],
    n: usize,
    travel: i64,
    m: usize,
    pattern: &SignPattern,
) -> Result<Vec<usize>> {
    if m < 1 {
        return Err(Error::Domain("need m >= 1".into()));
    }
    let k = l.len();
    let side = match pattern {
        SignPattern::All => 2 * m as u128 - 1,
        SignPattern::Signs(_) => m as u128,
    };
    guard(side, k)?;
    let (lo, hi) = pattern_bounds(pattern, k, m)?;
    let shift = travel.rem_euclid(n as i64) as usize;
    let mut seen = vec![false; n];
    for_each_box(l, n, &lo, &hi, |_, v| seen[(v + shift) % n] = true);
    Ok((0..n).filter(|&x| seen[x]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// `(gap, count)` sorted by gap.
    pub histogram: Vec<(usize, u64)>,
    pub gaps: Vec<usize>,
}

/// Cyclic gaps between consecutive points of a sorted set on `Z_n`.
pub fn gap_stats(points: &[usize], n: usize) -> Result<GapStats> {
    if points.is_empty() {
        return Err(Error::Domain("gap statistics of an empty set".into()));
    }
    let mut gaps: Vec<usize> = points.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.push(points[0] + n - points[points.len() - 1]);
    let mut sorted = gaps.clone();
    sorted.sort_unstable();
    let mut histogram: Vec<(usize, u64)> = Vec::new();
    for &g in &sorted {
        match histogram.last_mut() {
            Some((v, c)) if *v == g => *c += 1,
            _ => histogram.push((g, 1)),
        }
    }
    Ok(GapStats {
        min: sorted[0],
        max: *sorted.last().unwrap(),
        mean: n as f64 / gaps.len() as f64,
        histogram,
        gaps,
    })
}

/// Per sign pattern: the smallest `C` such that the box has images at
/// distance `< C s` on both sides of `L`, or `None` when it is one-sided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BothSides {
    pub signs: Vec<i8>,
    pub above: Option<usize>,
    pub below: Option<usize>,
    pub c: Option<f64>,
}

pub fn both_sides_check(g: &PerturbedCycle, travel: i64, m: usize) -> Result<Vec<BothSides>> {
    both_sides_for(g.lengths(), g.n(), travel, m)
}

pub fn both_sides_for(l: &[i64], n: usize, travel: i64, m: usize) -> Result<Vec<BothSides>> {
    let k = l.len();
    let s = standard_distance(n, k, m);
    let target = travel.rem_euclid(n as i64) as usize;
    SignPattern::enumerate(k)
        .into_iter()
        .map(|signs| {
            let pts: Vec<usize> = xi_set_for(l, n, travel, m, &SignPattern::Signs(signs.clone()))?
                .into_iter()
                .map(|x| (x + n - target) % n)
                .collect();
            let above = pts.iter().copied().filter(|&x| x != 0 && 2 * x <= n).min();
            let below = pts
                .iter()
                .copied()
                .filter(|&x| x != 0 && 2 * x >= n)
                .map(|x| n - x)
                .min();
            let c = match (above, below) {
                (Some(a), Some(b)) => Some(a.max(b) as f64 / s),
                _ => None,
            };
            Ok(BothSides { signs, above, below, c })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub lengths: Vec<i64>,
    pub s: f64,
    pub min_distance: usize,
    pub witness: Vec<i64>,
    pub gaps: Vec<usize>,
    pub max_gap: usize,
    pub alpha: f64,
    pub window_hits: u64,
}

/// Closeness and gap summary of `f_l` over `[-m, m]^k`.
pub fn spread_report(l: &[i64], n: usize, m: usize, alpha: f64) -> Result<SpreadReport> {
    let (min_distance, witness) = min_nonzero_distance(l, n, m)?;
    let points = xi_set_for(l, n, 0, m + 1, &SignPattern::All)?;
    let mut gaps = gap_stats(&points, n)?.gaps;
    gaps.sort_unstable();
    Ok(SpreadReport {
        n,
        m,
        k: l.len(),
        lengths: l.to_vec(),
        s: standard_distance(n, l.len(), m),
        min_distance,
        witness,
        max_gap: *gaps.last().unwrap(),
        gaps,
        alpha,
        window_hits: window_hit_count(l, n, m, alpha)?,
    })
}

/// Uniform `l` on `Z_n^k`.
pub fn sample_lengths(n: usize, k: usize, seed: u64) -> Vec<i64> {
    let mut rng = rng::seeded(seed);
    (0..k).map(|_| rng.random_range(0..n as i64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_l_examples() {
        assert_eq!(f_l(&[1, 1], &[3, 5], 10).unwrap(), 8);
        assert_eq!(f_l(&[0, 0], &[3, 5], 10).unwrap(), 0);
        assert_eq!(f_l(&[2, 7], &[5, 0], 10).unwrap(), 0);
        assert_eq!(f_l(&[-1], &[3], 10).unwrap(), 7);
        assert!(matches!(f_l(&[1], &[1, 2], 10), Err(Error::Arity(_))));
    }

    #[test]
    fn min_distance_examples() {
        assert_eq!(min_nonzero_distance(&[1], 100, 3).unwrap(), (1, vec![1]));
        // l = 25, n = 100: 4 * 25 = 0
        let (d, y) = min_nonzero_distance(&[25], 100, 4).unwrap();
        assert_eq!(d, 0);
        assert_eq!(f_l(&y, &[25], 100).unwrap(), 0);
        assert!(matches!(min_nonzero_distance(&[1, 2, 3, 4, 5], 7, 40), Err(Error::Size { .. })));
    }

    #[test]
    fn incremental_enumeration_matches_direct() {
        let l = [17, -40, 93];
        let n = 211;
        let mut count = 0;
        for_each_box(&l, n, &[-2, -1, 0], &[1, 2, 3], |y, v| {
            assert_eq!(v, f_l(y, &l, n).unwrap());
            count += 1;
        });
        assert_eq!(count, 4 * 4 * 4);
    }

    #[test]
    fn expected_hits_values() {
        let e = expected_window_hits(101, 1, 3, 0.1).unwrap();
        assert!((e - 42.0 / 101.0).abs() < 1e-15);
        let e = expected_window_hits(1009, 2, 5, 0.1).unwrap();
        assert!((e - 1080.0 / 1009.0).abs() < 1e-15);
        let tiny = expected_window_hits(101, 1, 3, 1e-6).unwrap();
        assert!((tiny - 6.0 / 101.0).abs() < 1e-15);
        assert!(matches!(expected_window_hits(100, 1, 3, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn expected_hits_by_full_enumeration() {
        let n = 101;
        let total: u64 = (0..n as i64).map(|l| window_hit_count(&[l], n, 3, 0.1).unwrap()).sum();
        let exact = expected_window_hits(n, 1, 3, 0.1).unwrap();
        assert!((total as f64 / n as f64 - exact).abs() < 1e-12);
    }

    #[test]
    fn xi_set_examples() {
        let g = PerturbedCycle::from_edges(50, &[(0, 1)]).unwrap();
        assert_eq!(g.lengths(), &[1]);
        assert_eq!(xi_set(&g, 0, 4, &SignPattern::Signs(vec![1])).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(xi_set(&g, 10, 2, &SignPattern::All).unwrap(), vec![9, 10, 11]);
        let pts = xi_set_for(&[7, 19], 97, 0, 4, &SignPattern::Signs(vec![1, -1])).unwrap();
        assert!(pts.len() <= 16);
    }

    #[test]
    fn gap_examples() {
        let g = gap_stats(&[0, 50], 100).unwrap();
        assert_eq!(g.gaps, vec![50, 50]);
        let g = gap_stats(&[7], 100).unwrap();
        assert_eq!((g.gaps.clone(), g.min, g.max), (vec![100], 100, 100));
        assert!(gap_stats(&[], 10).is_err());
        let g = gap_stats(&[1, 4, 9], 12).unwrap();
        assert_eq!(g.gaps.iter().sum::<usize>(), 12);
        assert_eq!(g.histogram, vec![(3, 1), (4, 1), (5, 1)]);
    }

    #[test]
    fn one_sided_boxes() {
        let r = both_sides_for(&[1], 1000, 0, 5).unwrap();
        assert_eq!(r[0].signs, vec![1]);
        assert_eq!((r[0].above, r[0].below, r[0].c), (Some(1), None, None));
        assert_eq!((r[1].above, r[1].below, r[1].c), (None, Some(1), None));
        let r = both_sides_for(&[-1], 1000, 0, 5).unwrap();
        assert_eq!((r[0].above, r[0].below), (None, Some(1)));
        let r = both_sides_for(&[1], 7, 0, 6).unwrap();
        assert_eq!((r[0].above, r[0].below), (Some(1), Some(2)));
    }

    #[test]
    fn pigeonhole_on_shifted_boxes() {
        // x boxes of m^k points each: more than n / (alpha s) points force a
        // pair within alpha s
        let n = 997;
        let l = [123, 456];
        let m = 6;
        let s = standard_distance(n, 2, m);
        let alpha = 0.5;
        let boxes = (1.0 / alpha + 1.0f64).ceil() as i64;
        let mut pts = Vec::new();
        for shift in 0..boxes {
            let lo = [shift * m as i64, 0];
            let hi = [shift * m as i64 + m as i64 - 1, m as i64 - 1];
            for_each_box(&l, n, &lo, &hi, |_, v| pts.push(v));
        }
        pts.sort_unstable();
        let close = pts.windows(2).map(|w| w[1] - w[0]).min().unwrap();
        let wrap = pts[0] + n - pts[pts.len() - 1];
        assert!((close.min(wrap) as f64) < alpha * s);
    }

    #[test]
    fn default_m_scale() {
        assert_eq!(default_m(1009, 2, 1.0), 4);
        assert_eq!(default_m(5000, 1, 1.0), 9);
        assert_eq!(default_m(5000, 1, 4.0), 17);
    }
}
