//! Rational-arithmetic version of the operator for small cycles, used to
//! ground the floating-point evolution in tests and in `verify`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::graph::PerturbedCycle;

/// Largest cycle the exact path accepts.
pub const MAX_EXACT_N: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactParams {
    pub p: BigRational,
    pub q: BigRational,
    pub a: BigRational,
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl ExactParams {
    pub fn new(p: BigRational, q: BigRational, a: BigRational) -> Result<Self> {
        let one = BigRational::one();
        if q < BigRational::zero() || a < BigRational::zero() || p <= q || &p + &q + &a > one {
            return Err(Error::InvalidParams("need p > q >= 0, a >= 0, p+q+a <= 1".into()));
        }
        Ok(ExactParams { p, q, a })
    }

    pub fn to_f64(&self) -> crate::kernel::WalkParams {
        use num_traits::ToPrimitive;
        crate::kernel::WalkParams {
            p: self.p.to_f64().unwrap_or(f64::NAN),
            q: self.q.to_f64().unwrap_or(f64::NAN),
            a: self.a.to_f64().unwrap_or(f64::NAN),
        }
    }
}

/// `d * P` in exact arithmetic.
pub fn step_exact(g: &PerturbedCycle, w: &ExactParams, d: &[BigRational]) -> Result<Vec<BigRational>> {
    let n = g.n();
    if n > MAX_EXACT_N {
        return Err(Error::Size {
            size: n as u128,
            guard: MAX_EXACT_N as u128,
        });
    }
    if d.len() != n {
        return Err(Error::Dimension { expected: n, got: d.len() });
    }
    let stay = BigRational::one() - &w.p - &w.q;
    let mut out = vec![BigRational::zero(); n];
    for v in 0..n {
        if d[v].is_zero() {
            continue;
        }
        let mass = &d[v];
        out[(v + 1) % n] += mass * &w.p;
        out[(v + n - 1) % n] += mass * &w.q;
        match g.hub_index(v) {
            Some(j) => {
                out[g.hubs()[g.partner(j)]] += mass * &w.a;
                out[v] += mass * (&stay - &w.a);
            }
            None => out[v] += mass * &stay,
        }
    }
    Ok(out)
}

/// Exact total-variation distance to uniform.
pub fn tv_to_uniform_exact(d: &[BigRational]) -> BigRational {
    let u = ratio(1, d.len() as i64);
    let s = d
        .iter()
        .fold(BigRational::zero(), |acc, x| acc + (x - &u).abs());
    s / ratio(2, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_instance;
    use crate::kernel::{step_distribution, DistVector};
    use num_traits::ToPrimitive;

    #[test]
    fn exact_mass_is_conserved_and_matches_float() {
        let g = sample_instance(16, 3, 2).unwrap();
        let w = ExactParams::new(ratio(1, 2), ratio(1, 4), ratio(1, 5)).unwrap();
        let mut d = vec![BigRational::zero(); 16];
        d[0] = BigRational::one();
        let mut f = DistVector::point_mass(16, 0);
        for _ in 0..30 {
            d = step_exact(&g, &w, &d).unwrap();
            f = step_distribution(&g, &w.to_f64(), &f).unwrap();
            assert_eq!(d.iter().fold(BigRational::zero(), |a, x| a + x), BigRational::one());
        }
        for (e, x) in d.iter().zip(f.values()) {
            assert!((e.to_f64().unwrap() - x).abs() < 1e-14);
        }
        assert!(tv_to_uniform_exact(&d) < ratio(1, 1));
    }

    #[test]
    fn size_guard() {
        let g = sample_instance(65, 1, 0).unwrap();
        let w = ExactParams::new(ratio(1, 2), ratio(1, 4), ratio(1, 4)).unwrap();
        assert!(step_exact(&g, &w, &vec![BigRational::zero(); 65]).is_err());
        assert!(ExactParams::new(ratio(1, 4), ratio(1, 2), ratio(0, 1)).is_err());
    }
}
