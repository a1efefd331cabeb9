use proptest::prelude::*;

use ringmix_core::graph::InstanceSpec;
use ringmix_core::kernel::{transition_row, Operator};
use ringmix_core::mixing::tv_to_uniform;
use ringmix_core::spread::{cyclic_distance, f_l, gap_stats, xi_set_for, SignPattern};
use ringmix_core::walker::{reconstruct_segments, run_track};
use ringmix_core::{sample_instance, PerturbedCycle, WalkParams};

fn instance() -> impl Strategy<Value = PerturbedCycle> {
    (3usize..300, 0usize..4, any::<u64>())
        .prop_filter("room for hubs", |(n, k, _)| 2 * k <= *n)
        .prop_map(|(n, k, s)| sample_instance(n, k, s).unwrap())
}

fn params() -> impl Strategy<Value = WalkParams> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.05f64..1.0).prop_map(|(x, y, z, scale)| {
        // p > q, and p + q + a <= 1 after scaling
        let (p, q) = if x > y { (x, y) } else { (y + 1e-3, x) };
        let s = scale / (p + q + z);
        WalkParams::new(p * s, q * s, z * s).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_doubly_stochastic(g in instance(), w in params()) {
        let n = g.n();
        let mut col = vec![0.0; n];
        for v in 0..n {
            let row = transition_row(&g, &w, v).unwrap();
            let s: f64 = row.iter().map(|e| e.1).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|e| e.1 >= 0.0));
            for (t, m) in row {
                col[t] += m;
            }
        }
        for c in col {
            prop_assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_to_uniform_never_increases(g in instance(), w in params(), v in any::<usize>()) {
        let n = g.n();
        let op = Operator::new(&g, &w).unwrap();
        let mut cur = vec![0.0; n];
        cur[v % n] = 1.0;
        let mut next = vec![0.0; n];
        let mut d = tv_to_uniform(&cur);
        for _ in 0..200 {
            let d2 = op.step_into_tv(&cur, &mut next);
            prop_assert!(d2 <= d + 1e-12);
            prop_assert!((d2 - tv_to_uniform(&next)).abs() < 1e-12);
            prop_assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            std::mem::swap(&mut cur, &mut next);
            d = d2;
        }
    }

    #[test]
    fn canonical_form_round_trips(g in instance()) {
        let back: PerturbedCycle = g.to_string().parse().unwrap();
        prop_assert_eq!(&back, &g);
        let spec: InstanceSpec = g.to_spec();
        prop_assert_eq!(&ringmix_core::from_spec(&spec).unwrap(), &g);
    }

    #[test]
    fn f_l_is_linear(
        n in 2usize..5000,
        l in prop::collection::vec(-10_000i64..10_000, 1..5),
        seed in any::<u64>(),
    ) {
        let k = l.len();
        let mut r = seed;
        let mut next = || {
            r = r.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((r >> 33) % 41) as i64 - 20
        };
        let y: Vec<i64> = (0..k).map(|_| next()).collect();
        let z: Vec<i64> = (0..k).map(|_| next()).collect();
        let diff: Vec<i64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
        let (fy, fz) = (f_l(&y, &l, n).unwrap(), f_l(&z, &l, n).unwrap());
        let d = cyclic_distance((fy + n - fz) % n, n);
        prop_assert_eq!(d, cyclic_distance(f_l(&diff, &l, n).unwrap(), n));
    }

    #[test]
    fn orbits_live_in_gcd_lattice(
        n in 2usize..200,
        l in prop::collection::vec(0i64..200, 1..4),
        y in prop::collection::vec(-30i64..30, 3),
    ) {
        let y = &y[..l.len()];
        fn gcd(a: i64, b: i64) -> i64 { if b == 0 { a.abs() } else { gcd(b, a % b) } }
        let g = y.iter().fold(n as i64, |acc, &c| gcd(acc, c));
        for t in 0..n as i64 {
            let yt: Vec<i64> = y.iter().map(|c| c * t).collect();
            prop_assert_eq!(f_l(&yt, &l, n).unwrap() as i64 % g, 0);
        }
    }

    #[test]
    fn gaps_partition_the_cycle(n in 2usize..2000, l in prop::collection::vec(0i64..2000, 1..3), m in 1usize..6) {
        let pts = xi_set_for(&l, n, 17, m, &SignPattern::All).unwrap();
        let s = gap_stats(&pts, n).unwrap();
        prop_assert_eq!(s.gaps.iter().sum::<usize>(), n);
        prop_assert!(s.min as f64 <= s.mean && s.mean <= s.max as f64);
        prop_assert!(pts.len() <= (2 * m - 1).pow(l.len() as u32));
    }

    #[test]
    fn track_identities(g in instance(), x0 in any::<usize>(), travel in 1u64..2000, seed in any::<u64>()) {
        let w = WalkParams::default();
        let x0 = x0 % g.n();
        let s = run_track(&g, &w, x0, travel, seed).unwrap();
        prop_assert_eq!(s.endpoint, s.predicted_endpoint(&g));
        let rebuilt = reconstruct_segments(&g, x0, s.endpoint, travel, &s.y).unwrap();
        prop_assert_eq!(&rebuilt, &s.segments);
        for (i, &(lo, hi)) in g.edges().iter().enumerate() {
            prop_assert_eq!(s.y[i], s.n_j[lo] as i64 - s.n_j[hi] as i64);
        }
    }
}
