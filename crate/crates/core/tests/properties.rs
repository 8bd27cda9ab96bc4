mod common;

use common::*;
use mixlab_core::checks::{check_censoring, select_low_cov_subset, Verdict};
use mixlab_core::dynamics::{monotone_coupled_z_step, replay, run_chain, ChainSpec, RecordOptions, RngStream};
use mixlab_core::exact::{exact_tv_curve, gibbs_distribution, glauber_transition_matrix, moments};
use mixlab_core::experiment::{parse_model_str, write_model};
use mixlab_core::spin::plus_probability;
use mixlab_core::{Edge, IsingModel, Limits, SpinConfig};
use proptest::prelude::*;

fn model(max_n: usize, field: bool) -> impl Strategy<Value = IsingModel> {
    (1..=max_n).prop_flat_map(move |n| {
        let pairs = n * (n - 1) / 2;
        (
            Just(n),
            prop::collection::vec(prop::option::weighted(0.6, 0.0..2.0f64), pairs),
            prop::collection::vec(if field { -1.0..1.0f64 } else { 0.0..f64::MIN_POSITIVE }, n),
        )
            .prop_map(move |(n, js, h)| {
                let all = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v)));
                let edges = all.zip(js).filter_map(|((u, v), j)| j.map(|j| Edge { u, v, j })).collect();
                let h = if field { h } else { vec![0.0; n] };
                IsingModel::with_field(n, edges, h).unwrap()
            })
    })
}

fn nonnegative_symmetric(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0..3.0f64, n * n).prop_map(move |x| {
            let mut c = vec![vec![0.0; n]; n];
            for u in 0..n {
                for v in 0..n {
                    c[u][v] = x[u.min(v) * n + u.max(v)];
                }
            }
            c
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn model_text_round_trips(m in model(8, true)) {
        let back = parse_model_str(&write_model(&m)).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&m).unwrap());
    }

    #[test]
    fn gibbs_table_matches_brute_force(m in model(6, true)) {
        let lim = Limits::default();
        let pi = gibbs_distribution(&m, &lim).unwrap();
        for (a, b) in pi.probs().iter().zip(gibbs(&m)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let p = glauber_transition_matrix(&m, &lim).unwrap();
        prop_assert!(p.detailed_balance_residual(pi.probs()) < 1e-10);
        prop_assert!(p.max_row_sum_error() < 1e-12);
    }

    #[test]
    fn ferromagnets_have_nonnegative_covariances(m in model(6, true)) {
        let c = moments(&gibbs_distribution(&m, &Limits::default()).unwrap()).covariance;
        for row in &c {
            for &x in row {
                prop_assert!(x >= -1e-12);
            }
        }
    }

    #[test]
    fn heat_bath_probability_is_symmetric(x in -30.0..30.0f64) {
        let p = plus_probability(x);
        prop_assert!((p + plus_probability(-x) - 1.0).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn spin_index_round_trips(n in 1usize..20, x in any::<u64>()) {
        let x = x & ((1u64 << n) - 1);
        let s = SpinConfig::from_index(x, n);
        prop_assert_eq!(s.index(), x);
        prop_assert_eq!(s.flipped().index(), !x & ((1u64 << n) - 1));
    }

    #[test]
    fn tv_curve_is_nonincreasing_and_matches_brute_force(m in model(5, true)) {
        let lim = Limits::default();
        let curve = exact_tv_curve(&m, &SpinConfig::all_plus(m.n()), 30, &lim).unwrap();
        let oracle = tv_from_plus(&m, 30);
        for (a, b) in curve.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for w in curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn subset_meets_average_bound(c in nonnegative_symmetric(9), k_frac in 0.0..=1.0f64, seed in any::<u64>()) {
        let n = c.len();
        let k = (k_frac * n as f64).round() as usize;
        let (f, rep) = select_low_cov_subset(&c, k, seed).unwrap();
        prop_assert_eq!(f.len(), k);
        let total: f64 = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).filter(|(u, v)| u != v).map(|(u, v)| c[u][v]).sum();
        let s: f64 = f.iter().flat_map(|&u| f.iter().map(move |&v| (u, v))).filter(|(u, v)| u != v).map(|(u, v)| c[u][v]).sum();
        let bound = (k * k) as f64 / (n * n) as f64 * total;
        prop_assert!(s <= bound + 1e-12 * bound.max(1.0));
        prop_assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn censored_updates_stay_above(m in model(4, false), seq in prop::collection::vec(0usize..4, 0..5), mask in any::<u8>()) {
        let seq: Vec<usize> = seq.into_iter().map(|v| v % m.n()).collect();
        let sub: Vec<usize> = seq.iter().enumerate().filter(|(i, _)| (mask >> i) & 1 == 1).map(|(_, &v)| v).collect();
        let rep = check_censoring(&m, &seq, &sub, &Limits::default());
        prop_assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn chains_replay_and_repeat(m in model(6, true), seed in any::<u64>(), horizon in 0u64..200) {
        let spec = ChainSpec::plain(&m);
        let start = SpinConfig::all_plus(m.n());
        let opts = RecordOptions { configs: false, updates: true };
        let a = run_chain(&spec, &start, horizon, &mut RngStream::new(seed, 0), opts).unwrap();
        let b = run_chain(&spec, &start, horizon, &mut RngStream::new(seed, 0), opts).unwrap();
        prop_assert_eq!(&a, &b);
        let r = replay(&spec, &start, a.records.as_ref().unwrap()).unwrap();
        prop_assert_eq!(r.sums, a.sums);
        prop_assert_eq!(r.final_state, a.final_state);
    }

    #[test]
    fn monotone_coupling_preserves_order(m in model(6, false), seed in any::<u64>(), top in any::<u64>(), bottom in any::<u64>()) {
        let n = m.n();
        let spec = ChainSpec::z_chain(&m, (0..n).collect(), &Limits::default()).unwrap();
        let top = top & ((1u64 << n) - 1);
        let mut z = SpinConfig::from_index(top, n);
        let mut zt = SpinConfig::from_index(top & bottom, n);
        let mut src = RngStream::new(seed, 0);
        for _ in 0..100 {
            monotone_coupled_z_step(&spec, &mut z, &mut zt, &mut src);
            prop_assert!(zt.leq(&z).unwrap());
        }
    }
}
