use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermal_nrm::regressors::{
    apply_chain, blocks, entry_labels, max_lag, property_2_correction, regressor_length, verify_property_1,
    verify_property_2, DelayPolynomialOp, LaggedHistory, MeasuredSample, RegressorLayout, RegressorSpec, Signal,
    Structure,
};

fn spec(s: Structure, n: usize) -> RegressorSpec {
    RegressorSpec::new(s, n).unwrap()
}

fn lagged(name: &str, m: usize) -> String {
    format!("{name}(k-{m})")
}

// Entry list written out by hand, one loop per term of each model.
fn expected_labels(s: Structure, n: usize) -> Vec<String> {
    let mut v = Vec::new();
    let nb = |j: usize| format!("T_rj_{}", j + 1);
    match s {
        Structure::Lrm => {
            let l = n + 2;
            let mut names = vec!["yhat".to_string()];
            names.extend((0..n).map(nb));
            names.extend(["Va", "Ta_in", "Vw", "Tw_in", "Qext"].map(String::from));
            for name in names {
                for m in 1..=l {
                    v.push(lagged(&name, m));
                }
            }
        }
        Structure::NrmFiZone => {
            let l = n + 1;
            v.extend((1..=l).map(|m| lagged("yhat", m)));
            for j in 0..n {
                v.extend((2..=l).map(|m| lagged(&nb(j), m)));
            }
            v.extend((1..=l).map(|m| format!("{}*{}", lagged("Va", m), lagged("yhat", m))));
            v.extend((1..=l).map(|m| format!("{}*{}", lagged("Va", m), lagged("Ta_in", m))));
            v.extend((1..=l).map(|m| lagged("Tw_hat", m)));
            v.extend((1..=l).map(|m| lagged("Qext", m)));
        }
        Structure::NrmFiRh => {
            v.push(lagged("yhat", 1));
            v.push(format!("{}*{}", lagged("Vw", 1), lagged("yhat", 1)));
            v.push(format!("{}*{}", lagged("Vw", 1), lagged("Tw_in", 1)));
            v.push(lagged("T_r", 1));
        }
        Structure::NrmMi | Structure::NrmLi => {
            let l = n + 2;
            let mi = s == Structure::NrmMi;
            let ta = |m| {
                if mi {
                    lagged("Ta_in", m)
                } else {
                    "1".to_string()
                }
            };
            let tw = |m| {
                if mi {
                    lagged("Tw_in", m)
                } else {
                    "1".to_string()
                }
            };
            v.extend((1..=l).map(|m| lagged("yhat", m)));
            for j in 0..n {
                v.extend((2..=l).map(|m| lagged(&nb(j), m)));
            }
            v.extend((1..=l).map(|m| format!("{}*{}", lagged("Va", m), lagged("yhat", m))));
            v.extend((1..=l).map(|m| format!("{}*{}", lagged("Va", m), ta(m))));
            v.extend((2..=l).map(|m| format!("{}*{}*{}", lagged("Va", m), lagged("Vw", m), ta(m))));
            v.extend((1..=n + 1).map(|m| format!("{}*{}", lagged("Vw", m + 1), lagged("yhat", m))));
            v.extend((2..=l).map(|m| format!("{}*{}", lagged("Vw", m), lagged("yhat", m))));
            v.extend((2..=l).map(|m| format!("{}*{}*{}", lagged("Vw", m), lagged("Va", m), lagged("yhat", m))));
            v.extend((2..=l).map(|m| format!("{}*{}", lagged("Vw", m), tw(m))));
            v.extend((1..=l).map(|m| lagged("Qext", m)));
            v.extend((2..=l).map(|m| format!("{}*{}", lagged("Vw", m), lagged("Qext", m))));
        }
    }
    v
}

#[test]
fn layouts_match_hand_written_entry_lists() {
    for n in 1..=5 {
        for s in Structure::ALL {
            let sp = spec(s, n);
            let want = expected_labels(s, n);
            assert_eq!(entry_labels(&sp), want, "{s} n={n}");
            assert_eq!(regressor_length(&sp), want.len(), "{s} n={n}");
            assert_eq!(RegressorLayout::new(sp).len(), want.len(), "{s} n={n}");
        }
    }
}

#[test]
fn known_lengths_at_one_neighbour() {
    let len = |s| regressor_length(&spec(s, 1));
    assert_eq!(len(Structure::Lrm), 21);
    assert_eq!(len(Structure::NrmFiZone), 11);
    assert_eq!(len(Structure::NrmFiRh), 4);
    assert_eq!(len(Structure::NrmMi), 26);
    assert_eq!(len(Structure::NrmLi), 26);
}

#[test]
fn entries_are_products_of_at_most_three_signals() {
    for n in 1..=5 {
        for s in Structure::ALL {
            for b in blocks(&spec(s, n)) {
                assert!(!b.factors.is_empty() && b.factors.len() <= 3);
                let outputs = b
                    .factors
                    .iter()
                    .filter(|f| matches!(f.signal, Signal::Output | Signal::RhOutput))
                    .count();
                assert!(outputs <= 1, "an entry is at most linear in past outputs");
            }
        }
    }
}

fn random_history(n: usize, len: usize, seed: u64) -> LaggedHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = LaggedHistory::new(n);
    for _ in 0..len {
        h.push(&MeasuredSample {
            t_r: rng.random_range(15.0..25.0),
            t_rj: (0..n).map(|_| rng.random_range(-5.0..25.0)).collect(),
            t_w: rng.random_range(20.0..60.0),
            tw_in: rng.random_range(30.0..70.0),
            ta_in: rng.random_range(5.0..25.0),
            vw: rng.random_range(0.0..0.08),
            va: rng.random_range(0.0..0.2),
            qext: rng.random_range(0.0..800.0),
        })
        .unwrap();
        h.yhat.push(rng.random_range(15.0..25.0));
        h.yhat_w.push(rng.random_range(20.0..60.0));
    }
    h
}

proptest! {
    #[test]
    fn room_models_never_read_the_measured_room_temperature(n in 1usize..4, seed in any::<u64>()) {
        let mut h = random_history(n, 12, seed);
        for s in [Structure::Lrm, Structure::NrmFiZone, Structure::NrmMi, Structure::NrmLi] {
            let layout = RegressorLayout::new(spec(s, n));
            let k = h.len() - 1;
            let before = layout.build(&h, k).unwrap();
            for v in h.t_r.iter_mut() {
                *v += 1e3;
            }
            prop_assert_eq!(before, layout.build(&h, k).unwrap());
        }
    }

    #[test]
    fn unit_flows_reduce_bilinear_entries_to_linear_ones(n in 1usize..4, seed in any::<u64>()) {
        let mut h = random_history(n, 12, seed);
        h.vw.iter_mut().for_each(|v| *v = 1.0);
        h.va.iter_mut().for_each(|v| *v = 1.0);
        let k = h.len() - 1;
        let lrm = spec(Structure::Lrm, n);
        let linear: HashMap<String, f64> = entry_labels(&lrm)
            .into_iter()
            .zip(RegressorLayout::new(lrm).build(&h, k).unwrap())
            .collect();
        let mi = spec(Structure::NrmMi, n);
        for (label, value) in entry_labels(&mi).into_iter().zip(RegressorLayout::new(mi).build(&h, k).unwrap()) {
            let rest: Vec<&str> = label.split('*').filter(|f| !f.starts_with("Vw(") && !f.starts_with("Va(")).collect();
            match rest.as_slice() {
                [] => prop_assert_eq!(value, 1.0),
                [one] => prop_assert_eq!(value, linear[*one], "{}", label),
                _ => prop_assert!(false, "unexpected entry {label}"),
            }
        }
    }

    #[test]
    fn limited_information_is_mi_with_unit_inlets(n in 1usize..4, seed in any::<u64>()) {
        let mut h = random_history(n, 12, seed);
        let k = h.len() - 1;
        let li = RegressorLayout::new(spec(Structure::NrmLi, n)).build(&h, k).unwrap();
        h.tw_in.iter_mut().for_each(|v| *v = 1.0);
        h.ta_in.iter_mut().for_each(|v| *v = 1.0);
        let mi = RegressorLayout::new(spec(Structure::NrmMi, n)).build(&h, k).unwrap();
        prop_assert_eq!(li, mi);
    }

    #[test]
    fn regressors_need_exactly_max_lag_of_history(n in 1usize..4, seed in any::<u64>()) {
        for s in Structure::ALL {
            let sp = spec(s, n);
            let d = max_lag(&sp);
            let h = random_history(n, d + 1, seed);
            let layout = RegressorLayout::new(sp);
            prop_assert!(layout.build(&h, d).is_ok());
            prop_assert!(layout.build(&h, d - 1).is_err());
        }
    }

    #[test]
    fn constant_operators_commute(
        a in prop::collection::vec(-2.0f64..2.0, 1..4),
        b in prop::collection::vec(-2.0f64..2.0, 1..4),
        x in prop::collection::vec(-10.0f64..10.0, 12),
    ) {
        let (pa, pb) = (DelayPolynomialOp::constant(&a), DelayPolynomialOp::constant(&b));
        prop_assert!(verify_property_1(&pa, &pb, &x).unwrap() < 1e-12);
    }

    #[test]
    fn same_separator_commutes_exactly(eps in 0.01f64..0.5, a in -3.0f64..0.0, x in prop::collection::vec(-10.0f64..10.0, 12)) {
        let q = DelayPolynomialOp::separator(eps, a);
        prop_assert_eq!(verify_property_1(&q, &q, &x).unwrap(), 0.0);
    }

    #[test]
    fn composition_convolves_coefficients(
        a in prop::collection::vec(-2.0f64..2.0, 1..4),
        b in prop::collection::vec(-2.0f64..2.0, 1..4),
        x in prop::collection::vec(-10.0f64..10.0, 12),
    ) {
        let mut conv = vec![0.0; a.len() + b.len() - 1];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                conv[i + j] += ai * bj;
            }
        }
        let (pa, pb) = (DelayPolynomialOp::constant(&a), DelayPolynomialOp::constant(&b));
        for k in conv.len() - 1..x.len() {
            let direct = apply_chain(&[&pa, &pb], &x, k).unwrap();
            let expanded: f64 = conv.iter().enumerate().map(|(m, c)| c * x[k - m]).sum();
            prop_assert!((direct - expanded).abs() < 1e-12);
        }
    }
}

#[test]
fn flow_step_corrects_the_commutator_at_one_sample_only() {
    let (eps, a_s, lag, k0) = (1.0 / 12.0, -0.4, 2, 10);
    let a_wc: Vec<f64> = (0..30).map(|k| if k < k0 { -3.0 } else { -7.5 }).collect();
    let x: Vec<f64> = (0..30).map(|k| 20.0 + (k as f64 * 0.37).sin()).collect();
    for k in lag + 2..30 {
        let c = property_2_correction(&a_wc, a_s, eps, &x, lag, k).unwrap();
        if k == k0 + lag {
            assert!(c.abs() > 1e-3);
        } else {
            assert_eq!(c, 0.0, "k = {k}");
        }
    }
    assert!(verify_property_2(&a_wc, a_s, eps, &x, lag).unwrap() < 1e-12);
}
