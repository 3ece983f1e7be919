use std::f64::consts::PI;

use proptest::prelude::*;

use thermal_nrm::config::ExperimentConfig;
use thermal_nrm::excitation::{
    informativity_check, informativity_check_with, pe_order, spectrum, spectrum_with, DEFAULT_REL_THRESHOLD,
};
use thermal_nrm::regressors::{RegressorSpec, Structure};
use thermal_nrm::sim::run_experiment;

// Direct O(n^2) one-sided periodogram.
fn naive_power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let w = -2.0 * PI * (k * t) as f64 / n as f64;
                re += v * w.cos();
                im += v * w.sin();
            }
            let p = (re * re + im * im) / n as f64;
            if k == 0 || (n.is_multiple_of(2) && 2 * k == n) {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

fn tones(n: usize, dc: f64, parts: &[(f64, f64, f64)]) -> Vec<f64> {
    (0..n)
        .map(|k| {
            dc + parts
                .iter()
                .map(|(bin, amp, ph)| amp * (2.0 * PI * bin * k as f64 / n as f64 + ph).sin())
                .sum::<f64>()
        })
        .collect()
}

proptest! {
    #[test]
    fn parseval_holds(x in prop::collection::vec(-100.0f64..100.0, 8..300)) {
        let r = spectrum(&x).unwrap();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((r.power.iter().sum::<f64>() - energy).abs() <= 1e-9 * energy.max(1e-12));
    }

    #[test]
    fn periodogram_matches_direct_transform(x in prop::collection::vec(-10.0f64..10.0, 8..64)) {
        let r = spectrum(&x).unwrap();
        for (a, b) in r.power.iter().zip(naive_power(&x)) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn lines_ignore_amplitude_and_phase(
        amp in 0.01f64..1e3,
        ph in prop::collection::vec(0.0f64..std::f64::consts::TAU, 3),
        dc in 0.5f64..5.0,
    ) {
        let base = tones(512, 1.0, &[(5.0, 1.0, 0.0), (23.0, 0.7, 0.0), (71.0, 0.5, 0.0)]);
        let moved = tones(512, dc * amp, &[(5.0, amp, ph[0]), (23.0, 0.7 * amp, ph[1]), (71.0, 0.5 * amp, ph[2])]);
        let bins = |x: &[f64]| spectrum(x).unwrap().lines.iter().map(|l| l.bin).collect::<Vec<_>>();
        prop_assert_eq!(bins(&base), bins(&moved));
        prop_assert_eq!(pe_order(&spectrum(&moved).unwrap()), 7);
    }
}

#[test]
fn scaling_the_signal_keeps_lines() {
    let x = tones(1000, 3.0, &[(12.3, 2.0, 0.4), (40.0, 1.0, 1.0)]);
    let y: Vec<f64> = x.iter().map(|v| -250.0 * v).collect();
    assert_eq!(spectrum(&x).unwrap().lines.len(), spectrum(&y).unwrap().lines.len());
    assert_eq!(pe_order(&spectrum(&x).unwrap()), pe_order(&spectrum(&y).unwrap()));
}

#[test]
fn frequencies_convert_to_cycles_per_hour() {
    let r = spectrum(&tones(288, 0.0, &[(1.0, 1.0, 0.0)])).unwrap();
    let per_hour = r.freq_per_hour(1.0 / 12.0);
    // one cycle over 288 five-minute samples is one per day
    assert!((per_hour[r.lines[0].bin] - 1.0 / 24.0).abs() < 1e-12);
}

#[test]
fn bad_thresholds_are_rejected() {
    let x = tones(64, 0.0, &[(3.0, 1.0, 0.0)]);
    assert!(spectrum_with(&x, 0.0).is_err());
    assert!(spectrum_with(&x, 1.0).is_err());
    assert!(spectrum_with(&[1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.1).is_err());
}

#[test]
fn default_data_are_informative_and_a_constant_flow_is_not() {
    let cfg = ExperimentConfig::default();
    let ds = run_experiment(&cfg.plant, &cfg.sim).unwrap();
    for s in [Structure::Lrm, Structure::NrmMi, Structure::NrmLi] {
        let spec = RegressorSpec::new(s, 1).unwrap();
        let rep = informativity_check(&ds, &spec).unwrap();
        assert!(rep.pass, "{s}: {:?}", rep.columns);
        for factor in [2.0, 0.5] {
            let alt = informativity_check_with(&ds, &spec, DEFAULT_REL_THRESHOLD * factor).unwrap();
            assert_eq!(alt.pass, rep.pass, "{s} at threshold x{factor}");
        }
    }

    let mut flat = ds.clone();
    flat.vw.iter_mut().for_each(|v| *v = 0.05);
    let spec = RegressorSpec::new(Structure::NrmMi, 1).unwrap();
    let rep = informativity_check(&flat, &spec).unwrap();
    assert!(!rep.pass);
    let vw = rep.columns.iter().find(|c| c.column == "Vw").unwrap();
    assert!(vw.has_dc && vw.lines == 1 && vw.order == 1 && !vw.pass);
}
