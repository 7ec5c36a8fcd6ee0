use std::f64::consts::{FRAC_PI_2, PI, TAU};

use fockline::characterize::*;
use fockline::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// direct transcription of the two-splitter amplitude sum, independent of
// the (A, B) coefficient form used by the library
fn v_eff_oracle(v: f64, w: f64, phi: f64) -> f64 {
    let amp_re = (v * w).sqrt() + ((1.0 - v) * (1.0 - w)).sqrt() * phi.cos();
    let amp_im = ((1.0 - v) * (1.0 - w)).sqrt() * phi.sin();
    amp_re * amp_re + amp_im * amp_im
}

#[test]
fn fringe_identities() {
    assert_eq!(effective_reflectivity(0.5, 0.5, 0.0).unwrap(), 1.0);
    assert_eq!(effective_reflectivity(0.5, 0.5, PI).unwrap(), 0.0);
    assert!((effective_reflectivity(0.6, 0.5, FRAC_PI_2).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn fringe_matches_amplitude_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let (v, w, phi) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>() * TAU);
        let got = effective_reflectivity(v, w, phi).unwrap();
        assert!((got - v_eff_oracle(v, w, phi)).abs() < 1e-12);
    }
}

#[test]
fn fringe_range_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let (v, w) = (rng.random::<f64>(), rng.random::<f64>());
        let hi = effective_reflectivity(v, w, 0.0).unwrap();
        let lo = effective_reflectivity(v, w, PI).unwrap();
        let expected = 4.0 * (v * (1.0 - v) * w * (1.0 - w)).sqrt();
        assert!((hi - lo - expected).abs() < 1e-12, "v={v} w={w}");
    }
}

#[test]
fn out_of_range_ratio_is_rejected() {
    assert!(matches!(effective_reflectivity(1.2, 0.5, 0.0), Err(Error::OutOfRange { name: "v", .. })));
    assert!(matches!(effective_reflectivity(0.5, -0.1, 0.0), Err(Error::OutOfRange { name: "w", .. })));
}

#[test]
fn ratiometric_examples() {
    let equal = ratiometric_reflectivity(&RatiometricData::new(2.0, 2.0, 2.0, 2.0)).unwrap();
    assert_eq!(equal.u, 0.5);
    let data = RatiometricData::forward(1.0 / 3.0, [0.7, 0.5, 0.9, 0.4], 1.0);
    let est = ratiometric_reflectivity(&data).unwrap();
    assert!((est.u - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn ratiometric_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let u: f64 = rng.random_range(1e-3..1.0);
        let eta = [0; 4].map(|_| rng.random_range(1e-3..=1.0));
        let intensity = rng.random_range(0.1..100.0);
        let est = ratiometric_reflectivity(&RatiometricData::forward(u, eta, intensity)).unwrap();
        assert!((est.u - u).abs() < 1e-12, "u={u} got {}", est.u);
    }
}

#[test]
fn coupling_scale_cancels() {
    let base = RatiometricData::new(0.31, 0.52, 0.27, 0.44);
    let u0 = ratiometric_reflectivity(&base).unwrap().u;
    // eta_a multiplies I_ac and I_ad; eta_c multiplies I_ac and I_bc
    let scaled_a = RatiometricData::new(base.i_ac * 8.0, base.i_ad * 8.0, base.i_bc, base.i_bd);
    let scaled_c = RatiometricData::new(base.i_ac * 0.25, base.i_ad, base.i_bc * 0.25, base.i_bd);
    assert_eq!(ratiometric_reflectivity(&scaled_a).unwrap().u, u0);
    assert_eq!(ratiometric_reflectivity(&scaled_c).unwrap().u, u0);
}

#[test]
fn ratiometric_uncertainty_matches_finite_difference() {
    let mut data = RatiometricData::forward(0.3, [0.8, 0.6, 0.7, 0.9], 10.0);
    let errs = [0.01, 0.02, 0.015, 0.005];
    data.stderr = Some(errs);
    let est = ratiometric_reflectivity(&data).unwrap();
    let vals = [data.i_ac, data.i_ad, data.i_bc, data.i_bd];
    let mut var = 0.0;
    for k in 0..4 {
        let h = 1e-6 * vals[k];
        let mut up = vals;
        let mut dn = vals;
        up[k] += h;
        dn[k] -= h;
        let f = |x: [f64; 4]| ratiometric_reflectivity(&RatiometricData::new(x[0], x[1], x[2], x[3])).unwrap().u;
        let g = (f(up) - f(dn)) / (2.0 * h);
        var += (g * errs[k]).powi(2);
    }
    assert!((est.stderr.unwrap() - var.sqrt()).abs() < 1e-8);
}

#[test]
fn ratiometric_errors_name_the_intensity() {
    let zero = ratiometric_reflectivity(&RatiometricData::new(1.0, 1.0, 1.0, 0.0));
    assert!(matches!(zero, Err(Error::ZeroIntensity { name: "I_bd" })));
    let zero = ratiometric_reflectivity(&RatiometricData::new(0.0, 1.0, 1.0, 1.0));
    assert!(matches!(zero, Err(Error::ZeroIntensity { name: "I_ac" })));
    let neg = ratiometric_reflectivity(&RatiometricData::new(1.0, -1.0, 1.0, 1.0));
    assert!(matches!(neg, Err(Error::NegativeIntensity { name: "I_ad", .. })));
}

#[test]
fn ratiometric_csv() {
    let ok = "input_mode,output_mode,intensity,stderr\na,c,1.0,0.1\na,d,2.0,0.1\nb,c,2.0,0.1\nb,d,1.0,0.1\n";
    let data = read_ratiometric_csv(ok.as_bytes()).unwrap();
    assert_eq!(data.i_ad, 2.0);
    assert!(data.stderr.is_some());
    assert!((ratiometric_reflectivity(&data).unwrap().u - 1.0 / 3.0).abs() < 1e-15);

    let neg = "input_mode,output_mode,intensity\na,c,1.0\na,d,-2.0\nb,c,2.0\nb,d,1.0\n";
    assert!(matches!(read_ratiometric_csv(neg.as_bytes()), Err(Error::Schema { line: 3, .. })));
    let missing = "input_mode,output_mode\na,c\n";
    assert!(matches!(read_ratiometric_csv(missing.as_bytes()), Err(Error::Schema { line: 1, .. })));
    let unknown = "input_mode,output_mode,intensity\na,e,1.0\n";
    assert!(matches!(read_ratiometric_csv(unknown.as_bytes()), Err(Error::Schema { line: 2, .. })));
    let dup = "input_mode,output_mode,intensity\na,c,1.0\na,c,1.0\n";
    assert!(matches!(read_ratiometric_csv(dup.as_bytes()), Err(Error::Schema { line: 3, .. })));
    let short = "input_mode,output_mode,intensity\na,c,1.0\n";
    assert!(read_ratiometric_csv(short.as_bytes()).is_err());
}

#[test]
fn reachability_examples() {
    let phi = reachable_phase(0.5, 0.5, 0.5).unwrap().phase().unwrap();
    assert!((phi - FRAC_PI_2).abs() < 1e-15);
    for t in [0.0, 0.2, 0.7, 1.0] {
        let phi = reachable_phase(0.5, 0.5, t).unwrap().phase().unwrap();
        assert!((phi - (2.0 * t - 1.0).acos()).abs() < 1e-12);
    }
    // endpoints at phi = 0 and pi: (sqrt(vw) -+ sqrt((1-v)(1-w)))^2
    let (lo, hi) = ((0.09f64.sqrt() - 0.09f64.sqrt()).powi(2), (0.3f64 + 0.3).powi(2));
    match reachable_phase(0.9, 0.1, 0.5).unwrap() {
        Reachability::Unreachable { min, max } => {
            assert!((min - lo).abs() < 1e-12 && (max - hi).abs() < 1e-12);
        }
        r => panic!("expected unreachable, got {r:?}"),
    }
    assert_eq!(reachable_phase(1.0, 0.3, 0.3).unwrap(), Reachability::Reachable { phi: 0.0 });
    assert!(reachable_phase(1.0, 0.3, 0.4).unwrap().phase().is_none());
}

#[test]
fn reachability_map_symmetry_and_white_fraction() {
    let grid: Vec<f64> = (0..101).map(|k| k as f64 / 100.0).collect();
    for target in [0.5, 1.0 / 3.0] {
        let map = reachability_map(target, &grid, &grid).unwrap();
        let mut white = 0;
        for i in 0..101 {
            for j in 0..101 {
                assert_eq!(map.phase[i][j], map.phase[j][i]);
                let (v, w) = (grid[i], grid[j]);
                let a = (v * w).sqrt();
                let b = ((1.0 - v) * (1.0 - w)).sqrt();
                let (lo, hi) = ((a - b).powi(2), (a + b).powi(2));
                if target < lo - 1e-12 || target > hi + 1e-12 {
                    white += 1;
                }
            }
        }
        assert!((map.unreachable_fraction() - white as f64 / 101.0 / 101.0).abs() < 1e-15);
        assert!(white > 0);
    }
    let mut buf = Vec::new();
    reachability_map(0.3, &[0.5], &[0.5, 1.0]).unwrap().write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("v,w,phase_rad\n"));
    assert!(text.ends_with("0.5,1,\n"));
    assert!(!text.contains('\r'));
}

fn synth(v: f64, w: f64, phi0: f64, kappa: f64, powers: &[f64]) -> Vec<FringeSample> {
    powers
        .iter()
        .map(|&p| FringeSample {
            power: p,
            v_eff: v_eff_oracle(v, w, phi0 + kappa * p),
            stderr: None,
        })
        .collect()
}

#[test]
fn noiseless_fit_recovers_balanced_fringe() {
    let powers: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let fit = fit_fringe(&synth(0.5, 0.5, 0.0, PI, &powers)).unwrap();
    let m = fit.model;
    assert!((m.v - 0.5).abs() < 1e-6 && (m.w - 0.5).abs() < 1e-6, "{m:?}");
    assert!((m.kappa - PI).abs() < 1e-6);
    let dphi = (m.phi0 + PI).rem_euclid(TAU) - PI;
    assert!(dphi.abs() < 1e-6);
    assert!((fit.fringe_max - 1.0).abs() < 1e-6);
    assert!(fit.rms < 1e-9);
}

#[test]
fn noiseless_fit_reports_ambiguities() {
    let powers: Vec<f64> = (0..40).map(|k| 0.05 * k as f64).collect();
    let fit = fit_fringe(&synth(0.8, 0.3, 1.1, 4.0, &powers)).unwrap();
    // canonical representative of {0.8, 0.3} under exchange and complement
    let (v, w) = (fit.model.v, fit.model.w);
    assert!((v - 0.2).abs() < 1e-6 && (w - 0.7).abs() < 1e-6, "{v} {w}");
    assert!((fit.complement.0 - 0.3).abs() < 1e-6 && (fit.complement.1 - 0.8).abs() < 1e-6);
    assert!(fit.exchange_ambiguous && fit.complement_ambiguous);
    assert!((fit.model.kappa - 4.0).abs() < 1e-6);
    // phi0 is determined up to sign of the phase slope, which is fixed positive
    assert!((fit.model.phi0 - 1.1).abs() < 1e-6);
    for s in synth(0.8, 0.3, 1.1, 4.0, &powers) {
        assert!((fit.model.predict(s.power).unwrap() - s.v_eff).abs() < 1e-9);
    }
}

#[test]
fn noisy_fit_within_tolerance() {
    let (v0, w0) = (0.45, 0.55);
    let powers: Vec<f64> = (0..101).map(|k| 0.02 * k as f64).collect();
    let kappa = PI;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples: Vec<FringeSample> = powers
        .iter()
        .map(|&p| {
            let y = v_eff_oracle(v0, w0, 0.3 + kappa * p);
            let e: f64 = rng.sample(StandardNormal);
            FringeSample {
                power: p,
                v_eff: y * (1.0 + 0.005 * e),
                stderr: Some((0.005 * y).max(1e-6)),
            }
        })
        .collect();
    let fit = fit_fringe(&samples).unwrap();
    let got = [fit.model.v, fit.model.w];
    let alt = [fit.complement.0, fit.complement.1];
    let close = |p: [f64; 2]| (p[0] - v0).abs() < 0.01 && (p[1] - w0).abs() < 0.01;
    assert!(close(got) || close(alt), "{got:?} / {alt:?}");
    assert!((fit.model.kappa - kappa).abs() < 0.05);
}

#[test]
fn degenerate_fringes() {
    let powers: Vec<f64> = (0..10).map(|k| k as f64).collect();
    let flat: Vec<FringeSample> = powers
        .iter()
        .map(|&p| FringeSample {
            power: p,
            v_eff: 0.4,
            stderr: None,
        })
        .collect();
    assert!(matches!(fit_fringe(&flat), Err(Error::DegenerateFit(_))));
    assert!(matches!(fit_fringe(&flat[..4]), Err(Error::DegenerateFit(_))));
    let mut repeated = synth(0.3, 0.6, 0.0, 1.0, &powers);
    repeated[3].power = repeated[2].power;
    assert!(matches!(fit_fringe(&repeated), Err(Error::DegenerateFit(_))));
}

#[test]
fn fringe_csv_round_trip() {
    let samples = vec![
        FringeSample {
            power: 0.0,
            v_eff: 0.25,
            stderr: Some(0.01),
        },
        FringeSample {
            power: 0.1,
            v_eff: 0.5,
            stderr: Some(0.01),
        },
    ];
    let mut buf = Vec::new();
    write_fringe_csv(&samples, &mut buf).unwrap();
    assert_eq!(read_fringe_csv(buf.as_slice()).unwrap(), samples);
    let bad = "power_W,v_eff\n0.0,0.1\n0.1,abc\n";
    assert!(matches!(read_fringe_csv(bad.as_bytes()), Err(Error::Schema { line: 3, .. })));
    let missing = "power,v_eff\n0.0,0.1\n";
    assert!(matches!(read_fringe_csv(missing.as_bytes()), Err(Error::Schema { line: 1, .. })));
}

proptest! {
    #[test]
    fn reachable_phase_is_consistent(v in 0.0f64..=1.0, w in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        if let Some(phi) = reachable_phase(v, w, t).unwrap().phase() {
            prop_assert!((effective_reflectivity(v, w, phi).unwrap() - t).abs() < 1e-10);
        }
    }

    #[test]
    fn effective_reflectivity_stays_physical(v in 0.0f64..=1.0, w in 0.0f64..=1.0, phi in -10.0f64..10.0) {
        let x = effective_reflectivity(v, w, phi).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x, effective_reflectivity(w, v, phi).unwrap());
    }

    #[test]
    fn fit_is_exchange_symmetric(v in 0.1f64..0.9, w in 0.1f64..0.9, phi0 in 0.0f64..TAU) {
        prop_assume!((v - w).abs() > 0.05 && (v + w - 1.0).abs() > 0.05);
        let powers: Vec<f64> = (0..30).map(|k| 0.1 * k as f64).collect();
        let a = fit_fringe(&synth(v, w, phi0, 2.0, &powers)).unwrap();
        let b = fit_fringe(&synth(w, v, phi0, 2.0, &powers)).unwrap();
        prop_assert!((a.model.v - b.model.v).abs() < 1e-8 && (a.model.w - b.model.w).abs() < 1e-8);
        let canon = {
            let (lo, hi) = (v.min(w), v.max(w));
            if lo + hi <= 1.0 { (lo, hi) } else { (1.0 - hi, 1.0 - lo) }
        };
        prop_assert!((a.model.v - canon.0).abs() < 1e-6 && (a.model.w - canon.1).abs() < 1e-6);
    }
}
