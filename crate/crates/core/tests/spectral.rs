use fockline::linalg::{CMatrix, C64};
use fockline::spectral::*;
use fockline::Error;
use nalgebra::DMatrix;

fn frobenius_purity(f: &CMatrix) -> f64 {
    let rho = f * f.adjoint();
    let n2: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    (&rho * &rho).trace().re / (n2 * n2)
}

fn correlated() -> JointSpectralAmplitude {
    build_jsa(&preset("correlated").unwrap()).unwrap()
}

fn gaussian_model(k_s: f64, k_i: f64, points: usize) -> JsaModel {
    JsaModel {
        pump_bandwidth: 1.0,
        k_s,
        k_i,
        phase_matching: PhaseMatching::Gaussian,
        grid: GridSpec {
            points,
            ..GridSpec::default()
        },
    }
}

#[test]
fn matched_gaussian_is_separable() {
    let jsa = build_jsa(&gaussian_model(1.0, -1.0, 256)).unwrap();
    let s = schmidt_decompose(&jsa).unwrap();
    assert!((s.purity - 1.0).abs() < 1e-10);
    assert!(s.coefficients[1] / s.coefficients[0] < 1e-14);
    assert!((jsa.norm_squared() - 1.0).abs() < 1e-12);
}

#[test]
fn correlated_preset_purity_and_spectrum() {
    let jsa = correlated();
    let s = schmidt_decompose(&jsa).unwrap();
    assert!((s.purity - 0.27).abs() < 0.01);
    assert!((s.purity - frobenius_purity(jsa.amplitude())).abs() < 1e-10);
    assert!((s.coefficients.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(s.coefficients.windows(2).all(|w| w[0] >= w[1]));
    assert!(jsa.boundary_ratio() < 1e-4);
}

#[test]
fn matched_preset_has_sinc_side_lobes() {
    let jsa = build_jsa(&preset("matched").unwrap()).unwrap();
    let s = schmidt_decompose(&jsa).unwrap();
    assert!((s.purity - frobenius_purity(jsa.amplitude())).abs() < 1e-10);
    // along the phase-matching axis s = -i the sinc changes sign
    let n = jsa.axis().len();
    let diagonal: Vec<f64> = (0..n).map(|k| jsa.amplitude()[(k, n - 1 - k)].re).collect();
    assert!(diagonal.iter().any(|&x| x < 0.0));
}

#[test]
fn rank_one_and_two_term_forms() {
    let n = 64;
    let axis: Vec<f64> = (0..n).map(|k| k as f64 / 10.0).collect();
    let u = |k: usize| ((k as f64) * 0.3).sin();
    let rank1 = CMatrix::from_fn(n, n, |r, c| C64::new(u(r) * (c as f64).cos(), 0.0));
    let s = schmidt_decompose(&JointSpectralAmplitude::from_grid(axis.clone(), rank1).unwrap()).unwrap();
    assert!((s.purity - 1.0).abs() < 1e-12);
    assert!((s.coefficients[0] - 1.0).abs() < 1e-12);

    let mut two = CMatrix::zeros(n, n);
    two[(0, 0)] = C64::new(1.0, 0.0);
    two[(3, 5)] = C64::new(0.0, 1.0);
    let s = schmidt_decompose(&JointSpectralAmplitude::from_grid(axis, two).unwrap()).unwrap();
    assert!((s.purity - 0.5).abs() < 1e-12);
}

#[test]
fn zero_grid_rejected() {
    let axis: Vec<f64> = (0..4).map(f64::from).collect();
    let jsa = JointSpectralAmplitude::from_grid(axis, CMatrix::zeros(4, 4)).unwrap();
    assert!(matches!(schmidt_decompose(&jsa), Err(Error::ZeroAmplitude)));
}

#[test]
fn truncated_grid_reports_ratio() {
    let mut model = gaussian_model(1.0, -1.0, 64);
    model.grid.half_width = 1.5;
    match build_jsa(&model) {
        Err(Error::GridTruncation { ratio, tolerance }) => {
            assert!(ratio > 1e-4);
            assert_eq!(tolerance, 1e-4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn filter_limits() {
    let jsa = correlated();
    let open = apply_filters(&jsa, &[SpectralFilter::symmetric(f64::INFINITY).unwrap()]).unwrap();
    assert_eq!(open.amplitude(), jsa.amplitude());
    let narrow = apply_filters(&jsa, &[SpectralFilter::symmetric(1e-3).unwrap()]).unwrap();
    assert!(narrow.norm_squared() < 1e-4);
    assert!(matches!(
        apply_filters(
            &jsa,
            &[
                SpectralFilter::symmetric(1.0).unwrap(),
                SpectralFilter::new(1.0, 0.0, FilterArm::Idler).unwrap()
            ]
        ),
        Err(Error::FilterConflict("idler"))
    ));
    assert!(SpectralFilter::symmetric(0.0).is_err());
}

#[test]
fn pass_probability_matches_quadrature() {
    let jsa = correlated();
    let b = 1.0;
    let axis = jsa.axis();
    let t = |x: f64| (-x * x / (2.0 * b * b)).exp();
    let mut oracle = 0.0;
    for (r, &s) in axis.iter().enumerate() {
        for (c, &i) in axis.iter().enumerate() {
            oracle += jsa.amplitude()[(r, c)].norm_sqr() * t(s).powi(2) * t(i).powi(2);
        }
    }
    let fig = source_figures(&jsa, &[SpectralFilter::symmetric(b).unwrap()]).unwrap();
    assert!((fig.pass_probability - oracle).abs() < 1e-12);
    let filtered = apply_filters(&jsa, &[SpectralFilter::symmetric(b).unwrap()]).unwrap();
    assert!((filtered.norm_squared() - oracle).abs() < 1e-12);
}

#[test]
fn separable_source_heralding_is_signal_marginal_pass_fraction() {
    let jsa = build_jsa(&gaussian_model(1.0, -1.0, 256)).unwrap();
    for b in [0.3, 0.8, 2.0] {
        let fig = source_figures(&jsa, &[SpectralFilter::symmetric(b).unwrap()]).unwrap();
        assert!((fig.purity - 1.0).abs() < 1e-9);
        let a = jsa.amplitude();
        let marginal: Vec<f64> = (0..a.nrows()).map(|r| a.row(r).iter().map(|z| z.norm_sqr()).sum()).collect();
        let t2 = |x: f64| (-x * x / (b * b)).exp();
        let passed: f64 = marginal.iter().zip(jsa.axis()).map(|(m, &x)| m * t2(x)).sum();
        let oracle = passed / marginal.iter().sum::<f64>();
        assert!((fig.heralding_efficiency - oracle).abs() < 1e-12);
    }
}

#[test]
fn open_signal_filter_gives_unit_heralding() {
    let jsa = correlated();
    let fig = source_figures(&jsa, &[SpectralFilter::new(0.5, 0.0, FilterArm::Idler).unwrap()]).unwrap();
    assert!((fig.heralding_efficiency - 1.0).abs() < 1e-12);
}

#[test]
fn tradeoff_is_monotone_and_recovers_unfiltered_limit() {
    let jsa = correlated();
    let unfiltered = schmidt_decompose(&jsa).unwrap().purity;
    let bandwidths = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 1e6];
    let curve = tradeoff_scan(&jsa, &bandwidths).unwrap();
    assert!(curve[0].purity > 0.99);
    for w in curve.windows(2) {
        assert!(w[1].purity <= w[0].purity + 1e-12);
    }
    for p in &curve {
        assert!((0.0..=1.0).contains(&p.heralding_efficiency));
        assert!(p.pass_probability <= p.heralding_efficiency + 1e-15);
        assert!(p.purity <= 1.0 + 1e-12);
    }
    assert!((curve.last().unwrap().purity - unfiltered).abs() < 1e-9);
    assert!(tradeoff_scan(&jsa, &[1.0, 0.5]).is_err());
}

#[test]
fn purity_bounded_by_inverse_rank() {
    let jsa = correlated();
    let s = schmidt_decompose(&jsa).unwrap();
    let rank = s.coefficients.iter().filter(|&&l| l > 1e-14 * s.coefficients[0]).count();
    assert!(s.purity >= 1.0 / rank as f64 - 1e-12 && s.purity <= 1.0);
}

#[test]
fn real_fast_path_matches_complex_path() {
    let jsa = correlated();
    let phased = JointSpectralAmplitude::from_grid(
        jsa.axis().to_vec(),
        jsa.amplitude().map(|z| z * C64::from_polar(1.0, 0.7)),
    )
    .unwrap();
    assert!(phased.real_part_if_real().is_none());
    let a = schmidt_decompose(&jsa).unwrap().purity;
    let b = schmidt_decompose(&phased).unwrap().purity;
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn stored_presets_reproduce_their_calibration() {
    let stored = preset("correlated").unwrap();
    let again = calibrate_correlated(0.27, 0.2, (3.0, 40.0), GridSpec::default(), 1e-9).unwrap();
    assert!((stored.k_s - again.k_s).abs() < 1e-6);
    let stored = preset("matched").unwrap();
    let again = calibrate_matched((0.3, 4.0), stored.grid, 1e-6).unwrap();
    assert!((stored.k_s - again.k_s).abs() < 1e-3);
    assert_eq!(preset_file().version, 1);
    assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
}

#[test]
fn axis_must_be_uniform() {
    let m = DMatrix::<C64>::zeros(3, 3);
    assert!(JointSpectralAmplitude::from_grid(vec![0.0, 1.0, 3.0], m).is_err());
}
