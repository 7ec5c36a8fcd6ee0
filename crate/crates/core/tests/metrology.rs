use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, TAU};
use std::sync::Arc;

use fockline::fock::{enumerate_basis, schwinger_operators, Circuit, CircuitElement, PureState};
use fockline::linalg::{max_abs, CMatrix, CVector, C64};
use fockline::measurement::{binary_projector_povm, number_resolving_povm, outcome_distribution};
use fockline::metrology::*;
use proptest::prelude::*;

const JZ: GeneratorConvention = GeneratorConvention::Jz;
const ARM: GeneratorConvention = GeneratorConvention::SingleArm;

// ---- independent oracles -------------------------------------------------

fn permanent(m: &[Vec<C64>]) -> C64 {
    let n = m.len();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for (c, &a) in m[0].iter().enumerate() {
        let minor: Vec<Vec<C64>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(k, _)| k != c).map(|(_, &x)| x).collect())
            .collect();
        total += a * permanent(&minor);
    }
    total
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `<out| U |input>` for a linear-optical network with single-particle
/// matrix `u` (creation operators map as `a_j^dag -> sum_k u[k][j] a_k^dag`).
fn permanent_amplitude(u: &[[C64; 2]; 2], input: [u32; 2], out: [u32; 2]) -> C64 {
    let cols: Vec<usize> = (0..2).flat_map(|j| std::iter::repeat_n(j, input[j] as usize)).collect();
    let rows: Vec<usize> = (0..2).flat_map(|k| std::iter::repeat_n(k, out[k] as usize)).collect();
    if rows.len() != cols.len() {
        return C64::new(0.0, 0.0);
    }
    let sub: Vec<Vec<C64>> = rows.iter().map(|&r| cols.iter().map(|&c| u[r][c]).collect()).collect();
    let norm = (factorial(input[0]) * factorial(input[1]) * factorial(out[0]) * factorial(out[1])).sqrt();
    permanent(&sub) / norm
}

fn mul(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

fn splitter(v: f64) -> [[C64; 2]; 2] {
    let (s, c) = (v.sqrt(), (1.0 - v).sqrt());
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

fn jz_phase(phi: f64) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    [[C64::from_polar(1.0, phi / 2.0), z], [z, C64::from_polar(1.0, -phi / 2.0)]]
}

fn mzi_probability(v: f64, w: f64, phi: f64, input: [u32; 2], out: [u32; 2]) -> f64 {
    let u = mul(&splitter(w), &mul(&jz_phase(phi), &splitter(v)));
    permanent_amplitude(&u, input, out).norm_sqr()
}

/// `4 Var(G)` for a pure state and a diagonal generator.
fn four_variance(psi: &CVector, g: &[f64]) -> f64 {
    let mean: f64 = psi.iter().zip(g).map(|(a, &x)| a.norm_sqr() * x).sum();
    let second: f64 = psi.iter().zip(g).map(|(a, &x)| a.norm_sqr() * x * x).sum();
    4.0 * (second - mean * mean)
}

// ---- outcome distribution ------------------------------------------------

#[test]
fn hb1_distribution_matches_permanents() {
    let (channel, input) = holland_burnett_network(1, 0.5, Some(0.5), NetworkLosses::LOSSLESS, JZ).unwrap();
    let povm = number_resolving_povm(channel.basis(), &[0, 1]).unwrap();
    let rho = channel.probe(&input.to_density()).unwrap().state(FRAC_PI_2);
    let p = fockline::measurement::outcome_distribution_matrix(&rho, &povm).unwrap();
    for (label, out) in [("(2,0,)", [2, 0]), ("(0,2)", [0, 2]), ("(1,1)", [1, 1])] {
        let label = label.replace(",)", ")");
        let k = povm.labels().iter().position(|l| *l == label).unwrap();
        let oracle = mzi_probability(0.5, 0.5, FRAC_PI_2, [1, 1], out);
        assert!((p[k] - oracle).abs() < 1e-12, "{label}: {} vs {oracle}", p[k]);
    }
}

#[test]
fn vacuum_distribution_under_clicks() {
    let b = Arc::new(enumerate_basis(2, 2).unwrap());
    let povm = fockline::measurement::click_povm(&b, &[0, 1]).unwrap();
    let p = outcome_distribution(&PureState::fock(b, &[0, 0]).unwrap().to_density(), &povm).unwrap();
    assert_eq!(p[0], 1.0);
}

// ---- classical Fisher information ----------------------------------------

fn mzi_channel(v: f64, w: f64, photons: usize, convention: GeneratorConvention) -> PhaseChannel {
    let b = Arc::new(enumerate_basis(2, photons).unwrap());
    PhaseChannel::new(
        &b,
        &Circuit::new(vec![CircuitElement::splitter_with_ratio(0, 1, v)], vec![]).unwrap(),
        (0, 1),
        convention,
        &Circuit::new(vec![CircuitElement::splitter_with_ratio(0, 1, w)], vec![]).unwrap(),
    )
    .unwrap()
}

#[test]
fn single_photon_fringe_has_unit_fisher() {
    for conv in GeneratorConvention::ALL {
        let ch = mzi_channel(0.5, 0.5, 1, conv);
        let povm = binary_projector_povm(ch.basis(), &[0], &[1]).unwrap();
        let probe = ch.probe(&PureState::fock(ch.basis().clone(), &[1, 0]).unwrap().to_density()).unwrap();
        let (_, f) = probe.max_classical_fisher_information(&povm).unwrap();
        assert!((f.value - 1.0).abs() < 1e-8, "{conv}: {}", f.value);
        assert_eq!(f.convention, conv);
        // the analytic fringe is p = cos^2 or sin^2 of phi/2, F = 1 away from its zeros
        let f_mid = probe.classical_fisher_information(&povm, 1.0).unwrap();
        assert!((f_mid.value - 1.0).abs() < 1e-8);
    }
}

#[test]
fn phase_insensitive_probe_has_zero_fisher() {
    let ch = mzi_channel(0.5, 0.5, 2, JZ);
    let povm = number_resolving_povm(ch.basis(), &[0, 1]).unwrap();
    let probe = ch.probe(&PureState::fock(ch.basis().clone(), &[0, 0]).unwrap().to_density()).unwrap();
    assert_eq!(probe.classical_fisher_information(&povm, 0.7).unwrap().value, 0.0);
}

#[test]
fn number_resolution_attains_qfi_for_lossless_hb1() {
    for conv in GeneratorConvention::ALL {
        let (ch, input) = holland_burnett_network(1, 0.5, Some(0.5), NetworkLosses::LOSSLESS, conv).unwrap();
        let povm = number_resolving_povm(ch.basis(), &[0, 1]).unwrap();
        let probe = ch.probe(&input.to_density()).unwrap();
        let (_, f) = probe.max_classical_fisher_information(&povm).unwrap();
        let fq = probe.quantum_fisher_information(0.3).unwrap().value;
        assert!((f.value - fq).abs() < 1e-6, "{conv}: F={} FQ={fq}", f.value);
    }
}

#[test]
fn fisher_never_exceeds_qfi() {
    let configs = [(0.3, 0.5, 0.9, 0.8, 0.7), (0.5, 0.2, 0.6, 1.0, 0.9), (0.8, 0.5, 1.0, 0.5, 0.5)];
    for (v, w, eta_p, eta, eta_d) in configs {
        for conv in GeneratorConvention::ALL {
            let losses = NetworkLosses { eta_p, eta, eta_d };
            let (ch, input) = holland_burnett_network(2, v, Some(w), losses, conv).unwrap();
            let probe = ch.probe(&input.to_density()).unwrap();
            let povm = number_resolving_povm(ch.basis(), &[0, 1]).unwrap();
            for k in 0..12 {
                let phi = 0.37 + k as f64 * 0.5;
                let f = probe.classical_fisher_information(&povm, phi).unwrap().value;
                let fq = probe.quantum_fisher_information(phi).unwrap().value;
                assert!(f <= fq + 1e-6, "F={f} FQ={fq}");
            }
        }
    }
}

// ---- quantum Fisher information ------------------------------------------

#[test]
fn fock_eigenstate_has_zero_qfi() {
    let b = Arc::new(enumerate_basis(2, 1).unwrap());
    let ch = PhaseChannel::new(&b, &Circuit::empty(), (0, 1), ARM, &Circuit::empty()).unwrap();
    let probe = ch.probe(&PureState::fock(b, &[1, 0]).unwrap().to_density()).unwrap();
    assert_eq!(probe.quantum_fisher_information(0.4).unwrap().value, 0.0);
}

#[test]
fn hb_qfi_matches_four_variance_oracle() {
    for n in 1..=4u32 {
        let b = enumerate_basis(2, 2 * n as usize).unwrap();
        let j = schwinger_operators(&b).unwrap();
        for v in [0.1f64, 0.5, 0.73] {
            // |N,N> through exp(-2 i theta J_x), built from the Schwinger matrices directly
            let theta = v.sqrt().asin();
            let u = fockline::linalg::expm_i_hermitian(&j.jx, -2.0 * theta);
            let mut nn = CVector::zeros(b.dim());
            nn[b.index_of(&[n, n]).unwrap()] = C64::new(1.0, 0.0);
            let psi = &u * nn;
            let g_jz: Vec<f64> = b.states().map(|o| 0.5 * (o[0] as f64 - o[1] as f64)).collect();
            let g_arm: Vec<f64> = b.states().map(|o| o[0] as f64).collect();
            let closed = 8.0 * (n * (n + 1)) as f64 * v * (1.0 - v);
            assert!((four_variance(&psi, &g_jz) - closed).abs() < 1e-9 * closed.max(1.0));
            assert!((four_variance(&psi, &g_arm) - closed).abs() < 1e-9 * closed.max(1.0));
            for conv in GeneratorConvention::ALL {
                let fq = holland_burnett_qfi(n, v, NetworkLosses::LOSSLESS, conv).unwrap();
                assert!((fq - closed).abs() < 1e-9 * closed, "N={n} v={v} {conv}: {fq} vs {closed}");
            }
        }
    }
}

#[test]
fn hb_qfi_functional_form() {
    for n in 1..=4u32 {
        let half = holland_burnett_qfi(n, 0.5, NetworkLosses::LOSSLESS, JZ).unwrap();
        let one = holland_burnett_qfi(1, 0.5, NetworkLosses::LOSSLESS, JZ).unwrap();
        assert!((half / one - (n * (n + 1)) as f64 / 2.0).abs() < 1e-9);
        for v in [0.05, 0.2, 0.4, 0.6, 0.95] {
            let fq = holland_burnett_qfi(n, v, NetworkLosses::LOSSLESS, JZ).unwrap();
            assert!((fq / half - 4.0 * v * (1.0 - v)).abs() < 1e-9);
        }
    }
}

#[test]
fn lossy_hb1_qfi_is_four_t_squared() {
    // loss commutes with the splitter; only the surviving two-photon HB component carries phase information
    for (eta_p, eta, eta_d) in [(0.9, 0.95, 0.6), (0.5, 1.0, 0.8), (1.0, 0.7, 0.7)] {
        let t: f64 = eta_p * eta * eta_d;
        for conv in GeneratorConvention::ALL {
            let fq = holland_burnett_qfi(1, 0.5, NetworkLosses { eta_p, eta, eta_d }, conv).unwrap();
            assert!((fq - 4.0 * t * t).abs() < 1e-10, "{fq} vs {}", 4.0 * t * t);
        }
    }
}

#[test]
fn qfi_is_monotone_in_each_loss() {
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    for which in 0..3 {
        let mut last = 0.0;
        for &x in &grid {
            let mut l = [0.9, 0.85, 0.7];
            l[which] = x;
            let fq = holland_burnett_qfi(2, 0.5, NetworkLosses { eta_p: l[0], eta: l[1], eta_d: l[2] }, JZ).unwrap();
            assert!(fq >= last - 1e-9);
            last = fq;
        }
    }
}

#[test]
fn analytic_derivative_matches_finite_difference() {
    let losses = NetworkLosses { eta_p: 0.8, eta: 0.9, eta_d: 0.7 };
    let (ch, input) = holland_burnett_network(2, 0.4, Some(0.3), losses, ARM).unwrap();
    let probe = ch.probe(&input.to_density()).unwrap();
    let (phi, h) = (0.8, 1e-5);
    let (_, d) = probe.state_and_derivative(phi);
    let fd: CMatrix = (probe.state(phi + h) - probe.state(phi - h)) / C64::new(2.0 * h, 0.0);
    assert!(max_abs(&(d - fd)) < 1e-6);
}

#[test]
fn qfi_rejects_non_hermitian_input() {
    let mut m = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
    m[(0, 1)] = C64::new(0.3, 0.0);
    assert!(matches!(
        quantum_fisher_information(&m, &CMatrix::zeros(2, 2)),
        Err(fockline::Error::NotHermitian(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn qfi_peaks_at_balanced_splitter(v in 0.01f64..0.99, n in 1u32..4) {
        for conv in GeneratorConvention::ALL {
            let fq = holland_burnett_qfi(n, v, NetworkLosses::LOSSLESS, conv).unwrap();
            let peak = holland_burnett_qfi(n, 0.5, NetworkLosses::LOSSLESS, conv).unwrap();
            prop_assert!(fq <= peak + 1e-12);
            prop_assert!((fq / peak - 4.0 * v * (1.0 - v)).abs() < 1e-9);
        }
    }
}

// ---- bounds and phase axis -----------------------------------------------

#[test]
fn precision_bound_examples() {
    let b = precision_bounds(100.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    assert!((b.sql - 0.1).abs() < 1e-15);
    assert_eq!(b.sil, b.sql);
    let b = precision_bounds(1.0, 1.0, 0.95, 0.6, 0.0, 2.0).unwrap();
    assert!((b.sil - 1.0 / 0.57f64.sqrt()).abs() < 1e-15);
    assert_eq!(b.crb, f64::INFINITY);
    assert!(b.hl <= b.sql && b.sql <= b.sil);
    assert!(precision_bounds(0.5, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    assert!(precision_bounds(1.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn effective_phase_axis_examples() {
    let a = effective_phase_axis(FRAC_PI_4);
    assert!(a.jz.abs() < 1e-15 && (a.jy + 1.0).abs() < 1e-15 && (a.shrink - 1.0).abs() < 1e-15);
    let a = effective_phase_axis(0.0);
    assert_eq!((a.jz, a.jy, a.shrink), (1.0, 0.0, 0.0));
    assert!((effective_phase_axis(FRAC_PI_8).shrink - 0.5f64.sqrt()).abs() < 1e-15);
    let b = enumerate_basis(2, 4).unwrap();
    for theta in [0.0, FRAC_PI_8, FRAC_PI_4, 1.1] {
        for phi in [0.3, 2.0] {
            assert!(effective_phase_axis_residual(&b, theta, phi).unwrap() < 1e-10);
        }
    }
}

// ---- Fisher surface ------------------------------------------------------

fn coincidence_fisher_oracle(v: f64, w: f64) -> f64 {
    let p = |phi: f64| mzi_probability(v, w, phi, [1, 1], [1, 1]);
    (0..20_000)
        .map(|k| {
            let phi = TAU * k as f64 / 20_000.0;
            let h = 1e-5;
            let dp = (p(phi + h) - p(phi - h)) / (2.0 * h);
            let q = p(phi);
            if q > 1e-12 && q < 1.0 - 1e-12 {
                dp * dp / (q * (1.0 - q))
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn fisher_surface_examples() {
    let grid = unit_grid(5);
    let s = fisher_surface(&grid, &grid, JZ).unwrap();
    for j in 0..5 {
        assert!(s.values[0][j].abs() < 1e-9 && s.values[4][j].abs() < 1e-9);
    }
    let centre = s.values[2][2];
    assert!((centre - coincidence_fisher_oracle(0.5, 0.5)).abs() < 1e-4);
    assert!((centre - 4.0).abs() < 1e-6);
    for i in 0..5 {
        for j in 0..5 {
            assert!(s.values[i][j] >= 0.0);
            assert!((s.values[i][j] - s.values[4 - i][j]).abs() < 1e-9, "v<->1-v at {i},{j}");
            assert!((s.values[i][j] - s.values[4 - i][4 - j]).abs() < 1e-9);
        }
    }
    let off = fisher_surface_cell(0.3, 0.6, JZ).unwrap().0;
    assert!((off - coincidence_fisher_oracle(0.3, 0.6)).abs() < 1e-3 * off.max(1.0));
}

// ---- thresholds and N00N --------------------------------------------------

#[test]
fn lossless_threshold_exists() {
    let r = hb_loss_threshold(1, 1.0, 1.0, JZ).unwrap();
    match r.outcome {
        ThresholdOutcome::Found { eta_p, qcrb, sil } => {
            assert!(eta_p < 1.0);
            assert!(qcrb <= sil + 1e-12);
            // 4 eta_p^2 >= 2 analytically
            assert!((eta_p - 0.5f64.sqrt()).abs() <= THRESHOLD_TOLERANCE);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(r.resource_photons, 2);
}

#[test]
fn threshold_is_monotone_in_detector_efficiency() {
    let mut last = f64::INFINITY;
    for eta_d in [0.6, 0.7, 0.8, 0.9, 0.98] {
        let r = hb_loss_threshold(1, 0.95, eta_d, JZ).unwrap();
        let ThresholdOutcome::Found { eta_p, .. } = r.outcome else { panic!() };
        let analytic = (1.0 / (2.0 * 0.95 * eta_d)).sqrt();
        assert!((eta_p - analytic).abs() <= THRESHOLD_TOLERANCE);
        assert!(eta_p <= last);
        last = eta_p;
    }
}

#[test]
fn noon_sensitivity() {
    for n in 1..=4u32 {
        let ideal = noon_loss_sensitivity(n, 1.0, ARM).unwrap();
        assert!((ideal.total - (n * n) as f64).abs() < 1e-9);
        let lossy = noon_loss_sensitivity(n, 0.7, ARM).unwrap();
        for &(k, p, c) in &lossy.sectors {
            if k < n {
                assert!(c.abs() < 1e-12, "sector {k} carries {c}");
            } else {
                assert!((p - 0.7f64.powi(n as i32)).abs() < 1e-12);
                assert!((c - p * (n * n) as f64).abs() < 1e-9);
            }
        }
        assert_eq!(noon_loss_sensitivity(n, 0.0, ARM).unwrap().total, 0.0);
    }
}

#[test]
fn phase_axis_residual_needs_two_modes() {
    let b = enumerate_basis(3, 1).unwrap();
    assert!(effective_phase_axis_residual(&b, 0.2, 0.1).is_err());
    let _ = PI;
}
