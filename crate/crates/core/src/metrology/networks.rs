use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, partial_trace_operator, Circuit, CircuitElement, FockBasis, PureState};
use crate::linalg::{CMatrix, C64};
use crate::measurement::binary_projector_povm;

use super::channel::{quantum_fisher_information, GeneratorConvention, PhaseChannel};

const ANCILLA: usize = 2;

/// Transmissivities of the lossy phase-sensing network: `eta_p` on each
/// input arm, `eta` inside each arm, `eta_d` before each detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkLosses {
    pub eta_p: f64,
    pub eta: f64,
    pub eta_d: f64,
}

impl NetworkLosses {
    pub const LOSSLESS: Self = Self {
        eta_p: 1.0,
        eta: 1.0,
        eta_d: 1.0,
    };
}

fn two_arm_loss(eta: f64) -> [CircuitElement; 2] {
    [CircuitElement::loss(0, eta, ANCILLA), CircuitElement::loss(1, eta, ANCILLA)]
}

/// `|N,N>` through `eta_p`, a splitter of ratio `v`, the phase, `eta` and
/// `eta_d`, with an optional output splitter of ratio `w`. Returns the
/// channel and its input on modes `(a, b, ancilla)`.
pub fn holland_burnett_network(
    n: u32,
    v: f64,
    w: Option<f64>,
    losses: NetworkLosses,
    convention: GeneratorConvention,
) -> Result<(PhaseChannel, PureState)> {
    let basis = Arc::new(enumerate_basis(3, 2 * n as usize)?);
    let mut pre: Vec<CircuitElement> = two_arm_loss(losses.eta_p).to_vec();
    pre.push(CircuitElement::splitter_with_ratio(0, 1, v));
    let mut post: Vec<CircuitElement> = two_arm_loss(losses.eta).to_vec();
    post.extend(two_arm_loss(losses.eta_d));
    if let Some(w) = w {
        post.push(CircuitElement::splitter_with_ratio(0, 1, w));
    }
    let channel = PhaseChannel::new(
        &basis,
        &Circuit::new(pre, vec![ANCILLA])?,
        (0, 1),
        convention,
        &Circuit::new(post, vec![ANCILLA])?,
    )?;
    let input = PureState::fock(basis, &[n, n, 0])?;
    Ok((channel, input))
}

/// QFI of the HB(N) probe after an input splitter of ratio `v`. The probe is
/// number-diagonal, so the value does not depend on `phi`; it is evaluated
/// at `phi = 0`.
pub fn holland_burnett_qfi(n: u32, v: f64, losses: NetworkLosses, convention: GeneratorConvention) -> Result<f64> {
    let (channel, input) = holland_burnett_network(n, v, None, losses, convention)?;
    Ok(channel
        .probe(&input.to_density())?
        .quantum_fisher_information(0.0)?
        .value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ThresholdOutcome {
    /// Smallest `eta_p` (to the bisection tolerance) at which the QCRB
    /// reaches the SIL, with both bounds for a single trial.
    Found { eta_p: f64, qcrb: f64, sil: f64 },
    /// Even `eta_p = 1` does not beat the SIL.
    NoThreshold { qcrb_at_unity: f64, sil: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub n: u32,
    pub eta: f64,
    pub eta_d: f64,
    pub convention: GeneratorConvention,
    /// Classical resource used in the SIL: the probe's `2N` photons.
    pub resource_photons: u32,
    pub outcome: ThresholdOutcome,
}

pub const THRESHOLD_TOLERANCE: f64 = 1e-3;

/// Minimal `eta_p` with `1/sqrt(F_Q) <= 1/sqrt(eta eta_d 2N)` for HB(N) in
/// the lossy network, by bisection.
pub fn hb_loss_threshold(n: u32, eta: f64, eta_d: f64, convention: GeneratorConvention) -> Result<ThresholdResult> {
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "n",
            value: 0.0,
            range: ">= 1",
        });
    }
    let resource = 2 * n;
    let target = eta * eta_d * resource as f64;
    let sil = 1.0 / target.sqrt();
    let fq = |eta_p: f64| holland_burnett_qfi(n, 0.5, NetworkLosses { eta_p, eta, eta_d }, convention);
    let at_unity = fq(1.0)?;
    let outcome = if at_unity < target {
        ThresholdOutcome::NoThreshold {
            qcrb_at_unity: 1.0 / at_unity.sqrt(),
            sil,
        }
    } else {
        let (mut lo, mut hi, mut f_hi) = (0.0, 1.0, at_unity);
        while hi - lo > THRESHOLD_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            let f = fq(mid)?;
            if f >= target {
                hi = mid;
                f_hi = f;
            } else {
                lo = mid;
            }
        }
        ThresholdOutcome::Found {
            eta_p: hi,
            qcrb: 1.0 / f_hi.sqrt(),
            sil,
        }
    };
    Ok(ThresholdResult {
        n,
        eta,
        eta_d,
        convention,
        resource_photons: resource,
        outcome,
    })
}

/// QFI of a lossy N00N state split by the number of surviving photons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoonSensitivity {
    pub n: u32,
    pub eta: f64,
    pub convention: GeneratorConvention,
    /// `(photons, probability, contribution)`; contributions sum to `total`.
    pub sectors: Vec<(u32, f64, f64)>,
    pub total: f64,
}

/// `(|N,0> + |0,N>)/sqrt(2)`, loss `eta` on both arms, then the phase.
pub fn noon_loss_sensitivity(n: u32, eta: f64, convention: GeneratorConvention) -> Result<NoonSensitivity> {
    let basis = Arc::new(enumerate_basis(3, n as usize)?);
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let input = PureState::superposition(basis.clone(), &[(amp, &[n, 0, 0]), (amp, &[0, n, 0])])?;
    let channel = PhaseChannel::new(
        &basis,
        &Circuit::new(two_arm_loss(eta).to_vec(), vec![ANCILLA])?,
        (0, 1),
        convention,
        &Circuit::empty(),
    )?;
    let probe = channel.probe(&input.to_density())?;
    let (reduced, rho, d) = probe.reduced_state_and_derivative(0.0)?;
    let mut sectors = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let range = reduced.sector(k as usize);
        let block = |m: &CMatrix| m.view((range.start, range.start), (range.len(), range.len())).into_owned();
        let p = crate::linalg::trace(&block(&rho)).re;
        let contribution = quantum_fisher_information(&block(&rho), &block(&d))?;
        sectors.push((k, p, contribution));
    }
    let total = sectors.iter().map(|s| s.2).sum();
    Ok(NoonSensitivity {
        n,
        eta,
        convention,
        sectors,
        total,
    })
}

/// Max-over-phase Fisher information of `|1,1>` through splitters `v`, `w`
/// with the coincidence outcome `{|1,1><1,1|, 1 - |1,1><1,1|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherSurface {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// `values[i][j]` at `(v[i], w[j])`.
    pub values: Vec<Vec<f64>>,
    pub best_phase: Vec<Vec<f64>>,
    pub outcome: String,
    pub convention: GeneratorConvention,
}

pub fn fisher_surface_cell(v: f64, w: f64, convention: GeneratorConvention) -> Result<(f64, f64)> {
    for (name, x) in [("v", v), ("w", w)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange {
                name,
                value: x,
                range: "[0, 1]",
            });
        }
    }
    let basis = Arc::new(enumerate_basis(2, 2)?);
    let channel = PhaseChannel::new(
        &basis,
        &Circuit::new(vec![CircuitElement::splitter_with_ratio(0, 1, v)], vec![])?,
        (0, 1),
        convention,
        &Circuit::new(vec![CircuitElement::splitter_with_ratio(0, 1, w)], vec![])?,
    )?;
    let povm = binary_projector_povm(&basis, &[0, 1], &[1, 1])?;
    let probe = channel.probe(&PureState::fock(basis, &[1, 1])?.to_density())?;
    let (phi, f) = probe.max_classical_fisher_information(&povm)?;
    Ok((f.value, phi.rem_euclid(TAU)))
}

pub fn fisher_surface(v: &[f64], w: &[f64], convention: GeneratorConvention) -> Result<FisherSurface> {
    let cells: Vec<(usize, usize)> = (0..v.len()).flat_map(|i| (0..w.len()).map(move |j| (i, j))).collect();
    let results: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(i, j)| fisher_surface_cell(v[i], w[j], convention))
        .collect::<Result<_>>()?;
    let mut values = vec![vec![0.0; w.len()]; v.len()];
    let mut best_phase = values.clone();
    for (&(i, j), (f, phi)) in cells.iter().zip(results) {
        values[i][j] = f;
        best_phase[i][j] = phi;
    }
    Ok(FisherSurface {
        v: v.to_vec(),
        w: w.to_vec(),
        values,
        best_phase,
        outcome: "(1,1)".into(),
        convention,
    })
}

/// `n` points uniformly covering `[0, 1]` inclusive.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

/// Reduced two-mode state of the HB probe after the input splitter (for
/// reporting and for the tomography fixture).
pub fn holland_burnett_state(n: u32, v: f64, eta_p: f64) -> Result<(Arc<FockBasis>, CMatrix)> {
    let (channel, input) = holland_burnett_network(
        n,
        v,
        None,
        NetworkLosses {
            eta_p,
            eta: 1.0,
            eta_d: 1.0,
        },
        GeneratorConvention::Jz,
    )?;
    let rho = channel.probe(&input.to_density())?.state(0.0);
    partial_trace_operator(channel.basis(), &rho, &[ANCILLA])
}

