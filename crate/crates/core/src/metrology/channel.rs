use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{partial_trace_operator, Circuit, CompiledCircuit, DensityOperator, FockBasis};
use crate::linalg::{hermitian_eigen, hermiticity_defect, CMatrix, C64};
use crate::measurement::{outcome_distribution_matrix, Povm};
use crate::optimize::scan_then_refine;

/// Eigenvalue pairs with `p_j + p_k` at or below this are skipped in the QFI.
pub const QFI_EPSILON: f64 = 1e-12;
/// Outcomes with probability at or below this contribute nothing to the FI.
pub const P_FLOOR: f64 = 1e-12;
/// Base step of the Richardson-extrapolated central difference.
pub const FD_STEP: f64 = 1e-3;
/// Points in the dense phase scan on `[0, 2 pi)`.
pub const PHASE_SCAN_POINTS: usize = 401;
/// Probability floor used while searching for the maximum over `phi`. Near a
/// zero of `p_k` the finite-difference error is amplified by `1/p_k`; keeping
/// the search above this floor bounds the error without moving the supremum
/// by more than `O(1e-8)`.
pub const SEARCH_FLOOR: f64 = 1e-8;
const HERMITIAN_CHECK: f64 = 1e-10;
const ROUNDOFF_SCALE: f64 = 1e-14;

/// How the phase enters the two interferometer arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorConvention {
    /// `exp(i phi J_z)`, `J_z = (n_a - n_b)/2`.
    Jz,
    /// `exp(i phi n_a)`.
    SingleArm,
}

impl GeneratorConvention {
    pub const ALL: [GeneratorConvention; 2] = [Self::Jz, Self::SingleArm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Jz => "jz",
            Self::SingleArm => "single-arm",
        }
    }

    fn eigenvalue(self, n_a: u32, n_b: u32) -> f64 {
        match self {
            Self::Jz => 0.5 * (n_a as f64 - n_b as f64),
            Self::SingleArm => n_a as f64,
        }
    }
}

impl fmt::Display for GeneratorConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jz" => Ok(Self::Jz),
            "single-arm" => Ok(Self::SingleArm),
            other => Err(Error::InvalidState(format!(
                "unknown generator convention '{other}' (expected jz or single-arm)"
            ))),
        }
    }
}

/// A Fisher-information value tagged with its generator convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherValue {
    pub value: f64,
    pub convention: GeneratorConvention,
}

/// `prepare`, then `exp(i phi G)` on modes `(a, b)`, then `measure`.
/// Loss ancillae may appear in either circuit.
#[derive(Debug, Clone)]
pub struct PhaseChannel {
    basis: Arc<FockBasis>,
    prepare: CompiledCircuit,
    measure: CompiledCircuit,
    generator: Vec<f64>,
    convention: GeneratorConvention,
    ancillae: Vec<usize>,
}

impl PhaseChannel {
    pub fn new(
        basis: &Arc<FockBasis>,
        prepare: &Circuit,
        phase_modes: (usize, usize),
        convention: GeneratorConvention,
        measure: &Circuit,
    ) -> Result<Self> {
        let (a, b) = phase_modes;
        basis.check_mode(a)?;
        basis.check_mode(b)?;
        if a == b {
            return Err(Error::IdenticalModes(a));
        }
        let mut ancillae = prepare.ancillae().to_vec();
        for &m in measure.ancillae() {
            if !ancillae.contains(&m) {
                ancillae.push(m);
            }
        }
        if let Some(&m) = ancillae.iter().find(|&&m| m == a || m == b) {
            return Err(Error::AncillaMisuse(m));
        }
        let generator = basis
            .states()
            .map(|occ| convention.eigenvalue(occ[a], occ[b]))
            .collect();
        Ok(Self {
            basis: basis.clone(),
            prepare: prepare.compile(basis)?,
            measure: measure.compile(basis)?,
            generator,
            convention,
            ancillae,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn convention(&self) -> GeneratorConvention {
        self.convention
    }

    pub fn ancillae(&self) -> &[usize] {
        &self.ancillae
    }

    /// Run the phase-independent preparation once.
    pub fn probe(&self, input: &DensityOperator) -> Result<Probe<'_>> {
        let prepared = self.prepare.apply(input)?;
        Ok(Probe {
            channel: self,
            prepared: prepared.into_matrix(),
        })
    }

    fn phased(&self, m: &CMatrix, phi: f64) -> CMatrix {
        let g = &self.generator;
        CMatrix::from_fn(m.nrows(), m.ncols(), |j, k| {
            m[(j, k)] * C64::from_polar(1.0, phi * (g[j] - g[k]))
        })
    }

    /// `i [G, m]` for diagonal `G`.
    fn commutator(&self, m: &CMatrix) -> CMatrix {
        let g = &self.generator;
        CMatrix::from_fn(m.nrows(), m.ncols(), |j, k| m[(j, k)] * C64::new(0.0, g[j] - g[k]))
    }
}

/// A channel with its input already prepared.
#[derive(Debug, Clone)]
pub struct Probe<'a> {
    channel: &'a PhaseChannel,
    prepared: CMatrix,
}

impl Probe<'_> {
    pub fn channel(&self) -> &PhaseChannel {
        self.channel
    }

    /// `rho(phi)` on the full basis (ancillae back in the vacuum).
    pub fn state(&self, phi: f64) -> CMatrix {
        self.channel
            .measure
            .apply_to_operator(&self.channel.phased(&self.prepared, phi))
    }

    /// `(rho(phi), d rho / d phi)`, the derivative taken analytically.
    pub fn state_and_derivative(&self, phi: f64) -> (CMatrix, CMatrix) {
        let inner = self.channel.phased(&self.prepared, phi);
        let d = self.channel.commutator(&inner);
        let m = &self.channel.measure;
        (m.apply_to_operator(&inner), m.apply_to_operator(&d))
    }

    /// Same pair reduced to the non-ancilla modes.
    pub fn reduced_state_and_derivative(&self, phi: f64) -> Result<(Arc<FockBasis>, CMatrix, CMatrix)> {
        let (rho, d) = self.state_and_derivative(phi);
        let ancillae = &self.channel.ancillae;
        if ancillae.is_empty() {
            return Ok((self.channel.basis.clone(), rho, d));
        }
        let (basis, rho) = partial_trace_operator(&self.channel.basis, &rho, ancillae)?;
        let (_, d) = partial_trace_operator(&self.channel.basis, &d, ancillae)?;
        Ok((basis, rho, d))
    }

    pub fn quantum_fisher_information(&self, phi: f64) -> Result<FisherValue> {
        let (_, rho, d) = self.reduced_state_and_derivative(phi)?;
        Ok(FisherValue {
            value: quantum_fisher_information(&rho, &d)?,
            convention: self.channel.convention,
        })
    }

    pub fn probabilities(&self, povm: &Povm, phi: f64) -> Result<Vec<f64>> {
        outcome_distribution_matrix(&self.state(phi), povm)
    }

    /// `sum_k (dp_k)^2 / p_k` with `dp_k` from a Richardson-extrapolated
    /// central difference.
    pub fn classical_fisher_information(&self, povm: &Povm, phi: f64) -> Result<FisherValue> {
        self.fisher_with_floor(povm, phi, P_FLOOR)
    }

    fn fisher_with_floor(&self, povm: &Povm, phi: f64, floor: f64) -> Result<FisherValue> {
        let p = self.probabilities(povm, phi)?;
        let central = |h: f64| -> Result<Vec<f64>> {
            let plus = self.probabilities(povm, phi + h)?;
            let minus = self.probabilities(povm, phi - h)?;
            Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        };
        let coarse = central(FD_STEP)?;
        let fine = central(0.5 * FD_STEP)?;
        let value: f64 = p
            .iter()
            .zip(coarse.iter().zip(&fine))
            .filter(|(&pk, _)| pk > floor)
            .map(|(&pk, (&c, &f))| {
                let dp = (4.0 * f - c) / 3.0;
                dp * dp / pk
            })
            .sum();
        if !value.is_finite() {
            return Err(Error::NonFiniteFisher);
        }
        Ok(FisherValue {
            value,
            convention: self.channel.convention,
        })
    }

    /// `max_phi F(phi)`: dense scan then golden-section refinement.
    /// Returns `(phi*, F(phi*))`.
    pub fn max_classical_fisher_information(&self, povm: &Povm) -> Result<(f64, FisherValue)> {
        let failure = std::cell::RefCell::new(None);
        let f = |phi: f64| match self.fisher_with_floor(povm, phi, SEARCH_FLOOR) {
            Ok(v) => v.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
        let (phi, _) = scan_then_refine(f, 0.0, std::f64::consts::TAU, PHASE_SCAN_POINTS, 1e-9);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let mut best = (phi, self.classical_fisher_information(povm, phi)?.value);
        if let Some((limit, p_min)) = self.limit_at_nearby_zero(povm, phi)? {
            // F at the search point carries relative roundoff ~ eps/p_min; anything
            // within that of the limit is the same supremum
            let noise = ROUNDOFF_SCALE * best.1.abs() / p_min;
            if limit.1 >= self.exact_fisher(povm, phi)? - noise {
                best = limit;
            }
        }
        Ok((
            best.0,
            FisherValue {
                value: best.1,
                convention: self.channel.convention,
            },
        ))
    }

    /// `(p_k, dp_k/dphi)` with the exact derivative `tr(Pi_k d rho)`.
    fn probabilities_and_slopes(&self, povm: &Povm, phi: f64) -> Result<Vec<(f64, f64)>> {
        let (rho, d) = self.state_and_derivative(phi);
        let p = outcome_distribution_matrix(&rho, povm)?;
        Ok(p.into_iter()
            .zip(povm.elements())
            .map(|(pk, e)| (pk, e.expectation(&d)))
            .collect())
    }

    fn exact_fisher(&self, povm: &Povm, phi: f64) -> Result<f64> {
        Ok(self
            .probabilities_and_slopes(povm, phi)?
            .into_iter()
            .filter(|&(p, _)| p > P_FLOOR)
            .map(|(p, dp)| dp * dp / p)
            .sum())
    }

    /// When the search ends next to a zero of some outcome probability, the
    /// supremum is usually the removable singularity of `F` at that zero.
    /// Its value is taken as the limit of the symmetric average
    /// `(F(phi0 + h) + F(phi0 - h))/2`, Richardson-extrapolated in `h`.
    fn limit_at_nearby_zero(&self, povm: &Povm, phi: f64) -> Result<Option<((f64, f64), f64)>> {
        const NEAR_ZERO: f64 = 1e-6;
        const WINDOW: f64 = 1e-2;
        const H: f64 = 1e-3;
        let p = self.probabilities(povm, phi)?;
        let Some(k) = (0..p.len())
            .filter(|&k| p[k] < NEAR_ZERO && p[k] > 0.0)
            .min_by(|&a, &b| p[a].total_cmp(&p[b]))
        else {
            return Ok(None);
        };
        let element = &povm.elements()[k];
        let (phi0, _) = crate::optimize::golden_section_max(
            |x| -element.expectation(&self.state(x)),
            phi - WINDOW,
            phi + WINDOW,
            1e-10,
        );
        let average = |h: f64| -> Result<f64> { Ok(0.5 * (self.exact_fisher(povm, phi0 + h)? + self.exact_fisher(povm, phi0 - h)?)) };
        let limit = (4.0 * average(H)? - average(2.0 * H)?) / 3.0;
        Ok(limit.is_finite().then_some(((phi0, limit), p[k])))
    }
}

/// `F_Q = 2 sum_{jk} |<j| d rho |k>|^2 / (p_j + p_k)` over the eigenbasis of
/// `rho`, skipping pairs with `p_j + p_k <= 1e-12`.
pub fn quantum_fisher_information(rho: &CMatrix, d_rho: &CMatrix) -> Result<f64> {
    if rho.shape() != d_rho.shape() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: d_rho.nrows(),
        });
    }
    let defect = hermiticity_defect(rho);
    if defect > HERMITIAN_CHECK {
        return Err(Error::NotHermitian(defect));
    }
    let (p, v) = hermitian_eigen(rho);
    let d = v.adjoint() * d_rho * &v;
    let n = p.len();
    let mut f = 0.0;
    for j in 0..n {
        for k in 0..n {
            let s = p[j].max(0.0) + p[k].max(0.0);
            if s > QFI_EPSILON {
                f += d[(j, k)].norm_sqr() / s;
            }
        }
    }
    let f = 2.0 * f;
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFiniteFisher)
    }
}
