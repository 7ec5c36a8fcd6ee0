use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

use super::basis::FockBasis;
use super::operator::{beam_splitter_matrix, phase_shifter_matrix, SparseOperator};
use super::state::{DensityOperator, PureState};

const ANCILLA_VACUUM_TOL: f64 = 1e-12;

/// One linear-optical element. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CircuitElement {
    /// `exp(-2 i theta J_x)` on the two modes; splitting ratio `v = sin^2(theta)`.
    BeamSplitter { mode_a: usize, mode_b: usize, theta: f64 },
    /// `exp(i phi n_mode)`.
    PhaseShifter { mode: usize, phi: f64 },
    /// Transmissivity `eta`: a beam splitter with `sin^2(theta) = 1 - eta`
    /// into the vacuum `ancilla`, which is then traced out.
    Loss {
        mode: usize,
        transmissivity: f64,
        ancilla: usize,
    },
}

impl CircuitElement {
    pub fn beam_splitter(mode_a: usize, mode_b: usize, theta: f64) -> Self {
        Self::BeamSplitter { mode_a, mode_b, theta }
    }

    /// Beam splitter with splitting ratio `v = sin^2(theta)`.
    pub fn splitter_with_ratio(mode_a: usize, mode_b: usize, v: f64) -> Self {
        Self::BeamSplitter {
            mode_a,
            mode_b,
            theta: splitting_angle(v),
        }
    }

    pub fn phase(mode: usize, phi: f64) -> Self {
        Self::PhaseShifter { mode, phi }
    }

    pub fn loss(mode: usize, transmissivity: f64, ancilla: usize) -> Self {
        Self::Loss {
            mode,
            transmissivity,
            ancilla,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::BeamSplitter { mode_a, mode_b, theta } => {
                if mode_a == mode_b {
                    return Err(Error::IdenticalModes(mode_a));
                }
                finite("theta", theta)
            }
            Self::PhaseShifter { phi, .. } => finite("phi", phi),
            Self::Loss {
                mode,
                transmissivity,
                ancilla,
            } => {
                if mode == ancilla {
                    return Err(Error::IdenticalModes(mode));
                }
                if !(0.0..=1.0).contains(&transmissivity) {
                    return Err(Error::OutOfRange {
                        name: "transmissivity",
                        value: transmissivity,
                        range: "[0, 1]",
                    });
                }
                Ok(())
            }
        }
    }

    fn modes(&self) -> Vec<usize> {
        match *self {
            Self::BeamSplitter { mode_a, mode_b, .. } => vec![mode_a, mode_b],
            Self::PhaseShifter { mode, .. } => vec![mode],
            Self::Loss { mode, ancilla, .. } => vec![mode, ancilla],
        }
    }
}

/// Angle `theta` with `sin^2(theta) = v`.
pub fn splitting_angle(v: f64) -> f64 {
    v.clamp(0.0, 1.0).sqrt().asin()
}

fn finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "finite reals",
        })
    }
}

/// Ordered list of elements; element order is evaluation order. Declared
/// ancilla modes start in the vacuum and may only be used as loss targets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Circuit {
    elements: Vec<CircuitElement>,
    ancillae: Vec<usize>,
}

impl Circuit {
    pub fn new(elements: Vec<CircuitElement>, ancillae: Vec<usize>) -> Result<Self> {
        for e in &elements {
            e.validate()?;
            match *e {
                CircuitElement::Loss { mode, ancilla, .. } => {
                    if ancillae.contains(&mode) {
                        return Err(Error::AncillaMisuse(mode));
                    }
                    if !ancillae.contains(&ancilla) {
                        return Err(Error::AncillaMisuse(ancilla));
                    }
                }
                _ => {
                    if let Some(&m) = e.modes().iter().find(|m| ancillae.contains(m)) {
                        return Err(Error::AncillaMisuse(m));
                    }
                }
            }
        }
        Ok(Self { elements, ancillae })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn elements(&self) -> &[CircuitElement] {
        &self.elements
    }

    pub fn ancillae(&self) -> &[usize] {
        &self.ancillae
    }

    /// Concatenate `self` then `next`.
    pub fn then(&self, next: &Circuit) -> Result<Circuit> {
        let mut elements = self.elements.clone();
        elements.extend_from_slice(&next.elements);
        let mut ancillae = self.ancillae.clone();
        for a in &next.ancillae {
            if !ancillae.contains(a) {
                ancillae.push(*a);
            }
        }
        Circuit::new(elements, ancillae)
    }

    fn check_modes(&self, basis: &FockBasis) -> Result<()> {
        for e in &self.elements {
            for m in e.modes() {
                basis.check_mode(m)?;
            }
        }
        for &a in &self.ancillae {
            basis.check_mode(a)?;
        }
        Ok(())
    }

    /// Precompute the sparse elements for repeated application on `basis`.
    pub fn compile(&self, basis: &Arc<FockBasis>) -> Result<CompiledCircuit> {
        self.check_modes(basis)?;
        let mut steps = Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            let step = match *e {
                CircuitElement::BeamSplitter { mode_a, mode_b, theta } => {
                    Step::Unitary(beam_splitter_matrix(basis, mode_a, mode_b, theta)?)
                }
                CircuitElement::PhaseShifter { mode, phi } => {
                    Step::Unitary(phase_shifter_matrix(basis, mode, phi)?)
                }
                CircuitElement::Loss {
                    mode,
                    transmissivity,
                    ancilla,
                } => Step::Loss {
                    coupler: beam_splitter_matrix(
                        basis,
                        mode,
                        ancilla,
                        splitting_angle(1.0 - transmissivity),
                    )?,
                    reset: AncillaReset::new(basis, ancilla),
                },
            };
            steps.push(step);
        }
        Ok(CompiledCircuit {
            basis: basis.clone(),
            ancillae: self.ancillae.clone(),
            steps,
        })
    }

    /// Fully unitary dilation: every loss stays a beam splitter onto its own
    /// ancilla and nothing is traced.
    pub fn dilation(&self, basis: &Arc<FockBasis>) -> Result<UnitaryDilation> {
        self.check_modes(basis)?;
        let mut seen = Vec::new();
        let mut steps = Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            let op = match *e {
                CircuitElement::BeamSplitter { mode_a, mode_b, theta } => {
                    beam_splitter_matrix(basis, mode_a, mode_b, theta)?
                }
                CircuitElement::PhaseShifter { mode, phi } => phase_shifter_matrix(basis, mode, phi)?,
                CircuitElement::Loss {
                    mode,
                    transmissivity,
                    ancilla,
                } => {
                    if seen.contains(&ancilla) {
                        return Err(Error::AncillaReused(ancilla));
                    }
                    seen.push(ancilla);
                    beam_splitter_matrix(basis, mode, ancilla, splitting_angle(1.0 - transmissivity))?
                }
            };
            steps.push(op);
        }
        Ok(UnitaryDilation {
            basis: basis.clone(),
            steps,
        })
    }
}

#[derive(Debug, Clone)]
enum Step {
    Unitary(SparseOperator),
    Loss {
        coupler: SparseOperator,
        reset: AncillaReset,
    },
}

/// Index bookkeeping for "trace the ancilla, put it back in the vacuum".
#[derive(Debug, Clone)]
struct AncillaReset {
    /// `(index, index with ancilla emptied)` grouped by ancilla occupation.
    groups: Vec<Vec<(usize, usize)>>,
}

impl AncillaReset {
    fn new(basis: &FockBasis, ancilla: usize) -> Self {
        let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); basis.max_total_photons() + 1];
        let mut emptied = vec![0u32; basis.n_modes()];
        for i in 0..basis.dim() {
            let occ = basis.state(i);
            let k = occ[ancilla] as usize;
            emptied.copy_from_slice(occ);
            emptied[ancilla] = 0;
            let r = basis
                .index_of(&emptied)
                .expect("removing photons stays inside the truncation");
            groups[k].push((i, r));
        }
        Self { groups }
    }

    fn apply(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for group in &self.groups {
            for &(j, rj) in group {
                for &(i, ri) in group {
                    out[(ri, rj)] += m[(i, j)];
                }
            }
        }
        out
    }
}

/// A circuit bound to a basis, ready to act on operators.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    basis: Arc<FockBasis>,
    ancillae: Vec<usize>,
    steps: Vec<Step>,
}

impl CompiledCircuit {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    /// Apply the channel to an arbitrary operator. The map is linear, so this
    /// also propagates derivatives such as `i[G, rho]`.
    pub fn apply_to_operator(&self, m: &CMatrix) -> CMatrix {
        let mut current = m.clone();
        for step in &self.steps {
            current = match step {
                Step::Unitary(u) => u.conjugate(&current),
                Step::Loss { coupler, reset } => reset.apply(&coupler.conjugate(&current)),
            };
        }
        current
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.basis() != &self.basis {
            return Err(Error::DimensionMismatch {
                expected: self.basis.dim(),
                found: rho.basis().dim(),
            });
        }
        for &a in &self.ancillae {
            let population = rho.mode_occupied_population(a);
            if population > ANCILLA_VACUUM_TOL {
                return Err(Error::AncillaNotVacuum {
                    mode: a,
                    population,
                });
            }
        }
        DensityOperator::from_matrix_unchecked(self.basis.clone(), self.apply_to_operator(rho.matrix()))
    }
}

/// Apply `circuit` to a pure or mixed state.
pub fn apply_circuit(input: impl Into<DensityOperator>, circuit: &Circuit) -> Result<DensityOperator> {
    let rho = input.into();
    circuit.compile(rho.basis())?.apply(&rho)
}

/// Sequence of unitaries acting on state vectors.
#[derive(Debug, Clone)]
pub struct UnitaryDilation {
    basis: Arc<FockBasis>,
    steps: Vec<SparseOperator>,
}

impl UnitaryDilation {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.steps.iter().fold(v.clone(), |acc, u| u.apply(&acc))
    }

    pub fn apply_state(&self, psi: &PureState) -> PureState {
        PureState::from_parts(self.basis.clone(), self.apply(psi.amplitudes()))
    }

    /// The whole dilation as one operator (later elements on the left).
    pub fn to_operator(&self) -> SparseOperator {
        let identity = SparseOperator::diagonal(&vec![crate::linalg::ONE; self.basis.dim()]);
        self.steps.iter().fold(identity, |acc, u| u.compose(&acc))
    }
}

/// Reduced operator after tracing out `modes`. Tracing every mode yields a
/// 1x1 operator on [`FockBasis::trivial`] holding the scalar trace.
pub fn partial_trace(rho: &DensityOperator, modes: &[usize]) -> Result<DensityOperator> {
    let (basis, m) = partial_trace_operator(rho.basis(), rho.matrix(), modes)?;
    DensityOperator::from_matrix_unchecked(basis, m)
}

pub fn partial_trace_operator(
    basis: &FockBasis,
    m: &CMatrix,
    modes: &[usize],
) -> Result<(Arc<FockBasis>, CMatrix)> {
    for (k, &mode) in modes.iter().enumerate() {
        basis.check_mode(mode)?;
        if modes[..k].contains(&mode) {
            return Err(Error::IdenticalModes(mode));
        }
    }
    let kept: Vec<usize> = (0..basis.n_modes()).filter(|m| !modes.contains(m)).collect();
    let reduced = if kept.is_empty() {
        FockBasis::trivial()
    } else {
        FockBasis::new(kept.len(), basis.max_total_photons())?
    };
    let mut groups: BTreeMap<Vec<u32>, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..basis.dim() {
        let occ = basis.state(i);
        let traced: Vec<u32> = modes.iter().map(|&t| occ[t]).collect();
        let rest: Vec<u32> = kept.iter().map(|&k| occ[k]).collect();
        let r = reduced.index_of(&rest).expect("fewer photons stay in truncation");
        groups.entry(traced).or_default().push((i, r));
    }
    let mut out = CMatrix::zeros(reduced.dim(), reduced.dim());
    for group in groups.values() {
        for &(j, rj) in group {
            for &(i, ri) in group {
                out[(ri, rj)] += m[(i, j)];
            }
        }
    }
    Ok((Arc::new(reduced), out))
}

/// Embed an operator on the first modes into a larger basis with every
/// additional mode in the vacuum.
pub fn embed_with_vacuum(small: &FockBasis, m: &CMatrix, large: &Arc<FockBasis>) -> Result<CMatrix> {
    if large.n_modes() < small.n_modes() || large.max_total_photons() < small.max_total_photons() {
        return Err(Error::DimensionMismatch {
            expected: small.dim(),
            found: large.dim(),
        });
    }
    let mut occ = vec![0u32; large.n_modes()];
    let map: Vec<usize> = (0..small.dim())
        .map(|i| {
            occ[..small.n_modes()].copy_from_slice(small.state(i));
            large.index_of(&occ).expect("vacuum padding fits")
        })
        .collect();
    let mut out = CMatrix::zeros(large.dim(), large.dim());
    for j in 0..small.dim() {
        for i in 0..small.dim() {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis::enumerate_basis;
    use crate::linalg::{max_abs, C64};
    use std::f64::consts::FRAC_PI_4;

    fn basis(modes: usize, photons: usize) -> Arc<FockBasis> {
        Arc::new(enumerate_basis(modes, photons).unwrap())
    }

    #[test]
    fn loss_on_single_photon() {
        let b = basis(2, 1);
        let eta = 0.3;
        let c = Circuit::new(vec![CircuitElement::loss(0, eta, 1)], vec![1]).unwrap();
        let out = apply_circuit(PureState::fock(b.clone(), &[1, 0]).unwrap(), &c).unwrap();
        assert!((out.population(&[1, 0]) - eta).abs() < 1e-15);
        assert!((out.population(&[0, 0]) - (1.0 - eta)).abs() < 1e-15);
        assert!((out.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_transmissivity_is_identity() {
        let b = basis(3, 3);
        let psi = PureState::superposition(
            b.clone(),
            &[(C64::new(0.6, 0.1), &[2, 1, 0]), (C64::new(-0.3, 0.4), &[0, 1, 0])],
        )
        .unwrap();
        let c = Circuit::new(vec![CircuitElement::loss(0, 1.0, 2)], vec![2]).unwrap();
        let out = apply_circuit(&psi, &c).unwrap();
        assert!(max_abs(&(out.matrix() - psi.to_density().matrix())) < 1e-15);
    }

    #[test]
    fn non_vacuum_ancilla_rejected() {
        let b = basis(2, 1);
        let c = Circuit::new(vec![CircuitElement::loss(0, 0.5, 1)], vec![1]).unwrap();
        let err = apply_circuit(PureState::fock(b, &[0, 1]).unwrap(), &c).unwrap_err();
        assert!(matches!(err, Error::AncillaNotVacuum { mode: 1, .. }));
    }

    #[test]
    fn out_of_range_mode_rejected() {
        let b = basis(2, 1);
        let c = Circuit::new(vec![CircuitElement::phase(4, 0.1)], vec![]).unwrap();
        assert!(matches!(
            apply_circuit(PureState::fock(b, &[0, 1]).unwrap(), &c),
            Err(Error::ModeOutOfRange { mode: 4, .. })
        ));
    }

    #[test]
    fn ancilla_only_as_loss_target() {
        assert!(matches!(
            Circuit::new(vec![CircuitElement::phase(1, 0.1)], vec![1]),
            Err(Error::AncillaMisuse(1))
        ));
        assert!(matches!(
            Circuit::new(vec![CircuitElement::loss(0, 0.5, 2)], vec![1]),
            Err(Error::AncillaMisuse(2))
        ));
        assert!(Circuit::new(vec![CircuitElement::loss(0, 1.5, 1)], vec![1]).is_err());
    }

    #[test]
    fn hom_state_marginal() {
        let b = basis(2, 2);
        let c = Circuit::new(vec![CircuitElement::beam_splitter(0, 1, FRAC_PI_4)], vec![]).unwrap();
        let out = apply_circuit(PureState::fock(b, &[1, 1]).unwrap(), &c).unwrap();
        let marginal = partial_trace(&out, &[1]).unwrap();
        assert!((marginal.population(&[0]) - 0.5).abs() < 1e-12);
        assert!((marginal.population(&[2]) - 0.5).abs() < 1e-12);
        assert!((marginal.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_state_marginal_is_pure() {
        let b = basis(2, 3);
        let psi = PureState::superposition(
            b.clone(),
            &[
                (C64::new(0.5, 0.0), &[1, 0]),
                (C64::new(0.5, 0.0), &[1, 1]),
                (C64::new(0.5, 0.0), &[2, 0]),
                (C64::new(0.5, 0.0), &[2, 1]),
            ],
        )
        .unwrap();
        let marginal = partial_trace(&psi.to_density(), &[0]).unwrap();
        assert!((marginal.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tracing_a_vacuum_mode_leaves_operator_unchanged() {
        let small = basis(2, 2);
        let large = basis(3, 2);
        let psi = PureState::superposition(
            small.clone(),
            &[(C64::new(0.8, 0.0), &[1, 1]), (C64::new(0.0, 0.6), &[0, 2])],
        )
        .unwrap();
        let rho = psi.to_density();
        let embedded = embed_with_vacuum(&small, rho.matrix(), &large).unwrap();
        let big = DensityOperator::new(large, embedded).unwrap();
        let back = partial_trace(&big, &[2]).unwrap();
        assert!(max_abs(&(back.matrix() - rho.matrix())) < 1e-15);
    }

    #[test]
    fn tracing_everything_gives_scalar_trace() {
        let b = basis(2, 2);
        let rho = PureState::fock(b, &[1, 1]).unwrap().to_density();
        let scalar = partial_trace(&rho, &[0, 1]).unwrap();
        assert_eq!(scalar.basis().dim(), 1);
        assert!((scalar.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dilation_rejects_shared_ancilla() {
        let b = basis(3, 1);
        let c = Circuit::new(
            vec![CircuitElement::loss(0, 0.5, 2), CircuitElement::loss(1, 0.5, 2)],
            vec![2],
        )
        .unwrap();
        assert!(c.compile(&b).is_ok());
        assert!(matches!(c.dilation(&b), Err(Error::AncillaReused(2))));
    }

    #[test]
    fn dilation_trace_matches_channel() {
        let b = basis(4, 2);
        let c = Circuit::new(
            vec![
                CircuitElement::loss(0, 0.7, 2),
                CircuitElement::beam_splitter(0, 1, 0.3),
                CircuitElement::loss(1, 0.4, 3),
            ],
            vec![2, 3],
        )
        .unwrap();
        let psi = PureState::fock(b.clone(), &[1, 1, 0, 0]).unwrap();
        let channel = apply_circuit(&psi, &c).unwrap();
        let dilated = c.dilation(&b).unwrap().apply_state(&psi).to_density();
        let lhs = partial_trace(&channel, &[2, 3]).unwrap();
        let rhs = partial_trace(&dilated, &[2, 3]).unwrap();
        assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-14);
    }
}
