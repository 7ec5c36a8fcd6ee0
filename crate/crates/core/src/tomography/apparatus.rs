use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Circuit, CircuitElement, FockBasis, UnitaryDilation};
use crate::linalg::{CMatrix, CVector, C64};
use crate::measurement::{Povm, PovmOperator};

/// Mode indices of the apparatus: the two probed modes, six loss modes in
/// the order `eta_1..eta_6`, and the second output of the final splitter.
pub const M1: usize = 0;
pub const M2: usize = 1;
pub const LOSS_MODES: [usize; 6] = [2, 3, 4, 5, 6, 7];
pub const AUX: usize = 8;
const N_MODES: usize = 9;

/// Detector modes `D1, D2, D3`.
pub const DETECTORS: [usize; 3] = [M1, AUX, M2];

pub const OUTCOME_LABELS: [&str; 5] = ["none", "d1^d2", "d3", "d1&d2", "(d1|d2)&d3"];
pub const N_OUTCOMES: usize = 5;

/// Photon-number prior on the probed modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonCap {
    pub per_mode: u32,
    pub total: u32,
}

impl Default for PhotonCap {
    fn default() -> Self {
        Self { per_mode: 2, total: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub theta: f64,
    pub phi: f64,
}

/// `theta` and `phi` both in `{0, pi/4, pi/2, 3pi/4}`, theta-major.
///
/// `phi` sets the latitude of the measured axis on the two-mode Bloch
/// sphere and `theta` its longitude. Intermediate latitudes are needed to
/// reach the two-photon quadrupole terms mixing the poles with the
/// equator; a `phi` grid of multiples of `pi/2` only reaches poles and
/// equator and fails the completeness check under symmetric loss.
pub fn default_settings() -> Vec<Setting> {
    let quarter = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];
    grid_settings(&quarter, &quarter)
}

/// Every `(theta, phi)` pair, theta-major.
pub fn grid_settings(thetas: &[f64], phis: &[f64]) -> Vec<Setting> {
    thetas
        .iter()
        .flat_map(|&theta| phis.iter().map(move |&phi| Setting { theta, phi }))
        .collect()
}

/// Setting-independent part of the apparatus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apparatus {
    /// Transmissivities `eta_1..eta_6`; `eta_5, eta_6` include detector
    /// efficiency.
    pub eta: [f64; 6],
    #[serde(default)]
    pub cap: PhotonCap,
}

impl Apparatus {
    pub fn lossless() -> Self {
        Self {
            eta: [1.0; 6],
            cap: PhotonCap::default(),
        }
    }

    pub fn at(&self, setting: Setting) -> ApparatusConfig {
        ApparatusConfig {
            theta: setting.theta,
            phi: setting.phi,
            eta: self.eta,
            cap: self.cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApparatusConfig {
    pub theta: f64,
    pub phi: f64,
    pub eta: [f64; 6],
    #[serde(default)]
    pub cap: PhotonCap,
}

impl ApparatusConfig {
    /// Loss on both arms, `theta` on `m1`, 50:50, loss, `phi` on `m1`,
    /// 50:50, loss, then `m1` split 50:50 onto D1/D2 while `m2` goes to D3.
    pub fn circuit(&self) -> Result<Circuit> {
        let l = LOSS_MODES;
        let e = self.eta;
        let half = CircuitElement::splitter_with_ratio;
        Circuit::new(
            vec![
                CircuitElement::loss(M1, e[0], l[0]),
                CircuitElement::loss(M2, e[1], l[1]),
                CircuitElement::phase(M1, self.theta),
                half(M1, M2, 0.5),
                CircuitElement::loss(M1, e[2], l[2]),
                CircuitElement::loss(M2, e[3], l[3]),
                CircuitElement::phase(M1, self.phi),
                half(M1, M2, 0.5),
                CircuitElement::loss(M1, e[4], l[4]),
                CircuitElement::loss(M2, e[5], l[5]),
                half(M1, AUX, 0.5),
            ],
            l.to_vec(),
        )
    }

    /// Full apparatus basis, truncated at the total photon cap.
    pub fn basis(&self) -> Result<Arc<FockBasis>> {
        Ok(Arc::new(FockBasis::new(N_MODES, self.cap.total as usize)?))
    }
}

/// Click-pattern outcomes on `D1, D2, D3` as diagonal projectors, with
/// every other mode unmonitored. The last outcome is inclusive: D3 together
/// with D1, D2 or both.
pub fn build_output_povm(basis: &Arc<FockBasis>) -> Result<Povm> {
    for m in DETECTORS {
        basis.check_mode(m)?;
    }
    let mut elements = vec![DVector::<f64>::zeros(basis.dim()); N_OUTCOMES];
    for (i, occ) in basis.states().enumerate() {
        let [d1, d2, d3] = DETECTORS.map(|m| occ[m] > 0);
        let k = match (d1 || d2, d1 && d2, d3) {
            (false, _, false) => 0,
            (true, false, false) => 1,
            (false, _, true) => 2,
            (true, true, false) => 3,
            (true, _, true) => 4,
        };
        elements[k][i] = 1.0;
    }
    Povm::new(
        basis.clone(),
        OUTCOME_LABELS.iter().map(|s| s.to_string()).collect(),
        elements.into_iter().map(PovmOperator::Diagonal).collect(),
    )
}

/// Propagated input states `U|s>` for every state `s` of the first
/// `input_modes` modes with all other modes in the vacuum.
fn propagate_support(dilation: &UnitaryDilation, input: &FockBasis) -> Vec<CVector> {
    let full = dilation.basis();
    let mut occ = vec![0u32; full.n_modes()];
    (0..input.dim())
        .map(|s| {
            occ[..input.n_modes()].copy_from_slice(input.state(s));
            let idx = full.index_of(&occ).expect("input states fit the apparatus truncation");
            let mut v = CVector::zeros(full.dim());
            v[idx] = C64::new(1.0, 0.0);
            dilation.apply(&v)
        })
        .collect()
}

fn sandwich(psi: &[CVector], op: &PovmOperator) -> CMatrix {
    let d = psi.len();
    let applied: Vec<CVector> = match op {
        PovmOperator::Diagonal(w) => psi.iter().map(|p| p.component_mul(&w.map(|x| C64::new(x, 0.0)))).collect(),
        PovmOperator::Dense(m) => psi.iter().map(|p| m * p).collect(),
    };
    CMatrix::from_fn(d, d, |s, t| psi[s].dotc(&applied[t]))
}

/// `U^dagger Pi U` for each output element, restricted to inputs on the
/// first `input_modes` modes with every other mode (loss inputs included)
/// in the vacuum. The circuit is taken as a unitary dilation, so each loss
/// needs its own ancilla. Photon number is conserved, so the truncation of
/// `output`'s basis bounds the input space exactly.
pub fn back_propagate_povm(circuit: &Circuit, output: &Povm, input_modes: usize) -> Result<Povm> {
    let full = output.basis();
    if input_modes == 0 || input_modes > full.n_modes() {
        return Err(Error::ModeOutOfRange {
            mode: input_modes,
            n_modes: full.n_modes(),
        });
    }
    for &a in circuit.ancillae() {
        if a < input_modes {
            return Err(Error::AncillaMisuse(a));
        }
    }
    let dilation = circuit.dilation(full)?;
    let input = Arc::new(FockBasis::new(input_modes, full.max_total_photons())?);
    let psi = propagate_support(&dilation, &input);
    let elements = output
        .elements()
        .iter()
        .map(|e| PovmOperator::Dense(sandwich(&psi, e)))
        .collect();
    Povm::new(input, output.labels().to_vec(), elements)
}

/// Two-mode states allowed by a photon cap, in basis order (sector first,
/// then lexicographic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedSpace {
    cap: PhotonCap,
    states: Vec<[u32; 2]>,
}

impl ConditionedSpace {
    pub fn new(cap: PhotonCap) -> Self {
        let basis = FockBasis::new(2, cap.total as usize).expect("two modes");
        let states = basis
            .states()
            .filter(|o| o.iter().all(|&n| n <= cap.per_mode))
            .map(|o| [o[0], o[1]])
            .collect();
        Self { cap, states }
    }

    pub fn cap(&self) -> PhotonCap {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[[u32; 2]] {
        &self.states
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.states.iter().position(|s| s.as_slice() == occ)
    }

    pub fn label(&self, i: usize) -> String {
        format!("|{},{}>", self.states[i][0], self.states[i][1])
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.label(i)).collect()
    }

    /// Index ranges of equal total photon number.
    pub fn sectors(&self) -> Vec<std::ops::Range<usize>> {
        let mut out: Vec<std::ops::Range<usize>> = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            let n = s[0] + s[1];
            match out.last_mut() {
                Some(r) if self.states[r.start][0] + self.states[r.start][1] == n => r.end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }

    pub fn sector_of(&self, i: usize) -> u32 {
        self.states[i][0] + self.states[i][1]
    }

    /// Dimension of the block-diagonal operator space: `sum_k d_k^2`.
    pub fn block_dimension(&self) -> usize {
        self.sectors().iter().map(|r| r.len() * r.len()).sum()
    }

    /// Copy an operator on a two-mode Fock basis into this space. Entries
    /// on states outside the space must vanish.
    pub fn embed(&self, basis: &FockBasis, m: &CMatrix) -> Result<CMatrix> {
        if basis.n_modes() != 2 {
            return Err(Error::NotTwoMode(basis.n_modes()));
        }
        let map: Vec<Option<usize>> = basis.states().map(|o| self.index_of(o)).collect();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for j in 0..basis.dim() {
            for i in 0..basis.dim() {
                match (map[i], map[j]) {
                    (Some(a), Some(b)) => out[(a, b)] = m[(i, j)],
                    _ if m[(i, j)].norm() > 1e-12 => {
                        return Err(Error::InvalidState(format!(
                            "support on {} lies outside the conditioned space",
                            basis.label(i.max(j))
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(out)
    }

    /// The inverse of [`ConditionedSpace::embed`] into a two-mode basis
    /// truncated at the total cap.
    pub fn to_fock(&self, m: &CMatrix) -> (Arc<FockBasis>, CMatrix) {
        let basis = Arc::new(FockBasis::new(2, self.cap.total as usize).expect("two modes"));
        let map: Vec<usize> = self
            .states
            .iter()
            .map(|s| basis.index_of(s).expect("cap total bounds every state"))
            .collect();
        let mut out = CMatrix::zeros(basis.dim(), basis.dim());
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                out[(map[i], map[j])] = m[(i, j)];
            }
        }
        (basis, out)
    }
}

/// Outcome operators on a conditioned space, for one setting.
#[derive(Debug, Clone)]
pub struct ConditionedPovm {
    pub setting: Setting,
    pub space: Arc<ConditionedSpace>,
    pub elements: Vec<CMatrix>,
}

impl ConditionedPovm {
    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.elements.iter().map(|e| real_trace_product(rho, e)).collect()
    }

    /// `max |sum_k Pi_k - P|`, with `P` the identity on the space.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.space.dim();
        let sum = self.elements.iter().fold(CMatrix::identity(d, d) * C64::new(-1.0, 0.0), |acc, e| acc + e);
        crate::linalg::max_abs(&sum)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| crate::linalg::hermitian_eigen(e).0[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Restrict further to a tighter cap.
    pub fn recondition(&self, cap: PhotonCap) -> ConditionedPovm {
        let space = Arc::new(ConditionedSpace::new(PhotonCap {
            per_mode: cap.per_mode.min(self.space.cap.per_mode),
            total: cap.total.min(self.space.cap.total),
        }));
        let idx: Vec<usize> = space
            .states()
            .iter()
            .map(|s| self.space.index_of(s).expect("tighter cap is a subset"))
            .collect();
        let d = space.dim();
        let elements = self
            .elements
            .iter()
            .map(|e| CMatrix::from_fn(d, d, |i, j| e[(idx[i], idx[j])]))
            .collect();
        ConditionedPovm {
            setting: self.setting,
            space,
            elements,
        }
    }
}

/// `Re tr(A B)` for Hermitian `A`, `B`.
pub(crate) fn real_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a.nrows();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// `P Pi P` with `P` the projector onto the states of the two-mode input
/// POVM allowed by `cap`.
pub fn condition_povm(input: &Povm, setting: Setting, cap: PhotonCap) -> Result<ConditionedPovm> {
    let basis = input.basis();
    if basis.n_modes() != 2 {
        return Err(Error::NotTwoMode(basis.n_modes()));
    }
    let capped = PhotonCap {
        per_mode: cap.per_mode,
        total: cap.total.min(basis.max_total_photons() as u32),
    };
    let space = Arc::new(ConditionedSpace::new(capped));
    let idx: Vec<usize> = space
        .states()
        .iter()
        .map(|s| basis.index_of(s).expect("capped states lie in the input basis"))
        .collect();
    let d = space.dim();
    let elements = input
        .elements()
        .iter()
        .map(|e| {
            let dense = e.to_dense();
            CMatrix::from_fn(d, d, |i, j| dense[(idx[i], idx[j])])
        })
        .collect();
    Ok(ConditionedPovm { setting, space, elements })
}

/// Conditioned POVM of one setting.
pub fn setting_povm(apparatus: &Apparatus, setting: Setting) -> Result<ConditionedPovm> {
    let config = apparatus.at(setting);
    let basis = config.basis()?;
    let output = build_output_povm(&basis)?;
    let input = back_propagate_povm(&config.circuit()?, &output, 2)?;
    condition_povm(&input, setting, apparatus.cap)
}

/// Conditioned POVMs for every setting, built in parallel.
pub fn measurement_povms(apparatus: &Apparatus, settings: &[Setting]) -> Result<Vec<ConditionedPovm>> {
    for (k, &e) in apparatus.eta.iter().enumerate() {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::OutOfRange {
                name: ["eta_1", "eta_2", "eta_3", "eta_4", "eta_5", "eta_6"][k],
                value: e,
                range: "[0, 1]",
            });
        }
    }
    settings.par_iter().map(|&s| setting_povm(apparatus, s)).collect()
}

/// Probability that at least one photon of `rho` (on the conditioned
/// space) ends up in a loss mode.
pub fn loss_population(config: &ApparatusConfig, rho: &CMatrix) -> Result<f64> {
    let basis = config.basis()?;
    let kept = DVector::from_iterator(
        basis.dim(),
        basis
            .states()
            .map(|o| if LOSS_MODES.iter().all(|&l| o[l] == 0) { 1.0 } else { 0.0 }),
    );
    let povm = Povm::new(
        basis,
        vec!["lossless".into(), "lossy".into()],
        vec![PovmOperator::Diagonal(kept.clone()), PovmOperator::Diagonal(kept.map(|x| 1.0 - x))],
    )?;
    let input = back_propagate_povm(&config.circuit()?, &povm, 2)?;
    let conditioned = condition_povm(&input, Setting { theta: config.theta, phi: config.phi }, config.cap)?;
    if rho.nrows() != conditioned.space.dim() {
        return Err(Error::DimensionMismatch {
            expected: conditioned.space.dim(),
            found: rho.nrows(),
        });
    }
    Ok(real_trace_product(rho, &conditioned.elements[1]))
}
