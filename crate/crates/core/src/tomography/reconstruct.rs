use std::f64::consts::SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::apparatus::{real_trace_product, ConditionedPovm, ConditionedSpace, PhotonCap, N_OUTCOMES};
use super::records::CountRecord;
use crate::error::{Error, Result};
use crate::fock::{Circuit, DensityOperator};
use crate::linalg::{hermitian_eigen, hermitian_part, max_abs, trace_distance, CMatrix, C64};
use crate::metrology::{FisherValue, GeneratorConvention, PhaseChannel};

/// Outcomes whose operator has no weight anywhere on the space are left
/// out of the likelihood.
const ZERO_PROBABILITY: f64 = 1e-14;
const RANK_TOLERANCE: f64 = 1e-10;
const SETTING_MATCH: f64 = 1e-9;
const LSQ_REWEIGHTS: usize = 5;
const PG_MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, Copy)]
enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

/// Frobenius-orthonormal real coordinates of Hermitian operators that are
/// block diagonal in total photon number. Cross-sector coherences never
/// change an outcome probability, so they are not part of the model.
struct BlockCoordinates {
    dim: usize,
    coords: Vec<Coord>,
}

impl BlockCoordinates {
    fn new(space: &ConditionedSpace) -> Self {
        let mut coords = Vec::new();
        for r in space.sectors() {
            for i in r.clone() {
                coords.push(Coord::Diag(i));
                for j in i + 1..r.end {
                    coords.push(Coord::Re(i, j));
                    coords.push(Coord::Im(i, j));
                }
            }
        }
        Self {
            dim: space.dim(),
            coords,
        }
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    /// `a_k = tr(Pi E_k)`, so that `tr(rho Pi) = a . x`.
    fn project(&self, pi: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.coords.iter().map(|&c| match c {
                Coord::Diag(i) => pi[(i, i)].re,
                Coord::Re(i, j) => SQRT_2 * pi[(i, j)].re,
                Coord::Im(i, j) => SQRT_2 * pi[(i, j)].im,
            }),
        )
    }

    fn trace_row(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.coords.iter().map(|c| if matches!(c, Coord::Diag(_)) { 1.0 } else { 0.0 }),
        )
    }

    fn assemble(&self, x: &DVector<f64>) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (&c, &v) in self.coords.iter().zip(x.iter()) {
            match c {
                Coord::Diag(i) => m[(i, i)] = C64::new(v, 0.0),
                Coord::Re(i, j) => {
                    m[(i, j)].re = v / SQRT_2;
                    m[(j, i)].re = v / SQRT_2;
                }
                Coord::Im(i, j) => {
                    m[(i, j)].im = v / SQRT_2;
                    m[(j, i)].im = -v / SQRT_2;
                }
            }
        }
        m
    }

    /// Nearest unit-trace positive semidefinite operator in Frobenius
    /// norm: eigenvalues shifted by a common offset and clipped at zero.
    fn project_to_states(&self, x: &DVector<f64>) -> DVector<f64> {
        let (values, vectors) = hermitian_eigen(&self.assemble(x));
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut shift = 0.0;
        let mut partial = 0.0;
        for (k, &l) in sorted.iter().enumerate() {
            partial += l;
            let candidate = (partial - 1.0) / (k + 1) as f64;
            if l - candidate > 0.0 {
                shift = candidate;
            }
        }
        let diag = CMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&l| C64::new((l - shift).max(0.0), 0.0)),
        ));
        self.project(&hermitian_part(&(&vectors * diag * vectors.adjoint())))
    }
}

fn numerical_rank(rows: &[DVector<f64>], cols: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let top = sv.max();
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * top.max(1.0)).count()
}

fn common_space(povms: &[ConditionedPovm]) -> Result<Arc<ConditionedSpace>> {
    let first = povms
        .first()
        .ok_or(Error::TomographicallyIncomplete { rank: 0, required: 1 })?;
    for p in povms {
        if *p.space != *first.space {
            return Err(Error::RecordMismatch("settings use different conditioned spaces".into()));
        }
    }
    Ok(first.space.clone())
}

/// Rank of the span of every outcome operator against the block-diagonal
/// operator space; errors when the set cannot determine such a state.
pub fn check_completeness(povms: &[ConditionedPovm]) -> Result<usize> {
    let space = common_space(povms)?;
    let basis = BlockCoordinates::new(&space);
    let rows: Vec<DVector<f64>> = povms
        .iter()
        .flat_map(|p| p.elements.iter().map(|e| basis.project(e)))
        .collect();
    let rank = numerical_rank(&rows, basis.len());
    if rank < basis.len() {
        return Err(Error::TomographicallyIncomplete {
            rank,
            required: basis.len(),
        });
    }
    Ok(rank)
}

fn check_records(records: &[CountRecord], povms: &[ConditionedPovm]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::RecordMismatch("no count records".into()));
    }
    for r in records {
        let povm = povms.get(r.setting).ok_or_else(|| {
            Error::RecordMismatch(format!("setting {} does not exist ({} settings)", r.setting, povms.len()))
        })?;
        if (povm.setting.theta - r.theta).abs() > SETTING_MATCH || (povm.setting.phi - r.phi).abs() > SETTING_MATCH {
            return Err(Error::RecordMismatch(format!(
                "setting {} is (theta={}, phi={}), record says (theta={}, phi={})",
                r.setting, povm.setting.theta, povm.setting.phi, r.theta, r.phi
            )));
        }
        let sum: f64 = r.counts.iter().sum();
        if (sum - r.heralds).abs() > 1e-9 * r.heralds.max(1.0) {
            return Err(Error::RecordMismatch(format!(
                "setting {}: counts sum to {sum} but {} heralds were recorded",
                r.setting, r.heralds
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once the per-herald log-likelihood gains less than this.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub space: Arc<ConditionedSpace>,
    pub rho: CMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Per-herald log-likelihood `sum n log p / sum n`, starting with the
    /// maximally mixed initial state.
    pub log_likelihood: Vec<f64>,
}

struct Term<'a> {
    weight: f64,
    op: &'a CMatrix,
}

fn log_likelihood(rho: &CMatrix, terms: &[Term<'_>]) -> f64 {
    terms
        .iter()
        .map(|t| {
            let p = real_trace_product(rho, t.op);
            if p > 0.0 {
                t.weight * p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

fn sandwich_normalised(m: &CMatrix, rho: &CMatrix) -> CMatrix {
    let next = hermitian_part(&(m * rho * m));
    let tr: f64 = (0..next.nrows()).map(|i| next[(i, i)].re).sum();
    next / C64::new(tr, 0.0)
}

/// Multinomial maximum likelihood by the `R rho R` fixed-point iteration.
/// A step that would lower the likelihood is diluted, `R -> (1 + eps R)`,
/// until it does not, so the likelihood never decreases.
pub fn mle_reconstruct(records: &[CountRecord], povms: &[ConditionedPovm], options: MleOptions) -> Result<MleResult> {
    check_records(records, povms)?;
    check_completeness(povms)?;
    let space = common_space(povms)?;
    let d = space.dim();
    let mut rho = CMatrix::identity(d, d) / C64::new(d as f64, 0.0);

    let total: f64 = records.iter().map(|r| r.heralds).sum();
    let mut terms = Vec::new();
    for r in records {
        for (g, &n) in r.counts.iter().enumerate() {
            let op = &povms[r.setting].elements[g];
            if real_trace_product(&rho, op) < ZERO_PROBABILITY {
                if n > 0.0 {
                    return Err(Error::ModelMismatch {
                        setting: r.setting,
                        outcome: g + 1,
                        count: n,
                    });
                }
                continue;
            }
            if n > 0.0 {
                terms.push(Term { weight: n / total, op });
            }
        }
    }

    let identity = CMatrix::identity(d, d);
    let mut ll = log_likelihood(&rho, &terms);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let mut r = CMatrix::zeros(d, d);
        for t in &terms {
            let p = real_trace_product(&rho, t.op);
            r += t.op * C64::new(t.weight / p, 0.0);
        }
        let mut accepted = None;
        let mut eps = f64::INFINITY;
        while eps > 1e-10 {
            let m = if eps.is_infinite() {
                r.clone()
            } else {
                &identity + &r * C64::new(eps, 0.0)
            };
            let candidate = sandwich_normalised(&m, &rho);
            let cand_ll = log_likelihood(&candidate, &terms);
            if cand_ll >= ll {
                accepted = Some((candidate, cand_ll));
                break;
            }
            eps = if eps.is_infinite() { 1.0 } else { eps / 2.0 };
        }
        let Some((next, next_ll)) = accepted else {
            // no ascent direction left at working precision
            converged = true;
            break;
        };
        let gain = next_ll - ll;
        rho = next;
        ll = next_ll;
        history.push(ll);
        if gain < options.tolerance {
            converged = true;
            break;
        }
    }
    Ok(MleResult {
        space,
        rho,
        iterations,
        converged,
        log_likelihood: history,
    })
}

#[derive(Debug, Clone)]
pub struct LsqResult {
    pub space: Arc<ConditionedSpace>,
    /// Positive semidefinite, unit trace.
    pub rho: CMatrix,
    /// Trace distance between `rho` and the unconstrained (unit trace,
    /// possibly indefinite) least-squares solution.
    pub unconstrained_distance: f64,
    pub reweights: usize,
}

/// Weighted least squares over every outcome except "no click", which is
/// fixed by the trace, minimised over unit-trace positive semidefinite
/// operators. Weights are `1 / sigma^2` with the variance
/// `sigma^2 = n_alpha p` taken from the previous iterate, floored at one
/// count; the first pass is unweighted.
pub fn lsq_reconstruct(records: &[CountRecord], povms: &[ConditionedPovm]) -> Result<LsqResult> {
    check_records(records, povms)?;
    let space = common_space(povms)?;
    let basis = BlockCoordinates::new(&space);
    let dim = basis.len();

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut heralds = Vec::new();
    for r in records {
        for g in 1..N_OUTCOMES {
            rows.push(basis.project(&povms[r.setting].elements[g]));
            targets.push(r.counts[g]);
            heralds.push(r.heralds);
        }
    }
    let trace_row = basis.trace_row();
    let mut rank_rows = rows.clone();
    rank_rows.push(trace_row.clone());
    let rank = numerical_rank(&rank_rows, dim);
    if rank < dim {
        return Err(Error::TomographicallyIncomplete { rank, required: dim });
    }

    let normal_equations = |weights: &[f64]| -> (DMatrix<f64>, DVector<f64>) {
        let mut normal = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for k in 0..rows.len() {
            let a = &rows[k] * heralds[k];
            normal.ger(weights[k], &a, &a, 1.0);
            rhs.axpy(weights[k] * targets[k], &a, 1.0);
        }
        (normal, rhs)
    };
    let unconstrained_solve = |normal: &DMatrix<f64>, rhs: &DVector<f64>| -> Result<DVector<f64>> {
        // scale the constraint row to the normal matrix for a well-posed LU
        let scale = normal.diagonal().amax().max(1.0);
        let mut kkt = DMatrix::<f64>::zeros(dim + 1, dim + 1);
        kkt.view_mut((0, 0), (dim, dim)).copy_from(normal);
        let mut full_rhs = DVector::<f64>::zeros(dim + 1);
        full_rhs.rows_mut(0, dim).copy_from(rhs);
        for i in 0..dim {
            kkt[(i, dim)] = scale * trace_row[i];
            kkt[(dim, i)] = scale * trace_row[i];
        }
        full_rhs[dim] = scale;
        let sol = kkt
            .lu()
            .solve(&full_rhs)
            .ok_or(Error::TomographicallyIncomplete { rank, required: dim })?;
        Ok(sol.rows(0, dim).into_owned())
    };
    // minimise x' N x - 2 r' x over states by accelerated projected gradient
    // with adaptive restart
    let constrained_solve = |normal: &DMatrix<f64>, rhs: &DVector<f64>, start: &DVector<f64>| -> DVector<f64> {
        let lipschitz = normal.symmetric_eigenvalues().amax().max(f64::MIN_POSITIVE);
        let step = 1.0 / lipschitz;
        let mut x = basis.project_to_states(start);
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..PG_MAX_ITERATIONS {
            let grad = normal * &y - rhs;
            let next = basis.project_to_states(&(&y - grad * step));
            let change = (&next - &x).amax();
            if (&y - &next).dot(&(&next - &x)) > 0.0 {
                // momentum points uphill: restart
                t = 1.0;
                y = next.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                y = &next + (&next - &x) * ((t - 1.0) / t_next);
                t = t_next;
            }
            x = next;
            if change <= 1e-13 {
                break;
            }
        }
        x
    };

    let mut weights = vec![1.0; rows.len()];
    let (normal, rhs) = normal_equations(&weights);
    let mut free = unconstrained_solve(&normal, &rhs)?;
    let mut x = constrained_solve(&normal, &rhs, &free);
    let mut reweights = 0;
    for _ in 0..LSQ_REWEIGHTS {
        for k in 0..rows.len() {
            let p = rows[k].dot(&x);
            weights[k] = 1.0 / (heralds[k] * p).max(1.0);
        }
        let (normal, rhs) = normal_equations(&weights);
        free = unconstrained_solve(&normal, &rhs)?;
        let next = constrained_solve(&normal, &rhs, &x);
        reweights += 1;
        let change = (&next - &x).amax();
        x = next;
        if change <= 1e-12 {
            break;
        }
    }

    let unconstrained = basis.assemble(&free);
    let rho = basis.assemble(&x);
    Ok(LsqResult {
        unconstrained_distance: trace_distance(&unconstrained, &rho),
        space,
        rho,
        reweights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcrbReport {
    pub fisher: FisherValue,
    pub trials: f64,
    /// `1 / sqrt(trials F_Q)`; infinite when `F_Q = 0`.
    pub qcrb: f64,
}

/// Quantum Fisher information of a phase `exp(i phi G)` imprinted directly
/// on the two reconstructed modes, and the resulting bound.
pub fn qcrb_of_reconstruction(
    space: &ConditionedSpace,
    rho: &CMatrix,
    convention: GeneratorConvention,
    trials: f64,
) -> Result<QcrbReport> {
    if !(trials >= 1.0) {
        return Err(Error::OutOfRange {
            name: "trials",
            value: trials,
            range: ">= 1",
        });
    }
    let (basis, m) = space.to_fock(rho);
    let channel = PhaseChannel::new(&basis, &Circuit::empty(), (0, 1), convention, &Circuit::empty())?;
    let state = DensityOperator::from_matrix_unchecked(basis, m)?;
    let fisher = channel.probe(&state)?.quantum_fisher_information(0.0)?;
    let qcrb = if fisher.value > 0.0 {
        1.0 / (trials * fisher.value).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(QcrbReport { fisher, trials, qcrb })
}

/// Density matrix with basis labels, as nested real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub cap: PhotonCap,
    pub labels: Vec<String>,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

impl StateJson {
    pub fn new(space: &ConditionedSpace, rho: &CMatrix) -> Self {
        let d = space.dim();
        Self {
            cap: space.cap(),
            labels: space.labels(),
            real: (0..d).map(|i| (0..d).map(|j| rho[(i, j)].re).collect()).collect(),
            imag: (0..d).map(|i| (0..d).map(|j| rho[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<(ConditionedSpace, CMatrix)> {
        let space = ConditionedSpace::new(self.cap);
        if self.labels != space.labels() {
            return Err(Error::Schema {
                line: 0,
                message: format!("labels {:?} do not match cap {:?}", self.labels, self.cap),
            });
        }
        let d = space.dim();
        let rows_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if !rows_ok(&self.real) || !rows_ok(&self.imag) {
            return Err(Error::Schema {
                line: 0,
                message: format!("matrix must be {d}x{d}"),
            });
        }
        let m = CMatrix::from_fn(d, d, |i, j| C64::new(self.real[i][j], self.imag[i][j]));
        if max_abs(&(&m - m.adjoint())) > 1e-10 {
            return Err(Error::NotHermitian(max_abs(&(&m - m.adjoint()))));
        }
        Ok((space, m))
    }
}
