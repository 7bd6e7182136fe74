//! POVM statistics: outcome probabilities, classical Fisher information,
//! information regret and the IRTR gap.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianMatrix, PSD_FLOOR};
use crate::model::{EstimationProblem, QfiData, DEFAULT_RANK_TOL};

pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const DEFAULT_P_TOL: f64 = 1e-12;

/// Positive effects summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<HermitianMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<HermitianMatrix>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::Validation("POVM has no effects".into()));
        };
        let d = first.dim();
        let mut total = CMatrix::zeros(d, d);
        for (k, e) in effects.iter().enumerate() {
            if e.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: e.dim(),
                });
            }
            let min = e.eigen().min();
            if min < -PSD_FLOOR {
                return Err(Error::Validation(format!(
                    "effect {k} is not PSD (min eigenvalue {min:e})"
                )));
            }
            total += e.matrix();
        }
        let dev = linalg::frobenius(&(total - CMatrix::identity(d, d)));
        if dev > COMPLETENESS_TOL {
            return Err(Error::Validation(format!(
                "effects sum to identity only within {dev:e} (tolerance {COMPLETENESS_TOL:e})"
            )));
        }
        Ok(Self { effects })
    }

    /// Projective measurement in the computational basis.
    pub fn computational_basis(d: usize) -> Self {
        let effects = (0..d)
            .map(|k| {
                let mut diag = vec![0.0; d];
                diag[k] = 1.0;
                HermitianMatrix::from_real_diagonal(&diag)
            })
            .collect();
        Self { effects }
    }

    pub fn trivial(d: usize) -> Self {
        Self {
            effects: vec![HermitianMatrix::identity(d)],
        }
    }

    pub fn effects(&self) -> &[HermitianMatrix] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    /// Coarse-grains outcomes `i` and `j` into one effect.
    pub fn merged(&self, i: usize, j: usize) -> Povm {
        assert!(i != j && i < self.len() && j < self.len());
        let mut effects = Vec::with_capacity(self.len() - 1);
        effects.push(HermitianMatrix::from_hermitian_part(
            &(self.effects[i].matrix() + self.effects[j].matrix()),
        ));
        for (k, e) in self.effects.iter().enumerate() {
            if k != i && k != j {
                effects.push(e.clone());
            }
        }
        Povm { effects }
    }

    pub fn permuted(&self, order: &[usize]) -> Povm {
        Povm {
            effects: order.iter().map(|&k| self.effects[k].clone()).collect(),
        }
    }
}

/// Outcome probabilities `pₖ = Tr[ρΠₖ]` and their parameter derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeStatistics {
    pub p: Vec<f64>,
    pub dp: [Vec<f64>; 2],
}

pub fn probabilities(problem: &EstimationProblem, povm: &Povm) -> Result<OutcomeStatistics> {
    if povm.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            actual: povm.dim(),
        });
    }
    let tr = |a: &CMatrix, b: &CMatrix| linalg::trace_re(&(a * b));
    let rho = problem.rho().matrix();
    let [d1, d2] = problem.drho();
    let mut p = Vec::with_capacity(povm.len());
    let mut dp1 = Vec::with_capacity(povm.len());
    let mut dp2 = Vec::with_capacity(povm.len());
    for e in povm.effects() {
        let pk = tr(rho, e.matrix());
        p.push(if (-1e-12..0.0).contains(&pk) { 0.0 } else { pk });
        dp1.push(tr(d1.matrix(), e.matrix()));
        dp2.push(tr(d2.matrix(), e.matrix()));
    }
    Ok(OutcomeStatistics { p, dp: [dp1, dp2] })
}

/// Classical Fisher information `Fᵢⱼ = Σₖ ∂ᵢpₖ ∂ⱼpₖ / pₖ`.
///
/// Outcomes with `pₖ ≤ p_tol` and negligible derivative are skipped.
/// Per-outcome terms are summed in a canonical order, so relabelling the
/// outcomes leaves the result bitwise unchanged.
pub fn classical_fisher(
    problem: &EstimationProblem,
    povm: &Povm,
    p_tol: f64,
) -> Result<Matrix2<f64>> {
    let stats = probabilities(problem, povm)?;
    let mut terms = Vec::with_capacity(stats.p.len());
    for (k, &pk) in stats.p.iter().enumerate() {
        let (a, b) = (stats.dp[0][k], stats.dp[1][k]);
        if pk <= p_tol {
            let derivative = a.abs().max(b.abs());
            if derivative > p_tol.sqrt() {
                return Err(Error::SingularOutcome {
                    outcome: k,
                    probability: pk,
                    derivative,
                });
            }
            continue;
        }
        terms.push([a * a / pk, b * b / pk, a * b / pk]);
    }
    terms.sort_by(|x, y| {
        x[0].total_cmp(&y[0])
            .then(x[1].total_cmp(&y[1]))
            .then(x[2].total_cmp(&y[2]))
    });
    let mut f = [0.0; 3];
    for t in &terms {
        for i in 0..3 {
            f[i] += t[i];
        }
    }
    Ok(Matrix2::new(f[0], f[2], f[2], f[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub classical_fisher: Matrix2<f64>,
    /// `R = 𝓕 − F`.
    pub regret: Matrix2<f64>,
    /// Normalised square-root regrets `Δⱼ = √(Rⱼⱼ/𝓕ⱼⱼ)`.
    pub deltas: [f64; 2],
    /// IRTR gap `G = Δ₁² + Δ₂² + 2√(1−c̃²)Δ₁Δ₂ − c̃²`.
    pub gap: f64,
    pub precision: f64,
}

pub fn regret_report(problem: &EstimationProblem, povm: &Povm) -> Result<RegretReport> {
    let qfi = QfiData::compute(problem, DEFAULT_RANK_TOL)?;
    regret_report_with(&qfi, problem, povm)
}

/// [`regret_report`] against precomputed quantum descriptors of `problem`.
pub fn regret_report_with(
    qfi: &QfiData,
    problem: &EstimationProblem,
    povm: &Povm,
) -> Result<RegretReport> {
    let c_tilde = qfi.c_tilde()?;
    let f = classical_fisher(problem, povm, DEFAULT_P_TOL)?;
    let q = qfi.qfi;
    let regret = q - f;
    let deltas = [
        (regret[(0, 0)].max(0.0) / q[(0, 0)]).sqrt(),
        (regret[(1, 1)].max(0.0) / q[(1, 1)]).sqrt(),
    ];
    let s = (1.0 - c_tilde * c_tilde).max(0.0).sqrt();
    let gap = deltas[0] * deltas[0] + deltas[1] * deltas[1] + 2.0 * s * deltas[0] * deltas[1]
        - c_tilde * c_tilde;
    Ok(RegretReport {
        classical_fisher: f,
        regret,
        deltas,
        gap,
        precision: precision(&f),
    })
}

/// `1/Tr[F⁻¹] = det F / Tr F`, or 0 for a singular `F`.
pub fn precision(f: &Matrix2<f64>) -> f64 {
    let tr = f.trace();
    let det = f.determinant();
    if tr <= 0.0 || det <= 1e-14 * tr * tr {
        0.0
    } else {
        det / tr
    }
}
