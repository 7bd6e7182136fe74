//! Cramér–Rao-type bounds (SLD, Nagaoka, Holevo) and the trade-off curves
//! derived from weighted bounds.

use nalgebra::{DVector, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianMatrix};
use crate::model::{self, EstimationProblem, DEFAULT_RANK_TOL};
use crate::solver::{self, Chart, HolevoObjective, NagaokaObjective, Objective};

pub use crate::solver::SolverOptions;

/// Relative determinant below which a Fisher matrix is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-14;

/// Positive-definite 2x2 weight matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightMatrix(Matrix2<f64>);

impl WeightMatrix {
    pub fn new(m: Matrix2<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "weight matrix has non-finite entries".into(),
            ));
        }
        let asym = (m[(0, 1)] - m[(1, 0)]).abs();
        if asym > 1e-12 * (1.0 + m.abs().max()) {
            return Err(Error::Validation(format!(
                "weight matrix is not symmetric (|W12 - W21| = {asym:e})"
            )));
        }
        let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        let m = Matrix2::new(m[(0, 0)], off, off, m[(1, 1)]);
        let min_eig = sym_min_eigenvalue(&m);
        if !(min_eig > 0.0) {
            return Err(Error::WeightNotPositiveDefinite {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    /// `diag(w, 2 − w)` for `w ∈ (0, 2)`.
    pub fn diag_w(w: f64) -> Result<Self> {
        if !(w > 0.0 && w < 2.0) {
            return Err(Error::Validation(format!(
                "weight w must lie in (0, 2), got {w}"
            )));
        }
        Ok(Self(Matrix2::new(w, 0.0, 0.0, 2.0 - w)))
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn sqrt_det(&self) -> f64 {
        self.0.determinant().max(0.0).sqrt()
    }
}

fn sym_min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let half_tr = 0.5 * m.trace();
    let disc = (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + m[(0, 1)] * m[(1, 0)])
        .max(0.0)
        .sqrt();
    half_tr - disc
}

/// Solver diagnostics attached to a [`BoundResult`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub final_mu: f64,
    pub constraint_residual: f64,
    pub history_len: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    /// `+∞` when the Fisher information is singular.
    pub value: f64,
    pub optimizer: Option<[HermitianMatrix; 2]>,
    pub diagnostics: Diagnostics,
}

impl BoundResult {
    fn closed_form(value: f64) -> Self {
        Self {
            value,
            optimizer: None,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

pub fn is_singular(qfi: &Matrix2<f64>) -> bool {
    let tr = qfi.trace();
    !(tr > 0.0) || qfi.determinant() <= SINGULAR_TOL * tr * tr
}

fn inverse(qfi: &Matrix2<f64>) -> Matrix2<f64> {
    let det = qfi.determinant();
    Matrix2::new(qfi[(1, 1)], -qfi[(0, 1)], -qfi[(1, 0)], qfi[(0, 0)]) / det
}

/// SLD Cramér–Rao bound `Tr[W𝓕⁻¹]`.
pub fn sld_crb(qfi: &Matrix2<f64>, w: &WeightMatrix) -> f64 {
    if is_singular(qfi) {
        return f64::INFINITY;
    }
    (w.matrix() * inverse(qfi)).trace()
}

/// Qubit Nagaoka bound `Tr[W𝓕⁻¹] + 2√det(W𝓕⁻¹)`.
pub fn ncrb_qubit(qfi: &Matrix2<f64>, w: &WeightMatrix) -> f64 {
    if is_singular(qfi) {
        return f64::INFINITY;
    }
    let wf = w.matrix() * inverse(qfi);
    wf.trace() + 2.0 * wf.determinant().max(0.0).sqrt()
}

/// RLD Cramér–Rao bound `Tr[W Re 𝓕_R⁻¹] + 2√det W · |(Im 𝓕_R⁻¹)₁₂|`.
pub fn rld_crb(problem: &EstimationProblem, w: &WeightMatrix) -> Result<f64> {
    let fr = model::rld_qfi(problem)?;
    let det = fr[(0, 0)] * fr[(1, 1)] - fr[(0, 1)] * fr[(1, 0)];
    if !(det.re > 0.0) || det.re <= SINGULAR_TOL * (fr[(0, 0)].re + fr[(1, 1)].re).powi(2) {
        return Ok(f64::INFINITY);
    }
    let inv12 = -fr[(0, 1)] / det;
    let re = Matrix2::new(
        (fr[(1, 1)] / det).re,
        inv12.re,
        inv12.re,
        (fr[(0, 0)] / det).re,
    );
    Ok((w.matrix() * re).trace() + 2.0 * w.sqrt_det() * inv12.im.abs())
}

/// Holevo bound of a full-rank qubit model in closed form.
///
/// With `C_S` the SLD bound, `C_R` the RLD bound and
/// `C_Z = C_S + 2√det W · |Im Tr[ρL₁L₂]| / det 𝓕`, the bound is `C_R` when
/// `C_R ≥ (C_Z + C_S)/2` and `C_S + (C_Z − C_S)² / (4(C_Z − C_R))` otherwise.
/// The first branch is the RLD bound itself.
pub fn hcrb_qubit(problem: &EstimationProblem, w: &WeightMatrix) -> Result<f64> {
    if problem.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: problem.dim(),
        });
    }
    let c_r = rld_crb(problem, w)?;
    let data = model::QfiData::compute(problem, DEFAULT_RANK_TOL)?;
    if is_singular(&data.qfi) {
        return Ok(f64::INFINITY);
    }
    let c_s = sld_crb(&data.qfi, w);
    let [l1, l2] = &data.slds;
    let d12 = (problem.rho().matrix() * l1.matrix() * l2.matrix())
        .trace()
        .im;
    let c_z = c_s + 2.0 * w.sqrt_det() * d12.abs() / data.qfi.determinant();
    if c_r >= 0.5 * (c_z + c_s) {
        Ok(c_r)
    } else {
        Ok(c_s + (c_z - c_s).powi(2) / (4.0 * (c_z - c_r)))
    }
}

fn solve_general(
    problem: &EstimationProblem,
    w: &WeightMatrix,
    opts: &SolverOptions,
    make: impl Fn(&EstimationProblem, Matrix2<f64>) -> Box<dyn Objective>,
) -> Result<BoundResult> {
    opts.validate()?;
    let qfi = model::QfiData::compute(problem, DEFAULT_RANK_TOL)?;
    if is_singular(&qfi.qfi) {
        return Ok(BoundResult::closed_form(f64::INFINITY));
    }
    let chart = Chart::new(problem)?;
    let finv = inverse(&qfi.qfi);
    let start: [CMatrix; 2] = [0, 1].map(|j| {
        qfi.slds[0].matrix().scale(finv[(j, 0)]) + qfi.slds[1].matrix().scale(finv[(j, 1)])
    });
    let z0: DVector<f64> = chart.reduce(&start);
    let scale = (w.matrix() * finv).trace();
    let obj = make(problem, *w.matrix());
    let min = solver::minimize(&chart, obj.as_ref(), z0, scale, opts)?;
    let [x1, x2] = min.x;
    Ok(BoundResult {
        value: min.value,
        optimizer: Some([
            HermitianMatrix::from_hermitian_part(&x1),
            HermitianMatrix::from_hermitian_part(&x2),
        ]),
        diagnostics: Diagnostics {
            iterations: min.iterations,
            final_mu: min.final_mu,
            constraint_residual: min.constraint_residual,
            history_len: min.history_len,
            gradient_norm: min.gradient_norm,
        },
    })
}

/// Nagaoka bound in any dimension, by smoothed minimisation over locally
/// unbiased `(X₁, X₂)`.
pub fn ncrb_general(
    problem: &EstimationProblem,
    w: &WeightMatrix,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    solve_general(problem, w, opts, |p, w| {
        Box::new(NagaokaObjective::new(p, w))
    })
}

/// Holevo bound in any dimension, by smoothed minimisation over locally
/// unbiased `(X₁, X₂)`.
pub fn hcrb_general(
    problem: &EstimationProblem,
    w: &WeightMatrix,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    solve_general(problem, w, opts, |p, w| {
        Box::new(HolevoObjective::new(p, w))
    })
}

/// Nagaoka bound using the closed form for qubits and the solver otherwise.
pub fn ncrb(
    problem: &EstimationProblem,
    w: &WeightMatrix,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    if problem.dim() == 2 {
        let qfi = model::sld_qfi(problem)?;
        Ok(BoundResult::closed_form(ncrb_qubit(&qfi, w)))
    } else {
        ncrb_general(problem, w, opts)
    }
}

/// Holevo bound using the qubit closed form for full-rank qubits and the solver otherwise.
pub fn hcrb(
    problem: &EstimationProblem,
    w: &WeightMatrix,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    if problem.dim() == 2 && problem.is_full_rank() {
        Ok(BoundResult::closed_form(hcrb_qubit(problem, w)?))
    } else {
        hcrb_general(problem, w, opts)
    }
}

/// Ordered `(v₁, v₂)` boundary points of an MSE trade-off region.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyCurve {
    pub points: Vec<(f64, f64)>,
    pub descriptor: String,
    /// Input indices (grid positions) that produced no point.
    pub dropped: Vec<usize>,
}

impl UncertaintyCurve {
    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|p| p[1].0 > p[0].0 && p[1].1 <= p[0].1)
    }
}

fn check_increasing(grid: &[f64], what: &str) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "{what} contains non-finite values"
        )));
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Validation(format!(
            "{what} must be strictly increasing"
        )));
    }
    Ok(())
}

/// The qubit Nagaoka trade-off `(v₁ − [𝓕⁻¹]₁₁)(v₂ − [𝓕⁻¹]₂₂) = 1/det 𝓕`.
pub fn nagaoka_curve_qubit(qfi: &Matrix2<f64>, v1_grid: &[f64]) -> Result<UncertaintyCurve> {
    if is_singular(qfi) {
        return Err(Error::Domain("Fisher information is singular".into()));
    }
    check_increasing(v1_grid, "v1 grid")?;
    let finv = inverse(qfi);
    let (a, b) = (finv[(0, 0)], finv[(1, 1)]);
    let k = 1.0 / qfi.determinant();
    let mut points = Vec::with_capacity(v1_grid.len());
    for &v1 in v1_grid {
        if v1 <= a {
            return Err(Error::Domain(format!(
                "v1 = {v1} does not exceed the single-parameter bound {a}"
            )));
        }
        points.push((v1, b + k / (v1 - a)));
    }
    Ok(UncertaintyCurve {
        points,
        descriptor: "nagaoka".into(),
        dropped: Vec::new(),
    })
}

/// `w` values uniformly spaced in `ln √(w/(2−w))` over `[−t, t]`.
///
/// This spacing keeps neighbouring tangent points of the envelope at a
/// constant ratio, which a uniform grid in `w` does not near the ends.
pub fn log_ratio_weight_grid(count: usize, half_width: f64) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let t = if count == 1 {
                0.0
            } else {
                -half_width + 2.0 * half_width * k as f64 / (count - 1) as f64
            };
            let u2 = (2.0 * t).exp();
            2.0 * u2 / (1.0 + u2)
        })
        .collect()
}

struct Line {
    slope: f64,
    intercept: f64,
    w: f64,
}

impl Line {
    fn at(&self, v1: f64) -> f64 {
        self.slope * v1 + self.intercept
    }
}

/// Region boundary from a weighted bound `C(W)` with `W = diag(w, 2 − w)`.
///
/// Each weight gives the half-plane `w·v₁ + (2 − w)·v₂ ≥ C(w)`; the boundary
/// is the upper envelope of the lines, returned as its vertices. Weights where
/// the bound is not finite are dropped and listed in `dropped`.
pub fn envelope_from_weighted_bound<F>(
    bound: F,
    w_grid: &[f64],
    descriptor: &str,
) -> Result<UncertaintyCurve>
where
    F: Fn(&WeightMatrix) -> Result<f64> + Sync,
{
    check_increasing(w_grid, "weight grid")?;
    let weights: Vec<WeightMatrix> = w_grid
        .iter()
        .map(|&w| WeightMatrix::diag_w(w))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = weights.par_iter().map(&bound).collect::<Result<_>>()?;

    let mut dropped = Vec::new();
    let mut lines = Vec::with_capacity(w_grid.len());
    for (k, (&w, &cv)) in w_grid.iter().zip(&values).enumerate() {
        if !cv.is_finite() {
            dropped.push(k);
            continue;
        }
        lines.push(Line {
            slope: -w / (2.0 - w),
            intercept: cv / (2.0 - w),
            w,
        });
    }
    // Ascending slope means descending w; leftmost envelope segment first.
    lines.reverse();

    let mut hull: Vec<Line> = Vec::with_capacity(lines.len());
    for line in lines {
        if let Some(top) = hull.last_mut() {
            if (top.w - line.w).abs() <= 1e-12 {
                if line.intercept > top.intercept {
                    *top = line;
                }
                continue;
            }
        }
        while hull.len() >= 2 {
            let n = hull.len();
            let (a, b) = (&hull[n - 2], &hull[n - 1]);
            if crossing(a, &line) <= crossing(a, b) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(line);
    }

    let mut points: Vec<(f64, f64)> = Vec::with_capacity(hull.len());
    for pair in hull.windows(2) {
        let v1 = crossing(&pair[0], &pair[1]);
        let v2 = pair[0].at(v1).max(pair[1].at(v1));
        match points.last() {
            Some(&(p1, p2)) => {
                let tol = 1e-9 * (1.0 + p1.abs().max(v1.abs()));
                if v1 > p1 + tol && v2 <= p2 {
                    points.push((v1, v2));
                }
            }
            None => points.push((v1, v2)),
        }
    }
    Ok(UncertaintyCurve {
        points,
        descriptor: descriptor.into(),
        dropped,
    })
}

fn crossing(a: &Line, b: &Line) -> f64 {
    (b.intercept - a.intercept) / (a.slope - b.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::{incompatibility, sld_qfi};
    use crate::randomgen::{random_problem, random_pure_problem, SeededRng};
    use crate::scenarios::{
        equal_bounds_problem, rotations_problem, rotations_reference, RotationsConfig,
    };
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, SQRT_2};

    fn rot(r: f64, th: f64, ph: f64) -> EstimationProblem {
        rotations_problem(&RotationsConfig::new(r, th, ph).unwrap())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    /// 2x2 inverse by cofactors, independent of the library helper.
    fn oracle_inverse(m: &Matrix2<f64>) -> Matrix2<f64> {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        Matrix2::new(
            m[(1, 1)] / det,
            -m[(0, 1)] / det,
            -m[(1, 0)] / det,
            m[(0, 0)] / det,
        )
    }

    #[test]
    fn weight_validation() {
        assert!(WeightMatrix::new(Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
        assert!(WeightMatrix::new(Matrix2::new(1.0, 0.1, 0.2, 1.0)).is_err());
        assert!(WeightMatrix::diag_w(0.0).is_err());
        assert!(WeightMatrix::diag_w(2.0).is_err());
        assert_eq!(WeightMatrix::diag_w(1.0).unwrap(), WeightMatrix::identity());
    }

    #[test]
    fn sld_crb_examples() {
        let f = Matrix2::new(3.0 / 16.0, -1.0 / 16.0, -1.0 / 16.0, 3.0 / 16.0);
        let expected = oracle_inverse(&f).trace();
        assert!((sld_crb(&f, &WeightMatrix::identity()) - expected).abs() < 1e-12);
        assert!((expected - 12.0).abs() < 1e-12);
        let id = Matrix2::identity();
        assert!((sld_crb(&id, &WeightMatrix::identity()) - 2.0).abs() < 1e-15);
        assert!((sld_crb(&id, &WeightMatrix::diag_w(1.5).unwrap()) - 2.0).abs() < 1e-15);
        assert!(
            sld_crb(&Matrix2::new(1.0, 1.0, 1.0, 1.0), &WeightMatrix::identity()).is_infinite()
        );
    }

    #[test]
    fn ncrb_qubit_examples() {
        let f = sld_qfi(&rot(0.5, FRAC_PI_4, FRAC_PI_4)).unwrap();
        let v = ncrb_qubit(&f, &WeightMatrix::identity());
        assert!((v - 4.0 * (1.0 + SQRT_2).powi(2)).abs() < 1e-10);
        assert!((ncrb_qubit(&Matrix2::identity(), &WeightMatrix::identity()) - 4.0).abs() < 1e-15);
        let v = ncrb_qubit(&Matrix2::new(4.0, 0.0, 0.0, 9.0), &WeightMatrix::identity());
        assert!((v - 25.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn hcrb_qubit_examples() {
        let p = rot(0.5, FRAC_PI_4, FRAC_PI_4);
        let v = hcrb_qubit(&p, &WeightMatrix::identity()).unwrap();
        assert!((v - (12.0 + 4.0 * SQRT_2)).abs() < 1e-10);
        assert_eq!(v, rld_crb(&p, &WeightMatrix::identity()).unwrap());
        assert!((v - (3.0 + 2.0 * SQRT_2 * 0.5) / 0.25).abs() < 1e-10);
        assert!(matches!(
            hcrb_qubit(&rot(1.0, FRAC_PI_4, FRAC_PI_4), &WeightMatrix::identity()),
            Err(Error::RldUndefined { .. })
        ));
    }

    #[test]
    fn rld_crb_can_fall_below_sld_crb() {
        // ρ = diag(0.3, 0.7) with one diagonal and one off-diagonal derivative:
        // both informations are diagonal and the RLD one is larger.
        let rho = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.3, 0.0), c(0.7, 0.0)]));
        let d1 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        let mut d2 = CMatrix::zeros(2, 2);
        d2[(0, 1)] = c(0.4, 0.0);
        d2[(1, 0)] = c(0.4, 0.0);
        let p = EstimationProblem::from_matrices(rho, d1, d2).unwrap();
        let w = WeightMatrix::identity();
        let f = sld_qfi(&p).unwrap();
        let fr = model::rld_qfi(&p).unwrap();
        assert!(fr[(0, 1)].norm() < 1e-15 && f[(0, 1)].abs() < 1e-15);
        let r = rld_crb(&p, &w).unwrap();
        assert!((r - (1.0 / fr[(0, 0)].re + 1.0 / fr[(1, 1)].re)).abs() < 1e-12);
        assert!(r < sld_crb(&f, &w));
        // Commuting-like model without an imaginary part: the Holevo bound is the SLD bound.
        let h = hcrb_qubit(&p, &w).unwrap();
        assert!(rel(h, sld_crb(&f, &w)) < 1e-12);
        let g = hcrb_general(&p, &w, &SolverOptions::default()).unwrap();
        assert!(rel(g.value, h) < 1e-6);
    }

    #[test]
    fn general_solvers_on_rotations() {
        let opts = SolverOptions::default();
        for &r in &[0.3, 0.5, 0.8, 1.0] {
            for &th in &[FRAC_PI_6, FRAC_PI_4, FRAC_PI_3] {
                for &ph in &[0.0, FRAC_PI_8, FRAC_PI_4] {
                    let cfg = RotationsConfig::new(r, th, ph).unwrap();
                    let p = rotations_problem(&cfg);
                    let refv = rotations_reference(&cfg);
                    let n = ncrb_general(&p, &WeightMatrix::identity(), &opts).unwrap();
                    assert!(
                        rel(n.value, refv.ncrb) < 1e-5,
                        "ncrb {} vs {}",
                        n.value,
                        refv.ncrb
                    );
                    assert!(n.diagnostics.constraint_residual < 1e-8);
                    let h = hcrb_general(&p, &WeightMatrix::identity(), &opts).unwrap();
                    assert!(
                        rel(h.value, refv.hcrb) < 1e-5,
                        "hcrb {} vs {}",
                        h.value,
                        refv.hcrb
                    );
                }
            }
        }
    }

    #[test]
    fn optimizer_reproduces_value() {
        let p = random_problem(3, &mut SeededRng::new(50, 0)).unwrap();
        let w = WeightMatrix::new(Matrix2::new(1.2, 0.3, 0.3, 0.8)).unwrap();
        let res = ncrb_general(&p, &w, &SolverOptions::default()).unwrap();
        let [x1, x2] = res.optimizer.clone().unwrap();
        let obj = NagaokaObjective::new(&p, *w.matrix());
        let v = obj.exact(&[x1.into_inner(), x2.into_inner()]);
        assert!(rel(v, res.value) < 1e-8);
        assert!(res.diagnostics.constraint_residual < 1e-8);
    }

    #[test]
    fn general_matches_qubit_closed_forms() {
        let opts = SolverOptions::default();
        for k in 0..30u64 {
            let p = random_problem(2, &mut SeededRng::new(51, k)).unwrap();
            let f = sld_qfi(&p).unwrap();
            let off = 0.1 * (k % 4) as f64;
            let w = WeightMatrix::new(Matrix2::new(0.3 + 0.045 * k as f64, off, off, 0.9)).unwrap();
            let n = ncrb_general(&p, &w, &opts).unwrap();
            assert!(rel(n.value, ncrb_qubit(&f, &w)) < 1e-5);
            let h = hcrb_general(&p, &w, &opts).unwrap();
            assert!(rel(h.value, hcrb_qubit(&p, &w).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn equal_bounds_problem_ncrb() {
        let (p, expected) = equal_bounds_problem(3).unwrap();
        let n = ncrb_general(&p, &WeightMatrix::identity(), &SolverOptions::default()).unwrap();
        assert!(rel(n.value, expected) < 1e-4);
        assert!((incompatibility(&p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pure_states_have_equal_nagaoka_and_holevo() {
        let opts = SolverOptions::default();
        for d in [2, 3] {
            for k in 0..5u64 {
                let p = random_pure_problem(d, &mut SeededRng::new(52, k)).unwrap();
                let n = ncrb_general(&p, &WeightMatrix::identity(), &opts).unwrap();
                let h = hcrb_general(&p, &WeightMatrix::identity(), &opts).unwrap();
                assert!(
                    rel(h.value, n.value) < 1e-5,
                    "d={d} k={k}: {} vs {}",
                    h.value,
                    n.value
                );
            }
        }
    }

    #[test]
    fn ordering_on_random_problems() {
        let opts = SolverOptions::default();
        for k in 0..20u64 {
            let p = random_problem(3, &mut SeededRng::new(53, k)).unwrap();
            let w = WeightMatrix::identity();
            let s = sld_crb(&sld_qfi(&p).unwrap(), &w);
            let h = hcrb_general(&p, &w, &opts).unwrap().value;
            let n = ncrb_general(&p, &w, &opts).unwrap().value;
            assert!(s <= h + 1e-7 && h <= n + 1e-7, "{s} {h} {n}");
        }
    }

    #[test]
    fn reparameterization_covariance() {
        // Derivatives A∂ with weight W equal the original problem with weight A⁻¹WA⁻ᵀ.
        let opts = SolverOptions::default();
        let mut rng = SeededRng::new(54, 0);
        for d in [2, 3] {
            let p = random_problem(d, &mut rng).unwrap();
            let a = Matrix2::new(rng.normal(), rng.normal(), rng.normal(), rng.normal());
            let ainv = a.try_inverse().unwrap();
            let w = WeightMatrix::new(Matrix2::new(1.1, 0.2, 0.2, 0.9)).unwrap();
            let lhs = ncrb_general(&p.reparameterized(&a), &w, &opts)
                .unwrap()
                .value;
            let w2 = ainv * w.matrix() * ainv.transpose();
            let w2 = WeightMatrix::new(0.5 * (w2 + w2.transpose())).unwrap();
            let rhs = ncrb_general(&p, &w2, &opts).unwrap().value;
            assert!(rel(lhs, rhs) < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn monotone_in_weight() {
        let opts = SolverOptions::default();
        let p = random_problem(3, &mut SeededRng::new(55, 0)).unwrap();
        let w = Matrix2::new(1.0, 0.2, 0.2, 0.7);
        let a = ncrb_general(&p, &WeightMatrix::new(w).unwrap(), &opts)
            .unwrap()
            .value;
        let b = ncrb_general(
            &p,
            &WeightMatrix::new(w + Matrix2::identity() * 0.05).unwrap(),
            &opts,
        )
        .unwrap()
        .value;
        assert!(b >= a - 1e-7 * a);
    }

    #[test]
    fn singular_fisher_reports_infinity() {
        let p = rot(1.0, FRAC_PI_2, FRAC_PI_3);
        let opts = SolverOptions::default();
        assert!(ncrb_general(&p, &WeightMatrix::identity(), &opts)
            .unwrap()
            .is_infinite());
        assert!(hcrb_general(&p, &WeightMatrix::identity(), &opts)
            .unwrap()
            .is_infinite());
        assert!(ncrb(&p, &WeightMatrix::identity(), &opts)
            .unwrap()
            .is_infinite());
        let f = sld_qfi(&p).unwrap();
        assert!(sld_crb(&f, &WeightMatrix::identity()).is_infinite());
        let p = rot(0.5, FRAC_PI_2, FRAC_PI_3);
        assert!(hcrb_qubit(&p, &WeightMatrix::identity())
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn nagaoka_curve_examples() {
        let c = nagaoka_curve_qubit(&Matrix2::identity(), &[2.0, 3.0, 1e9]).unwrap();
        assert_eq!(c.points[0], (2.0, 2.0));
        assert!((c.points[2].1 - 1.0).abs() < 1e-8);
        assert!(c.is_monotone());
        let f = sld_qfi(&rot(0.5, FRAC_PI_4, FRAC_PI_4)).unwrap();
        let c = nagaoka_curve_qubit(&f, &[10.0]).unwrap();
        assert!((c.points[0].1 - 14.0).abs() < 1e-10);
        assert!(nagaoka_curve_qubit(&f, &[6.0]).is_err());
        assert!(nagaoka_curve_qubit(&f, &[12.0, 10.0]).is_err());
    }

    #[test]
    fn sld_envelope_collapses_to_corner() {
        let f = Matrix2::identity();
        let grid: Vec<f64> = (1..100).map(|k| k as f64 / 50.0).collect();
        let c = envelope_from_weighted_bound(|w| Ok(sld_crb(&f, w)), &grid, "sld").unwrap();
        assert_eq!(c.points.len(), 1);
        assert!((c.points[0].0 - 1.0).abs() < 1e-9 && (c.points[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ncrb_envelope_tracks_hyperbola() {
        for k in 0..5u64 {
            let p = random_problem(2, &mut SeededRng::new(56, k)).unwrap();
            let f = sld_qfi(&p).unwrap();
            let finv = oracle_inverse(&f);
            let (a, b) = (finv[(0, 0)], finv[(1, 1)]);
            let kk = 1.0 / f.determinant();
            let grid = log_ratio_weight_grid(801, 0.9);
            let c = envelope_from_weighted_bound(|w| Ok(ncrb_qubit(&f, w)), &grid, "ncrb").unwrap();
            assert!(c.is_monotone());
            assert_eq!(c.points.len(), 800);
            for &(v1, v2) in &c.points {
                let hyp = b + kk / (v1 - a);
                assert!(v2 <= hyp * (1.0 + 1e-12));
                assert!((hyp - v2) / hyp < 1e-5);
            }
            // Tangent point of the w-line lies on the hyperbola and on the line.
            for &w in &[0.3, 1.0, 1.7] {
                let t1 = a + (kk * (2.0 - w) / w).sqrt();
                let t2 = b + kk / (t1 - a);
                let cw = ncrb_qubit(&f, &WeightMatrix::diag_w(w).unwrap());
                assert!((w * t1 + (2.0 - w) * t2 - cw).abs() < 1e-9 * cw);
            }
        }
    }

    #[test]
    fn envelope_limits_and_dropped_points() {
        let f = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let finv = oracle_inverse(&f);
        let grid = log_ratio_weight_grid(201, 6.0);
        let c = envelope_from_weighted_bound(|w| Ok(ncrb_qubit(&f, w)), &grid, "ncrb").unwrap();
        let first = c.points.first().unwrap();
        let last = c.points.last().unwrap();
        assert!((first.0 - finv[(0, 0)]) / finv[(0, 0)] < 1e-2);
        assert!((last.1 - finv[(1, 1)]) / finv[(1, 1)] < 1e-2);

        let grid = [0.5, 1.0, 1.5];
        let c = envelope_from_weighted_bound(
            |w| {
                Ok(if w.matrix()[(0, 0)] == 1.0 {
                    f64::INFINITY
                } else {
                    ncrb_qubit(&f, w)
                })
            },
            &grid,
            "ncrb",
        )
        .unwrap();
        assert_eq!(c.dropped, vec![1]);
        assert_eq!(c.points.len(), 1);
    }

    #[test]
    fn log_ratio_grid_is_symmetric() {
        let g = log_ratio_weight_grid(101, 0.9);
        assert_eq!(g.len(), 101);
        assert!((g[50] - 1.0).abs() < 1e-15);
        for k in 0..101 {
            assert!((g[k] + g[100 - k] - 2.0).abs() < 1e-14);
        }
        assert!(g.windows(2).all(|p| p[1] > p[0]));
    }
}
