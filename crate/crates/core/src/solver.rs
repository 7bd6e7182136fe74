//! Smoothed quasi-Newton minimisation over pairs of locally unbiased
//! estimator matrices `(X₁, X₂)`.
//!
//! Each `Xⱼ` is written in the orthonormal Hermitian basis of
//! [`linalg::hermitian_coords`]. The constraints `Tr[ρXⱼ] = 0` and
//! `Tr[∂ᵢρ Xⱼ] = δᵢⱼ` are affine in those coordinates, so the feasible set is
//! `xⱼ = pⱼ + N zⱼ` with `N` an orthonormal basis of the constraint null space.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianMatrix};
use crate::model::EstimationProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Total BFGS iterations over all smoothing stages.
    pub max_iterations: usize,
    pub mu_start: f64,
    pub mu_end: f64,
    /// Geometric decrease of the smoothing parameter between stages.
    pub mu_factor: f64,
    /// Relative objective change regarded as stalled.
    pub rel_tol: f64,
    /// Consecutive stalled iterations that end a stage.
    pub stall_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            mu_start: 1e-2,
            mu_end: 1e-8,
            mu_factor: 0.1,
            rel_tol: 1e-9,
            stall_window: 5,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.mu_end > 0.0
            && self.mu_start >= self.mu_end
            && self.mu_factor > 0.0
            && self.mu_factor < 1.0
            && self.rel_tol > 0.0
            && self.stall_window > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "invalid solver options {self:?}"
            )))
        }
    }
}

/// The affine set of locally unbiased `(X₁, X₂)` in Hermitian coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Chart {
    d: usize,
    rows: [Vec<f64>; 3],
    base: [DVector<f64>; 2],
    null: DMatrix<f64>,
}

impl Chart {
    pub(crate) fn new(problem: &EstimationProblem) -> Result<Self> {
        let d = problem.dim();
        let n = d * d;
        let rows = [
            linalg::hermitian_coords(problem.rho().matrix()),
            linalg::hermitian_coords(problem.drho()[0].matrix()),
            linalg::hermitian_coords(problem.drho()[1].matrix()),
        ];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

        let gram = Matrix3::from_fn(|i, j| dot(&rows[i], &rows[j]));
        let gram_inv = gram.try_inverse().ok_or(Error::Infeasible)?;

        // Orthonormal basis of the row space; dependent rows mean infeasibility.
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(3);
        for r in &rows {
            let mut v = r.clone();
            for _ in 0..2 {
                for u in &q {
                    let p = dot(u, &v);
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm <= 1e-10 * dot(r, r).sqrt().max(f64::MIN_POSITIVE) {
                return Err(Error::Infeasible);
            }
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
        }

        // Greedy completion: repeatedly take the standard basis vector with
        // the largest residual after projecting out everything chosen so far.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 3);
        while basis.len() < n - 3 {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for k in 0..n {
                let mut v = vec![0.0; n];
                v[k] = 1.0;
                for _ in 0..2 {
                    for u in q.iter().chain(basis.iter()) {
                        let p = dot(u, &v);
                        v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
                    }
                }
                let norm = dot(&v, &v).sqrt();
                if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                    best = Some((norm, v));
                }
            }
            let (norm, mut v) = best.expect("n > 0");
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
        let null = DMatrix::from_fn(n, n - 3, |i, j| basis[j][i]);

        let a = DMatrix::from_fn(3, n, |i, j| rows[i][j]);
        let particular = |b: Vector3<f64>| {
            let y = gram_inv * b;
            DVector::from_iterator(n, (0..n).map(|j| (0..3).map(|i| a[(i, j)] * y[i]).sum()))
        };
        let base = [
            particular(Vector3::new(0.0, 1.0, 0.0)),
            particular(Vector3::new(0.0, 0.0, 1.0)),
        ];
        Ok(Self {
            d,
            rows,
            base,
            null,
        })
    }

    pub(crate) fn reduced_dim(&self) -> usize {
        2 * self.null.ncols()
    }

    fn block(&self) -> usize {
        self.null.ncols()
    }

    pub(crate) fn point(&self, z: &DVector<f64>) -> [CMatrix; 2] {
        let m = self.block();
        let mut out = Vec::with_capacity(2);
        for j in 0..2 {
            let zj = z.rows(j * m, m);
            let x = &self.base[j] + &self.null * zj;
            out.push(linalg::hermitian_from_coords(self.d, x.as_slice()));
        }
        let x2 = out.pop().expect("two blocks");
        let x1 = out.pop().expect("two blocks");
        [x1, x2]
    }

    /// Orthogonal projection of `(X₁, X₂)` onto the chart coordinates.
    pub(crate) fn reduce(&self, x: &[CMatrix; 2]) -> DVector<f64> {
        let m = self.block();
        let mut z = DVector::zeros(2 * m);
        for j in 0..2 {
            let xj = DVector::from_vec(linalg::hermitian_coords(&x[j]));
            let zj = self.null.transpose() * (xj - &self.base[j]);
            z.rows_mut(j * m, m).copy_from(&zj);
        }
        z
    }

    /// Chart gradient from matrix gradients `Mⱼ` with `df = Σ Tr[Mⱼ dXⱼ]`.
    pub(crate) fn pull_back(&self, g: &[CMatrix; 2]) -> DVector<f64> {
        let m = self.block();
        let mut out = DVector::zeros(2 * m);
        for j in 0..2 {
            let gj = DVector::from_vec(linalg::hermitian_coords(&g[j]));
            out.rows_mut(j * m, m)
                .copy_from(&(self.null.transpose() * gj));
        }
        out
    }

    /// Largest violation of the locally unbiased conditions at `x`.
    pub(crate) fn residual(&self, x: &[CMatrix; 2]) -> f64 {
        let mut worst = 0.0f64;
        for (j, xj) in x.iter().enumerate() {
            let coords = linalg::hermitian_coords(xj);
            for (i, row) in self.rows.iter().enumerate() {
                let target = if i == j + 1 { 1.0 } else { 0.0 };
                let v: f64 = row.iter().zip(&coords).map(|(a, b)| a * b).sum();
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// Objective with a smoothed surrogate and its exact nonsmooth value.
pub(crate) trait Objective: Sync {
    /// Smoothed value and matrix gradients `(M₁, M₂)`.
    fn smoothed(&self, x: &[CMatrix; 2], mu: f64) -> (f64, [CMatrix; 2]);
    fn exact(&self, x: &[CMatrix; 2]) -> f64;
}

/// Shared quadratic part `Tr[W Re Z]` with `Zᵢⱼ = Tr[ρXᵢXⱼ]`.
struct Quadratic<'a> {
    rho: &'a CMatrix,
    w: &'a Matrix2<f64>,
}

impl Quadratic<'_> {
    fn eval(&self, x: &[CMatrix; 2]) -> (f64, C64Pair, [CMatrix; 2]) {
        let p1 = self.rho * &x[0];
        let p2 = self.rho * &x[1];
        let z11 = (&p1 * &x[0]).trace().re;
        let z22 = (&p2 * &x[1]).trace().re;
        let z12 = (&p1 * &x[1]).trace();
        let w = self.w;
        let value = w[(0, 0)] * z11 + w[(1, 1)] * z22 + 2.0 * w[(0, 1)] * z12.re;
        let a1 = &p1 + p1.adjoint();
        let a2 = &p2 + p2.adjoint();
        let g1 = a1.scale(w[(0, 0)]) + a2.scale(w[(0, 1)]);
        let g2 = a2.scale(w[(1, 1)]) + a1.scale(w[(0, 1)]);
        (value, (z12.re, z12.im), [g1, g2])
    }
}

type C64Pair = (f64, f64);

type ValueAndGradient<'a> = dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + 'a;

fn times_i(a: &CMatrix) -> CMatrix {
    a.map(|z| z * c(0.0, 1.0))
}

/// `Tr[W Re Z] + √det W · TrAbs(i√ρ[X₁,X₂]√ρ)`.
pub(crate) struct NagaokaObjective {
    rho: CMatrix,
    sqrt_rho: CMatrix,
    w: Matrix2<f64>,
    s: f64,
}

impl NagaokaObjective {
    pub(crate) fn new(problem: &EstimationProblem, w: Matrix2<f64>) -> Self {
        Self {
            rho: problem.rho().matrix().clone(),
            sqrt_rho: problem.rho().sqrt().into_inner(),
            s: w.determinant().max(0.0).sqrt(),
            w,
        }
    }
}

impl Objective for NagaokaObjective {
    fn smoothed(&self, x: &[CMatrix; 2], mu: f64) -> (f64, [CMatrix; 2]) {
        let quad = Quadratic {
            rho: &self.rho,
            w: &self.w,
        };
        let (q, _, [g1, g2]) = quad.eval(x);
        let comm = linalg::commutator(&x[0], &x[1]);
        let h = HermitianMatrix::from_hermitian_part(
            &(&self.sqrt_rho * times_i(&comm) * &self.sqrt_rho),
        );
        let es = h.eigen();
        let mut abs = 0.0;
        let mut slope = Vec::with_capacity(es.values.len());
        for &l in &es.values {
            let r = l.hypot(mu);
            abs += r;
            slope.push(l / r);
        }
        let g = es.compose(&slope);
        let k = &self.sqrt_rho * g * &self.sqrt_rho;
        let m1 = g1 + times_i(&linalg::commutator(&x[1], &k)).scale(self.s);
        let m2 = g2 + times_i(&linalg::commutator(&k, &x[0])).scale(self.s);
        (q + self.s * abs, [m1, m2])
    }

    fn exact(&self, x: &[CMatrix; 2]) -> f64 {
        let quad = Quadratic {
            rho: &self.rho,
            w: &self.w,
        };
        let (q, _, _) = quad.eval(x);
        q + self.s * linalg::trabs_commutator_sqrt(&self.sqrt_rho, &x[0], &x[1])
    }
}

/// `Tr[W Re Z] + 2√det W · |Im Z₁₂|`.
pub(crate) struct HolevoObjective {
    rho: CMatrix,
    w: Matrix2<f64>,
    s: f64,
}

impl HolevoObjective {
    pub(crate) fn new(problem: &EstimationProblem, w: Matrix2<f64>) -> Self {
        Self {
            rho: problem.rho().matrix().clone(),
            s: w.determinant().max(0.0).sqrt(),
            w,
        }
    }
}

impl Objective for HolevoObjective {
    fn smoothed(&self, x: &[CMatrix; 2], mu: f64) -> (f64, [CMatrix; 2]) {
        let quad = Quadratic {
            rho: &self.rho,
            w: &self.w,
        };
        let (q, (_, im), [g1, g2]) = quad.eval(x);
        let r = im.hypot(mu);
        let k = 2.0 * self.s * im / r;
        // ∂ Im Z₁₂ = Tr[(i/2)[ρ,X₂] dX₁] + Tr[(i/2)[X₁,ρ] dX₂]
        let d1 = times_i(&linalg::commutator(&self.rho, &x[1])).scale(0.5 * k);
        let d2 = times_i(&linalg::commutator(&x[0], &self.rho)).scale(0.5 * k);
        (q + 2.0 * self.s * r, [g1 + d1, g2 + d2])
    }

    fn exact(&self, x: &[CMatrix; 2]) -> f64 {
        let quad = Quadratic {
            rho: &self.rho,
            w: &self.w,
        };
        let (q, (_, im), _) = quad.eval(x);
        q + 2.0 * self.s * im.abs()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: [CMatrix; 2],
    pub value: f64,
    pub iterations: usize,
    pub final_mu: f64,
    pub gradient_norm: f64,
    pub history_len: usize,
    pub constraint_residual: f64,
}

/// Minimises `obj` over the chart from `z0`, with smoothing scaled by `scale`.
pub(crate) fn minimize(
    chart: &Chart,
    obj: &dyn Objective,
    z0: DVector<f64>,
    scale: f64,
    opts: &SolverOptions,
) -> Result<Minimum> {
    opts.validate()?;
    debug_assert_eq!(z0.len(), chart.reduced_dim());
    let mut z = z0;
    let mut iterations = 0usize;
    let mut history_len = 0usize;
    let mut best = {
        let x = chart.point(&z);
        (obj.exact(&x), z.clone())
    };
    let mut mu = opts.mu_start;
    let (gradient_norm, final_mu) = loop {
        let mu_abs = mu * scale;
        let eval = |z: &DVector<f64>| {
            let x = chart.point(z);
            let (f, g) = obj.smoothed(&x, mu_abs);
            (f, chart.pull_back(&g))
        };
        let stage = bfgs_stage(
            &eval,
            z,
            opts,
            opts.max_iterations.saturating_sub(iterations),
            scale,
        )?;
        iterations += stage.iterations;
        history_len += stage.iterations + 1;
        z = stage.z;
        let exact = obj.exact(&chart.point(&z));
        if exact <= best.0 {
            best = (exact, z.clone());
        }
        if !stage.converged {
            let x = chart.point(&z);
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: stage.gradient_norm,
                constraint_residual: chart.residual(&x),
            });
        }
        if mu <= opts.mu_end * (1.0 + 1e-12) {
            break (stage.gradient_norm, mu);
        }
        mu = (mu * opts.mu_factor).max(opts.mu_end);
    };
    let x = chart.point(&best.1);
    Ok(Minimum {
        constraint_residual: chart.residual(&x),
        value: best.0,
        x,
        iterations,
        final_mu,
        gradient_norm,
        history_len,
    })
}

struct Stage {
    z: DVector<f64>,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
}

fn bfgs_stage(
    eval: &ValueAndGradient<'_>,
    z0: DVector<f64>,
    opts: &SolverOptions,
    budget: usize,
    scale: f64,
) -> Result<Stage> {
    let n = z0.len();
    let mut z = z0;
    let (mut f, mut g) = eval(&z);
    if n == 0 {
        return Ok(Stage {
            z,
            iterations: 0,
            gradient_norm: 0.0,
            converged: true,
        });
    }
    if !f.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            gradient_norm: g.norm(),
            constraint_residual: 0.0,
        });
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut stalled = 0usize;
    let grad_floor = 1e-14 * scale.max(1e-300);
    for it in 0..budget {
        let gn = g.norm();
        if gn <= grad_floor {
            return Ok(Stage {
                z,
                iterations: it,
                gradient_norm: gn,
                converged: true,
            });
        }
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = -gn * gn;
        }
        let t0 = if first { (scale / gn).min(1.0) } else { 1.0 };
        let Some((t, f_new, g_new)) = wolfe_search(eval, &z, f, slope, &dir, t0) else {
            // No further decrease is representable: the stage has converged.
            return Ok(Stage {
                z,
                iterations: it,
                gradient_norm: gn,
                converged: true,
            });
        };
        let s = &dir * t;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if first {
                h *= sy / y.dot(&y);
                first = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let rel = (f - f_new).abs() / f.abs().max(1e-300);
        z += s;
        f = f_new;
        g = g_new;
        if rel < opts.rel_tol {
            stalled += 1;
            if stalled >= opts.stall_window {
                return Ok(Stage {
                    z,
                    iterations: it + 1,
                    gradient_norm: g.norm(),
                    converged: true,
                });
            }
        } else {
            stalled = 0;
        }
    }
    Ok(Stage {
        gradient_norm: g.norm(),
        z,
        iterations: budget,
        converged: false,
    })
}

/// Weak Wolfe line search by bracketing and bisection.
fn wolfe_search(
    eval: &ValueAndGradient<'_>,
    z: &DVector<f64>,
    f0: f64,
    slope0: f64,
    dir: &DVector<f64>,
    t0: f64,
) -> Option<(f64, f64, DVector<f64>)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut t = t0;
    let mut fallback: Option<(f64, f64, DVector<f64>)> = None;
    for _ in 0..80 {
        let (f, g) = eval(&(z + dir * t));
        if !f.is_finite() || f > f0 + C1 * t * slope0 {
            hi = t;
        } else {
            let better = fallback.as_ref().is_none_or(|(_, fb, _)| f < *fb);
            if g.dot(dir) < C2 * slope0 {
                if f < f0 && better {
                    fallback = Some((t, f, g));
                }
                lo = t;
            } else {
                return Some((t, f, g));
            }
        }
        t = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * lo
        };
        if hi.is_finite() && hi - lo <= 1e-16 * hi {
            break;
        }
    }
    fallback.filter(|(_, f, _)| *f < f0)
}
