//! The Lu–Wang uncertainty relation and the bound obtained by minimising
//! `v₁ + v₂` over the region it allows.
//!
//! With `γⱼ = 1/(vⱼ𝓕ⱼⱼ)`, `x = √(1−γ₁)`, `y = √(1−γ₂)` and `c̃ = sin τ`, the
//! relation reads `x² + 2 cos τ · xy + y² ≥ sin²τ`. Its lower-left boundary is
//! traced exactly by `x = sin t`, `y = sin(τ − t)` for `t ∈ [0, τ]`, along
//! which `v₁ + v₂ = 1/(𝓕₁₁cos²t) + 1/(𝓕₂₂cos²(τ−t))` is convex in `t`.

use crate::bounds::UncertaintyCurve;
use crate::error::{Error, Result};
use crate::model::QfiData;

/// c̃ this close to 0 or 1 uses the corresponding closed form.
pub const CLOSED_FORM_SWITCH: f64 = 1e-12;
const GAMMA_SLACK: f64 = 1e-12;

/// Inputs of the relation: diagonal SLD information entries and c̃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LwurSpec {
    f11: f64,
    f22: f64,
    c_tilde: f64,
}

impl LwurSpec {
    pub fn new(f11: f64, f22: f64, c_tilde: f64) -> Result<Self> {
        if !(f11 > 0.0 && f22 > 0.0) || !f11.is_finite() || !f22.is_finite() {
            return Err(Error::Validation(format!(
                "diagonal Fisher entries must be positive and finite (f11 = {f11}, f22 = {f22})"
            )));
        }
        if !(0.0..=1.0).contains(&c_tilde) {
            return Err(Error::CoefficientOutOfRange { value: c_tilde });
        }
        Ok(Self { f11, f22, c_tilde })
    }

    pub fn from_qfi(data: &QfiData) -> Result<Self> {
        Self::new(data.qfi[(0, 0)], data.qfi[(1, 1)], data.c_tilde()?)
    }

    pub fn f11(&self) -> f64 {
        self.f11
    }

    pub fn f22(&self) -> f64 {
        self.f22
    }

    pub fn c_tilde(&self) -> f64 {
        self.c_tilde
    }

    fn gammas(&self, v1: f64, v2: f64) -> Result<(f64, f64)> {
        let g1 = 1.0 / (v1 * self.f11);
        let g2 = 1.0 / (v2 * self.f22);
        for (j, g, f) in [(1, g1, self.f11), (2, g2, self.f22)] {
            if !(g >= 0.0) || g > 1.0 + GAMMA_SLACK {
                return Err(Error::Domain(format!(
                    "v{j} is below the single-parameter bound 1/F{j}{j} = {}",
                    1.0 / f
                )));
            }
        }
        Ok((g1.min(1.0), g2.min(1.0)))
    }
}

/// `γ₁ + γ₂ − 2√(1−c̃²)√((1−γ₁)(1−γ₂)) − (2 − c̃²)`; the pair is allowed iff ≤ 0.
pub fn lwur_slack(v1: f64, v2: f64, spec: &LwurSpec) -> Result<f64> {
    let (g1, g2) = spec.gammas(v1, v2)?;
    let c = spec.c_tilde;
    let s = (1.0 - c * c).max(0.0).sqrt();
    Ok(g1 + g2 - 2.0 * s * ((1.0 - g1) * (1.0 - g2)).sqrt() - (2.0 - c * c))
}

/// Constraints of the minimisation that hold with equality at the optimum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActiveSet {
    pub lwur: bool,
    pub gamma1: bool,
    pub gamma2: bool,
}

/// Multipliers for (relation, `γ₁ ≤ 1`, `γ₂ ≤ 1`) and the KKT residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualCertificate {
    pub multipliers: [f64; 3],
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LwbResult {
    pub value: f64,
    pub optimizer: (f64, f64),
    pub active: ActiveSet,
    pub dual: DualCertificate,
}

fn check_positive(f11: f64, f22: f64) -> Result<()> {
    if f11 > 0.0 && f22 > 0.0 && f11.is_finite() && f22.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "Fisher entries must be positive and finite (f11 = {f11}, f22 = {f22})"
        )))
    }
}

/// Bound for fully incompatible parameters (c̃ = 1): `(1/√𝓕₁₁ + 1/√𝓕₂₂)²`.
pub fn lwb_closed_c1(f11: f64, f22: f64) -> Result<f64> {
    check_positive(f11, f22)?;
    Ok((1.0 / f11.sqrt() + 1.0 / f22.sqrt()).powi(2))
}

/// Bound for compatible parameters (c̃ = 0): `1/𝓕₁₁ + 1/𝓕₂₂`.
pub fn lwb_closed_c0(f11: f64, f22: f64) -> Result<f64> {
    check_positive(f11, f22)?;
    Ok(1.0 / f11 + 1.0 / f22)
}

/// Minimum of `v₁ + v₂` over the region allowed by the relation.
pub fn lwb(spec: &LwurSpec) -> LwbResult {
    let (f11, f22) = (spec.f11, spec.f22);
    if spec.c_tilde >= 1.0 - CLOSED_FORM_SWITCH {
        let total = 1.0 / f11.sqrt() + 1.0 / f22.sqrt();
        let v = (total / f11.sqrt(), total / f22.sqrt());
        finish(spec, v)
    } else if spec.c_tilde <= CLOSED_FORM_SWITCH {
        finish(spec, (1.0 / f11, 1.0 / f22))
    } else {
        lwb_numeric(spec)
    }
}

/// [`lwb`] by boundary search, without the closed-form shortcuts.
pub fn lwb_numeric(spec: &LwurSpec) -> LwbResult {
    let (f11, f22) = (spec.f11, spec.f22);
    let tau = spec.c_tilde.clamp(0.0, 1.0).asin();
    let t = minimize_on_boundary(f11, f22, tau);
    let v1 = 1.0 / (f11 * t.cos().powi(2));
    let v2 = 1.0 / (f22 * (tau - t).cos().powi(2));
    finish(spec, (v1, v2))
}

/// Root of `h'(t)` on `[0, τ]` by bisection, polished with Newton steps.
fn minimize_on_boundary(f11: f64, f22: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let dh = |t: f64| {
        let (s1, c1) = t.sin_cos();
        let (s2, c2) = (tau - t).sin_cos();
        2.0 * s1 / (f11 * c1.powi(3)) - 2.0 * s2 / (f22 * c2.powi(3))
    };
    let d2h = |t: f64| {
        let sec2 = |u: f64| 1.0 / u.cos().powi(2);
        let term = |u: f64, f: f64| 2.0 * sec2(u) * (sec2(u) + 2.0 * u.tan().powi(2)) / f;
        term(t, f11) + term(tau - t, f22)
    };
    let (mut lo, mut hi) = (0.0, tau);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dh(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = dh(t) / d2h(t);
        let next = t - step;
        if !(next.is_finite() && (0.0..=tau).contains(&next)) {
            break;
        }
        if dh(next).abs() < dh(t).abs() {
            t = next;
        } else {
            break;
        }
    }
    t
}

fn finish(spec: &LwurSpec, v: (f64, f64)) -> LwbResult {
    let (active, dual) = kkt(spec, v);
    LwbResult {
        value: v.0 + v.1,
        optimizer: v,
        active,
        dual,
    }
}

/// Constraint values and gradients with respect to `(v₁, v₂)`.
fn constraints(spec: &LwurSpec, v: (f64, f64)) -> [(f64, Option<[f64; 2]>); 3] {
    let g1 = 1.0 / (v.0 * spec.f11);
    let g2 = 1.0 / (v.1 * spec.f22);
    let x = (1.0 - g1).max(0.0).sqrt();
    let y = (1.0 - g2).max(0.0).sqrt();
    let c = spec.c_tilde;
    let s = (1.0 - c * c).max(0.0).sqrt();
    let slack = c * c - x * x - y * y - 2.0 * s * x * y;
    // d(slack)/dvⱼ = −(x + s·y)/x · γ₁/v₁ and symmetrically; undefined at x = 0.
    let lwur_grad =
        (x > 1e-8 && y > 1e-8).then(|| [-(x + s * y) / x * g1 / v.0, -(y + s * x) / y * g2 / v.1]);
    [
        (slack, lwur_grad),
        (g1 - 1.0, Some([-g1 / v.0, 0.0])),
        (g2 - 1.0, Some([0.0, -g2 / v.1])),
    ]
}

/// Smallest KKT residual over the subsets of (numerically) active constraints.
fn kkt(spec: &LwurSpec, v: (f64, f64)) -> (ActiveSet, DualCertificate) {
    const ACTIVE_TOL: f64 = 1e-9;
    let cons = constraints(spec, v);
    let feasibility = cons.iter().map(|(g, _)| g.max(0.0)).fold(0.0, f64::max);
    let mut best = (ActiveSet::default(), [0.0; 3], f64::INFINITY);
    for mask in 0u8..8 {
        let members: Vec<usize> = (0..3).filter(|k| mask & (1 << k) != 0).collect();
        if members
            .iter()
            .any(|&k| cons[k].0.abs() > ACTIVE_TOL || cons[k].1.is_none())
        {
            continue;
        }
        let grads: Vec<[f64; 2]> = members
            .iter()
            .map(|&k| cons[k].1.expect("checked"))
            .collect();
        let Some(lambda) = nonnegative_least_squares(&grads) else {
            continue;
        };
        let mut r = [1.0, 1.0];
        for (l, g) in lambda.iter().zip(&grads) {
            r[0] += l * g[0];
            r[1] += l * g[1];
        }
        let complementarity = members
            .iter()
            .zip(&lambda)
            .map(|(&k, l)| (l * cons[k].0).abs())
            .fold(0.0, f64::max);
        let residual = r[0].hypot(r[1]).max(complementarity).max(feasibility);
        if residual < best.2 {
            let mut multipliers = [0.0; 3];
            for (&k, l) in members.iter().zip(&lambda) {
                multipliers[k] = *l;
            }
            let active = ActiveSet {
                lwur: mask & 1 != 0,
                gamma1: mask & 2 != 0,
                gamma2: mask & 4 != 0,
            };
            best = (active, multipliers, residual);
        }
    }
    (
        best.0,
        DualCertificate {
            multipliers: best.1,
            kkt_residual: best.2,
        },
    )
}

/// `λ ≥ 0` minimising `‖(1,1) + Σ λₖ gₖ‖`, for at most three gradients in the plane.
fn nonnegative_least_squares(grads: &[[f64; 2]]) -> Option<Vec<f64>> {
    let n = grads.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let target = [-1.0, -1.0];
    let residual = |lambda: &[f64], idx: &[usize]| {
        let mut r = [-target[0], -target[1]];
        for (l, &k) in lambda.iter().zip(idx) {
            r[0] += l * grads[k][0];
            r[1] += l * grads[k][1];
        }
        r[0].hypot(r[1])
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    // Enumerate supports of size one and two; exact in two dimensions.
    for a in 0..n {
        let g = grads[a];
        let gg = g[0] * g[0] + g[1] * g[1];
        if gg > 0.0 {
            let l = (g[0] * target[0] + g[1] * target[1]) / gg;
            if l >= 0.0 {
                let mut lambda = vec![0.0; n];
                lambda[a] = l;
                let r = residual(&[l], &[a]);
                if best.as_ref().is_none_or(|(b, _)| r < *b) {
                    best = Some((r, lambda));
                }
            }
        }
        for b in (a + 1)..n {
            let h = grads[b];
            let det = g[0] * h[1] - g[1] * h[0];
            if det.abs() <= 1e-300 {
                continue;
            }
            let la = (target[0] * h[1] - target[1] * h[0]) / det;
            let lb = (g[0] * target[1] - g[1] * target[0]) / det;
            if la >= 0.0 && lb >= 0.0 {
                let mut lambda = vec![0.0; n];
                lambda[a] = la;
                lambda[b] = lb;
                let r = residual(&[la, lb], &[a, b]);
                if best.as_ref().is_none_or(|(bst, _)| r < *bst) {
                    best = Some((r, lambda));
                }
            }
        }
    }
    best.map(|(_, l)| l)
}

/// Boundary of the allowed region over a grid of `v₁` values.
///
/// For each `v₁` the quadratic in `y = √(1−γ₂)` is solved and roots are kept
/// only if they satisfy the relation with equality on substitution; the
/// smallest `v₂` wins. Grid points with no finite boundary value are dropped.
pub fn lwur_boundary_curve(spec: &LwurSpec, v1_grid: &[f64]) -> Result<UncertaintyCurve> {
    if v1_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::Validation(
            "v1 grid must be strictly increasing".into(),
        ));
    }
    let c = spec.c_tilde;
    let s = (1.0 - c * c).max(0.0).sqrt();
    let mut points = Vec::with_capacity(v1_grid.len());
    let mut dropped = Vec::new();
    for (k, &v1) in v1_grid.iter().enumerate() {
        let g1 = 1.0 / (v1 * spec.f11);
        if !(g1 <= 1.0 + GAMMA_SLACK) {
            return Err(Error::Domain(format!(
                "v1 = {v1} is below the single-parameter bound {}",
                1.0 / spec.f11
            )));
        }
        let x = (1.0 - g1).max(0.0).sqrt();
        // y² + 2s·x·y + (x² − c̃²) = 0
        let disc = (s * s * x * x - (x * x - c * c)).max(0.0).sqrt();
        let mut candidates: Vec<f64> = [-s * x - disc, -s * x + disc]
            .into_iter()
            .filter(|&y| (0.0..1.0).contains(&y))
            .filter(|&y| {
                let v2 = 1.0 / (spec.f22 * (1.0 - y * y));
                lwur_slack(v1, v2, spec).is_ok_and(|r| r.abs() <= 1e-10)
            })
            .collect();
        if x >= c {
            // The relation holds with γ₂ = 1: the boundary is the box edge.
            candidates.push(0.0);
        }
        let best = candidates.into_iter().fold(f64::INFINITY, |acc, y| {
            acc.min(1.0 / (spec.f22 * (1.0 - y * y)))
        });
        if best.is_finite() {
            points.push((v1, best));
        } else {
            dropped.push(k);
        }
    }
    Ok(UncertaintyCurve {
        points,
        descriptor: "lwur".into(),
        dropped,
    })
}
