//! Named estimation problems with closed-form reference values.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::linalg::{c, commutator, pauli, CMatrix, HermitianMatrix};
use crate::model::{DensityMatrix, EstimationProblem};

const SEC_GUARD: f64 = 1e-12;

/// Probe state in Bloch-sphere coordinates `(r, ϑ, φ)`, rotated about x and y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationsConfig {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl RotationsConfig {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::Validation(format!(
                "Bloch radius must lie in (0, 1], got {r}"
            )));
        }
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Validation("angles must be finite".into()));
        }
        Ok(Self { r, theta, phi })
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [self.r * st * cp, self.r * st * sp, self.r * ct]
    }
}

/// `ρ₀ = (I + n·σ)/2` with derivatives `∂ₓρ = (i/2)[ρ₀, σx]`, `∂ᵧρ = (i/2)[ρ₀, σy]`.
pub fn rotations_problem(cfg: &RotationsConfig) -> EstimationProblem {
    let [sx, sy, sz] = pauli();
    let [nx, ny, nz] = cfg.bloch_vector();
    let rho = (CMatrix::identity(2, 2) + sx.scale(nx) + sy.scale(ny) + sz.scale(nz)).scale(0.5);
    let half_i = c(0.0, 0.5);
    let dx = commutator(&rho, &sx).map(|z| z * half_i);
    let dy = commutator(&rho, &sy).map(|z| z * half_i);
    let rho = DensityMatrix::new(HermitianMatrix::from_hermitian_part(&rho))
        .expect("Bloch vector with r <= 1 is a state");
    EstimationProblem::new(
        rho,
        HermitianMatrix::from_hermitian_part(&dx),
        HermitianMatrix::from_hermitian_part(&dy),
    )
    .expect("commutators are traceless")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValues {
    /// `+∞` when the QFI is singular (`cos ϑ = 0`).
    pub ncrb: f64,
    /// Holevo bound; at `r = 1` it coincides with `ncrb` (pure state).
    pub hcrb: f64,
    /// `None` when both diagonal QFI entries cannot be normalized (ϑ = π/2 with φ ∈ {0, π/2}).
    pub c_tilde: Option<f64>,
    pub qfi: Matrix2<f64>,
    /// Only for the two configurations with a closed-form Lu–Wang bound.
    pub lwb: Option<f64>,
}

pub fn rotations_reference(cfg: &RotationsConfig) -> ReferenceValues {
    let RotationsConfig { r, theta, phi } = *cfg;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let r2 = r * r;
    let qfi = Matrix2::new(
        1.0 - cp * cp * st * st,
        -sp * cp * st * st,
        -sp * cp * st * st,
        1.0 - sp * sp * st * st,
    )
    .scale(r2);

    let (ncrb, hcrb) = if ct.abs() < SEC_GUARD {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let sec = 1.0 / ct.abs();
        (
            (1.0 + sec).powi(2) / r2,
            (1.0 + 2.0 * r * sec + sec * sec) / r2,
        )
    };

    let denom = ((ct * ct + cp * cp * st * st) * (ct * ct + sp * sp * st * st)).sqrt();
    let c_tilde = (denom > 0.0).then(|| (ct.abs() / denom).min(1.0));

    let quarter = std::f64::consts::FRAC_PI_4;
    let lwb = if (theta - quarter).abs() < 1e-12 && (phi - quarter).abs() < 1e-12 {
        Some(4.0 / r2)
    } else if ct.abs() < SEC_GUARD && (sp * cp).abs() > 0.0 {
        Some(1.0 / (r2 * sp * sp) + 1.0 / (r2 * cp * cp))
    } else {
        None
    };

    ReferenceValues {
        ncrb,
        hcrb,
        c_tilde,
        qfi,
        lwb,
    }
}

/// A `d`-dimensional problem whose Nagaoka and Lu–Wang bounds (identity
/// weight) both equal `12(2d − 1)`. Returns the problem and that value.
pub fn equal_bounds_problem(d: usize) -> Result<(EstimationProblem, f64)> {
    if d < 2 {
        return Err(Error::Validation(format!(
            "dimension must be at least 2, got {d}"
        )));
    }
    let big = 1.0 / (d as f64 - 0.5);
    let last = 1.0 - (d as f64 - 1.0) * big;
    let mut diag = vec![big; d];
    diag[d - 1] = last;
    let rho = HermitianMatrix::from_real_diagonal(&diag);

    let mut m1 = CMatrix::zeros(d, d);
    m1[(0, d - 1)] = c(1.0, 0.0);
    m1[(d - 1, 0)] = c(1.0, 0.0);
    let mut m2 = CMatrix::zeros(d, d);
    m2[(0, d - 1)] = c(0.0, -1.0);
    m2[(d - 1, 0)] = c(0.0, 1.0);

    let half_i = c(0.0, 0.5);
    let d1 = commutator(rho.matrix(), &m1).map(|z| z * half_i);
    let d2 = commutator(rho.matrix(), &m2).map(|z| z * half_i);
    let problem = EstimationProblem::new(
        DensityMatrix::new(rho)?,
        HermitianMatrix::from_hermitian_part(&d1),
        HermitianMatrix::from_hermitian_part(&d2),
    )?;
    Ok((problem, 12.0 * (2.0 * d as f64 - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::model::{incompatibility, sld_qfi};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    #[test]
    fn rejects_bad_radius() {
        assert!(RotationsConfig::new(0.0, 0.0, 0.0).is_err());
        assert!(RotationsConfig::new(1.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn derivative_at_pole() {
        for &phi in &[0.0, 1.0] {
            let p = rotations_problem(&RotationsConfig::new(0.6, 0.0, phi).unwrap());
            let expected = pauli()[1].scale(-0.3);
            assert!(frobenius(&(p.drho()[0].matrix() - expected)) < 1e-15);
        }
    }

    #[test]
    fn derivatives_traceless_and_bloch_vector() {
        let cfg = RotationsConfig::new(1.0, FRAC_PI_4, FRAC_PI_4).unwrap();
        let p = rotations_problem(&cfg);
        assert!(p.drho()[0].trace().abs() < 1e-16 && p.drho()[1].trace().abs() < 1e-16);
        let [sx, sy, sz] = pauli();
        let n: Vec<f64> = [sx, sy, sz]
            .iter()
            .map(|s| (p.rho().matrix() * s).trace().re)
            .collect();
        assert!((n[0] - 0.5).abs() < 1e-15);
        assert!((n[1] - 0.5).abs() < 1e-15);
        assert!((n[2] - SQRT_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn reference_finite_gap_configuration() {
        let refv = rotations_reference(&RotationsConfig::new(0.5, FRAC_PI_4, FRAC_PI_4).unwrap());
        assert!((refv.ncrb - 4.0 * (1.0 + SQRT_2).powi(2)).abs() < 1e-12);
        assert!((refv.ncrb - 23.3137).abs() < 1e-4);
        assert!((refv.hcrb - (12.0 + 4.0 * SQRT_2)).abs() < 1e-12);
        assert!((refv.c_tilde.unwrap() - 0.942809).abs() < 1e-6);
        assert_eq!(refv.lwb, Some(16.0));
    }

    #[test]
    fn reference_infinite_gap_configuration() {
        let refv = rotations_reference(&RotationsConfig::new(1.0, FRAC_PI_2, PI / 3.0).unwrap());
        assert!(refv.ncrb.is_infinite() && refv.hcrb.is_infinite());
        assert!((refv.lwb.unwrap() - 16.0 / 3.0).abs() < 1e-12);
        assert!(refv.c_tilde.unwrap() < 1e-12);
    }

    #[test]
    fn reference_at_pole() {
        for &r in &[0.4, 1.0] {
            let refv = rotations_reference(&RotationsConfig::new(r, 0.0, 0.7).unwrap());
            assert!((refv.c_tilde.unwrap() - 1.0).abs() < 1e-15);
            assert!((refv.ncrb - 4.0 / (r * r)).abs() < 1e-12);
            assert_eq!(refv.lwb, None);
        }
    }

    #[test]
    fn reference_matches_computed_descriptors() {
        for &r in &[0.3, 0.8, 1.0] {
            for &th in &[0.2, 1.0, 2.5] {
                for &ph in &[0.0, 0.5, 1.3] {
                    let cfg = RotationsConfig::new(r, th, ph).unwrap();
                    let p = rotations_problem(&cfg);
                    let refv = rotations_reference(&cfg);
                    let f = sld_qfi(&p).unwrap();
                    assert!((f - refv.qfi).abs().max() < 1e-12);
                    let ct = incompatibility(&p).unwrap();
                    assert!((ct - refv.c_tilde.unwrap()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn equal_bounds_construction() {
        for d in 2..=6 {
            let (p, expected) = equal_bounds_problem(d).unwrap();
            assert_eq!(expected, 12.0 * (2.0 * d as f64 - 1.0));
            let f = sld_qfi(&p).unwrap();
            let diag = 1.0 / (6.0 * d as f64 - 3.0);
            assert!((f - Matrix2::new(diag, 0.0, 0.0, diag)).abs().max() < 1e-12);
            assert!((incompatibility(&p).unwrap() - 1.0).abs() < 1e-9);
        }
        assert_eq!(equal_bounds_problem(2).unwrap().1, 36.0);
        assert_eq!(equal_bounds_problem(3).unwrap().1, 60.0);
    }
}
