//! Estimation problems and their quantum Fisher information descriptors.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianMatrix, C64, PSD_FLOOR};

/// Tolerance on `Tr ρ = 1` and on `Tr ∂ᵢρ = 0`.
pub const TRACE_TOL: f64 = 1e-10;
/// Default support threshold on `λⱼ + λₖ` when building SLDs.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Largest kernel-kernel weight of `∂ᵢρ` that is silently discarded.
pub const KERNEL_WEIGHT_TOL: f64 = 1e-6;
/// c̃ values within this distance beyond [0, 1] are clamped.
pub const C_TILDE_CLAMP: f64 = 1e-9;

/// A unit-trace positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(m: HermitianMatrix) -> Result<Self> {
        let trace = m.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace {
                trace,
                tolerance: TRACE_TOL,
            });
        }
        let min = m.eigen().min();
        if min < -PSD_FLOOR {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                floor: PSD_FLOOR,
            });
        }
        Ok(Self(m))
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn sqrt(&self) -> HermitianMatrix {
        // Validated PSD at construction.
        linalg::psd_sqrt(&self.0).expect("density matrix is PSD")
    }
}

impl std::ops::Deref for DensityMatrix {
    type Target = HermitianMatrix;
    fn deref(&self) -> &HermitianMatrix {
        &self.0
    }
}

/// A state `ρ_θ` together with its two parameter derivatives at the reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationProblem {
    rho: DensityMatrix,
    drho: [HermitianMatrix; 2],
}

impl EstimationProblem {
    pub fn new(rho: DensityMatrix, d1: HermitianMatrix, d2: HermitianMatrix) -> Result<Self> {
        let d = rho.dim();
        for (index, m) in [&d1, &d2].into_iter().enumerate() {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: m.dim(),
                });
            }
            let trace = m.trace();
            if trace.abs() > TRACE_TOL {
                return Err(Error::DerivativeNotTraceless {
                    index: index + 1,
                    trace,
                    tolerance: TRACE_TOL,
                });
            }
        }
        Ok(Self {
            rho,
            drho: [d1, d2],
        })
    }

    pub fn from_matrices(rho: CMatrix, d1: CMatrix, d2: CMatrix) -> Result<Self> {
        Self::new(
            DensityMatrix::from_matrix(rho)?,
            HermitianMatrix::new(d1)?,
            HermitianMatrix::new(d2)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn drho(&self) -> &[HermitianMatrix; 2] {
        &self.drho
    }

    /// New problem with derivatives `∂'ᵢ = Σⱼ Aᵢⱼ ∂ⱼ`. The QFI transforms as `A 𝓕 Aᵀ`.
    pub fn reparameterized(&self, a: &Matrix2<f64>) -> EstimationProblem {
        let mix = |i: usize| {
            let m = self.drho[0].matrix().map(|z| z * a[(i, 0)])
                + self.drho[1].matrix().map(|z| z * a[(i, 1)]);
            HermitianMatrix::from_hermitian_part(&m)
        };
        EstimationProblem {
            rho: self.rho.clone(),
            drho: [mix(0), mix(1)],
        }
    }

    pub fn is_full_rank(&self) -> bool {
        self.rho.eigen().min() > PSD_FLOOR
    }
}

/// SLD operators, solving `∂ᵢρ = (ρLᵢ + Lᵢρ)/2` on the support of ρ.
///
/// Entries across pairs of eigenvectors whose eigenvalue sum is at most
/// `rank_tol` are set to zero.
pub fn sld_operators(problem: &EstimationProblem, rank_tol: f64) -> Result<[HermitianMatrix; 2]> {
    if rank_tol <= 0.0 {
        return Err(Error::Validation(format!(
            "rank_tol must be positive, got {rank_tol}"
        )));
    }
    let es = problem.rho().eigen();
    let u = &es.vectors;
    let lam = &es.values;
    let d = problem.dim();
    let mut out = Vec::with_capacity(2);
    for (index, drho) in problem.drho().iter().enumerate() {
        let dd = u.adjoint() * drho.matrix() * u;
        let mut l = CMatrix::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                let denom = lam[j] + lam[k];
                if denom > rank_tol {
                    l[(j, k)] = dd[(j, k)] * (2.0 / denom);
                } else if dd[(j, k)].norm() > KERNEL_WEIGHT_TOL {
                    return Err(Error::UnsupportedDerivative {
                        index: index + 1,
                        weight: dd[(j, k)].norm(),
                    });
                }
            }
        }
        out.push(HermitianMatrix::from_hermitian_part(&(u * l * u.adjoint())));
    }
    let l2 = out.pop().expect("two SLDs");
    let l1 = out.pop().expect("two SLDs");
    Ok([l1, l2])
}

/// `Re Tr[ρ Aᵢ Aⱼ]` as a symmetric 2x2 matrix.
pub(crate) fn rho_gram(rho: &CMatrix, ops: &[HermitianMatrix; 2]) -> Matrix2<f64> {
    let g = |i: usize, j: usize| linalg::trace_re(&(rho * ops[i].matrix() * ops[j].matrix()));
    let off = 0.5 * (g(0, 1) + g(1, 0));
    Matrix2::new(g(0, 0), off, off, g(1, 1))
}

/// SLD quantum Fisher information `𝓕ᵢⱼ = Re Tr[ρ Lᵢ Lⱼ]`.
pub fn sld_qfi(problem: &EstimationProblem) -> Result<Matrix2<f64>> {
    let slds = sld_operators(problem, DEFAULT_RANK_TOL)?;
    Ok(rho_gram(problem.rho().matrix(), &slds))
}

/// RLD quantum Fisher information, `(𝓕_R)ᵢⱼ = Tr[ρ Lⱼᴿ (Lᵢᴿ)†]` with `Lⱼᴿ = ρ⁻¹∂ⱼρ`.
pub fn rld_qfi(problem: &EstimationProblem) -> Result<Matrix2<C64>> {
    let es = problem.rho().eigen();
    if es.min() <= PSD_FLOOR {
        return Err(Error::RldUndefined {
            min_eigenvalue: es.min(),
        });
    }
    let inv_vals: Vec<f64> = es.values.iter().map(|l| 1.0 / l).collect();
    let rho_inv = es.compose(&inv_vals);
    let d = problem.drho();
    // Tr[ρ ρ⁻¹∂ⱼρ ∂ᵢρ ρ⁻¹] = Tr[∂ⱼρ ∂ᵢρ ρ⁻¹]
    let entry = |i: usize, j: usize| (d[j].matrix() * d[i].matrix() * &rho_inv).trace();
    let f11 = c(entry(0, 0).re, 0.0);
    let f22 = c(entry(1, 1).re, 0.0);
    let f12 = 0.5 * (entry(0, 1) + entry(1, 0).conj());
    Ok(Matrix2::new(f11, f12, f12.conj(), f22))
}

fn c_tilde_from(
    sqrt_rho: &CMatrix,
    slds: &[HermitianMatrix; 2],
    qfi: &Matrix2<f64>,
) -> Result<f64> {
    let (f11, f22) = (qfi[(0, 0)], qfi[(1, 1)]);
    if !(f11 > 0.0 && f22 > 0.0) || (f11 * f22).sqrt() <= 1e-300 {
        return Err(Error::UndefinedCoefficient { f11, f22 });
    }
    let num = linalg::trabs_commutator_sqrt(sqrt_rho, slds[0].matrix(), slds[1].matrix());
    let value = num / (2.0 * (f11 * f22).sqrt());
    if !(-C_TILDE_CLAMP..=1.0 + C_TILDE_CLAMP).contains(&value) {
        return Err(Error::CoefficientOutOfRange { value });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Incompatibility coefficient `c̃ = Tr|√ρ[L₁,L₂]√ρ| / (2√(𝓕₁₁𝓕₂₂))`.
pub fn incompatibility(problem: &EstimationProblem) -> Result<f64> {
    QfiData::compute(problem, DEFAULT_RANK_TOL)?.c_tilde()
}

/// SLDs, 𝓕, 𝓕_R and c̃ computed from one eigendecomposition of ρ.
#[derive(Debug, Clone)]
pub struct QfiData {
    pub slds: [HermitianMatrix; 2],
    pub qfi: Matrix2<f64>,
    /// Present when ρ is full rank.
    pub rld_qfi: Option<Matrix2<C64>>,
    c_tilde: std::result::Result<f64, Error>,
    pub rank_tol: f64,
}

impl QfiData {
    pub fn compute(problem: &EstimationProblem, rank_tol: f64) -> Result<Self> {
        let slds = sld_operators(problem, rank_tol)?;
        let qfi = rho_gram(problem.rho().matrix(), &slds);
        let min_eig =
            linalg::HermitianMatrix::from_hermitian_part(&CMatrix::from_fn(2, 2, |i, j| {
                c(qfi[(i, j)], 0.0)
            }))
            .eigen()
            .min();
        if min_eig < -1e-9 * (1.0 + qfi.trace().abs()) {
            return Err(Error::NotPsd {
                min_eigenvalue: min_eig,
                floor: 1e-9,
            });
        }
        let rld_qfi = rld_qfi(problem).ok();
        let c_tilde = c_tilde_from(problem.rho().sqrt().matrix(), &slds, &qfi);
        Ok(Self {
            slds,
            qfi,
            rld_qfi,
            c_tilde,
            rank_tol,
        })
    }

    /// c̃, or the reason it is undefined (vanishing diagonal QFI entry).
    pub fn c_tilde(&self) -> Result<f64> {
        self.c_tilde.clone()
    }
}
