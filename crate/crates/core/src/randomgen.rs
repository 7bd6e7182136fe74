//! Seeded generators for random estimation problems and measurements.
//!
//! All randomness flows through [`SeededRng`], a ChaCha8 stream cipher keyed
//! by a 64-bit seed (expanded with `SeedableRng::seed_from_u64`, i.e. PCG32)
//! and a 64-bit stream id. Identical `(seed, stream_id)` pairs give identical
//! sequences on every platform, and distinct stream ids never overlap, so a
//! batch can hand stream `k` to instance `k` and run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianMatrix, C64};
use crate::measurement::Povm;
use crate::model::{self, DensityMatrix, EstimationProblem};

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Complex Gaussian with independent standard normal real and imaginary parts.
    pub fn complex_normal(&mut self) -> C64 {
        let re = self.normal();
        let im = self.normal();
        c(re, im)
    }

    pub fn ginibre(&mut self, rows: usize, cols: usize) -> CMatrix {
        // Row-major fill order is part of the reproducibility contract.
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.complex_normal();
            }
        }
        m
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Validation(format!(
            "dimension must be at least 2, got {d}"
        )));
    }
    Ok(())
}

/// Hilbert–Schmidt distributed density matrix `GG†/Tr[GG†]`.
pub fn random_density_hs(d: usize, rng: &mut SeededRng) -> Result<DensityMatrix> {
    check_dim(d)?;
    let g = rng.ginibre(d, d);
    let gram = &g * g.adjoint();
    let tr = linalg::trace_re(&gram);
    DensityMatrix::new(HermitianMatrix::from_hermitian_part(&gram.map(|z| z / tr)))
}

/// `(A + A†)/2` with the trace removed.
pub fn random_traceless_hermitian(d: usize, rng: &mut SeededRng) -> Result<HermitianMatrix> {
    check_dim(d)?;
    let a = rng.ginibre(d, d);
    let mut h = linalg::hermitian_part(&a);
    let shift = linalg::trace_re(&h) / d as f64;
    for i in 0..d {
        h[(i, i)] = c(h[(i, i)].re - shift, 0.0);
    }
    Ok(HermitianMatrix::from_hermitian_part(&h))
}

/// A random density matrix with two random traceless Hermitian derivatives.
pub fn random_problem(d: usize, rng: &mut SeededRng) -> Result<EstimationProblem> {
    check_dim(d)?;
    for _ in 0..MAX_REDRAWS {
        let rho = random_density_hs(d, rng)?;
        let d1 = random_traceless_hermitian(d, rng)?;
        let d2 = random_traceless_hermitian(d, rng)?;
        let Ok(problem) = EstimationProblem::new(rho, d1, d2) else {
            continue;
        };
        if model::sld_operators(&problem, model::DEFAULT_RANK_TOL).is_ok() {
            return Ok(problem);
        }
    }
    Err(Error::Generation(format!(
        "no valid problem after {MAX_REDRAWS} draws (d = {d})"
    )))
}

/// A random pure state `|ψ⟩⟨ψ|` with derivatives `|ψ⟩⟨φᵢ| + |φᵢ⟩⟨ψ|`, `φᵢ ⊥ ψ`.
pub fn random_pure_problem(d: usize, rng: &mut SeededRng) -> Result<EstimationProblem> {
    check_dim(d)?;
    let psi = rng.ginibre(d, 1);
    let psi = &psi / c(psi.norm(), 0.0);
    let rho = &psi * psi.adjoint();
    let mut tangent = || {
        let phi = rng.ginibre(d, 1);
        let overlap = (psi.adjoint() * &phi)[(0, 0)];
        let phi = phi - &psi * overlap;
        HermitianMatrix::from_hermitian_part(&(&psi * phi.adjoint() + &phi * psi.adjoint()))
    };
    let d1 = tangent();
    let d2 = tangent();
    EstimationProblem::new(
        DensityMatrix::new(HermitianMatrix::from_hermitian_part(&rho))?,
        d1,
        d2,
    )
}

/// Normalizes positive operators `Bᵢ` into a POVM `A^{-1/2} Bᵢ A^{-1/2}`, `A = Σ Bᵢ`.
/// Returns `None` when `A` is numerically singular.
fn normalize_effects(parts: Vec<CMatrix>) -> Option<Vec<HermitianMatrix>> {
    let d = parts[0].nrows();
    let total = parts.iter().fold(CMatrix::zeros(d, d), |acc, b| acc + b);
    let total = HermitianMatrix::from_hermitian_part(&total);
    let es = total.eigen();
    if es.min() <= 1e-12 {
        return None;
    }
    let inv_sqrt: Vec<f64> = es.values.iter().map(|l| 1.0 / l.sqrt()).collect();
    let s = es.compose(&inv_sqrt);
    Some(
        parts
            .iter()
            .map(|b| HermitianMatrix::from_hermitian_part(&(&s * b * &s)))
            .collect(),
    )
}

/// `m` rank-1 effects built from Gaussian kets.
pub fn random_rank1_povm(d: usize, m: usize, rng: &mut SeededRng) -> Result<Povm> {
    check_dim(d)?;
    if m < d {
        return Err(Error::Validation(format!(
            "rank-1 POVM needs m >= d outcomes (m = {m}, d = {d})"
        )));
    }
    for _ in 0..MAX_REDRAWS {
        let parts: Vec<CMatrix> = (0..m)
            .map(|_| {
                let psi = rng.ginibre(d, 1);
                &psi * psi.adjoint()
            })
            .collect();
        if let Some(effects) = normalize_effects(parts) {
            return Povm::new(effects);
        }
    }
    Err(Error::Generation(format!(
        "frame operator singular in {MAX_REDRAWS} consecutive draws"
    )))
}

/// `m` full-rank effects built from Gaussian Gram matrices.
pub fn random_fullrank_povm(d: usize, m: usize, rng: &mut SeededRng) -> Result<Povm> {
    check_dim(d)?;
    if m < 2 {
        return Err(Error::Validation(format!(
            "POVM needs at least 2 outcomes, got {m}"
        )));
    }
    for _ in 0..MAX_REDRAWS {
        let parts: Vec<CMatrix> = (0..m)
            .map(|_| {
                let g = rng.ginibre(d, d);
                &g * g.adjoint()
            })
            .collect();
        if let Some(effects) = normalize_effects(parts) {
            return Povm::new(effects);
        }
    }
    Err(Error::Generation(format!(
        "frame operator singular in {MAX_REDRAWS} consecutive draws"
    )))
}
