//! The acceptance suite: twelve end-to-end checks with pinned tolerances
//! and wall-clock budgets. Shared by the integration tests and the CLI
//! `selftest` command.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8};
use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, SymmetricEigen};
use rayon::prelude::*;

use crate::bounds::{
    envelope_from_weighted_bound, hcrb_general, log_ratio_weight_grid, ncrb, ncrb_general,
    ncrb_qubit, sld_crb, SolverOptions, WeightMatrix,
};
use crate::error::Result;
use crate::luwang::{lwb, lwb_numeric, lwur_slack, LwurSpec, CLOSED_FORM_SWITCH};
use crate::measurement::{classical_fisher, regret_report_with, Povm, DEFAULT_P_TOL};
use crate::model::{incompatibility, sld_qfi, QfiData, DEFAULT_RANK_TOL};
use crate::randomgen::{
    random_fullrank_povm, random_problem, random_pure_problem, random_rank1_povm, SeededRng,
};
use crate::scenarios::{
    equal_bounds_problem, rotations_problem, rotations_reference, RotationsConfig,
};

pub const CRITERIA: usize = 12;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
    pub limitation: Option<Limitation>,
}

/// A criterion whose threshold cannot be met, with a substitute claim that
/// was checked in its place.
#[derive(Debug, Clone)]
pub struct Limitation {
    pub reason: &'static str,
    pub explained: bool,
}

impl Outcome {
    /// Failed, and not covered by a verified limitation.
    pub fn is_unexpected_failure(&self) -> bool {
        !self.passed && !self.limitation.as_ref().is_some_and(|l| l.explained)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {:<34} {:>8.2}s / {:>4}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )?;
        if let Some(l) = &self.limitation {
            let status = if l.explained {
                "verified"
            } else {
                "NOT verified"
            };
            write!(f, "  [known limitation, {status}: {}]", l.reason)?;
        }
        Ok(())
    }
}

struct Check {
    ok: bool,
    notes: Vec<String>,
    explained: Option<bool>,
}

impl Check {
    fn new() -> Self {
        Self {
            ok: true,
            notes: Vec::new(),
            explained: None,
        }
    }

    fn require(&mut self, cond: bool, note: String) {
        if !cond {
            self.ok = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

const NAMES: [&str; CRITERIA] = [
    "rotations closed forms",
    "finite-gap example",
    "infinite-gap example",
    "incompatible-parameter equality",
    "equal-bounds family",
    "random-problem ordering",
    "random rank-1 measurements",
    "projective-Z golden value",
    "matrix-inequality suite",
    "ordering suite",
    "envelope equivalence",
    "convexity and KKT suite",
];

/// On qubits c~ = sqrt(1 - corr^2), where corr is the SLD information
/// correlation. The uncertainty relation loosens at first order in corr while
/// the Nagaoka bound moves at second order, so the normalized gap grows like
/// sqrt(2(1 - c~)) and reaches about 4.5e-2 at c~ = 0.999.
const LIMITATIONS: [(usize, &str); 1] = [(
    6,
    "qubit normalized gap scales as sqrt(2(1-c~)), up to 4.5e-2 for c~ > 0.999; \
     checked instead: no ordering violations and gap <= sqrt(2(1-c~)) on every band instance",
)];

const BUDGETS_S: [u64; CRITERIA] = [60, 60, 60, 10, 120, 600, 300, 60, 60, 300, 60, 60];

/// Runs criterion `id` (1-based).
pub fn run(id: usize) -> Outcome {
    assert!((1..=CRITERIA).contains(&id), "criterion id out of range");
    let start = Instant::now();
    let result: Result<Check> = match id {
        1 => rotations_closed_forms(),
        2 => finite_gap(),
        3 => infinite_gap(),
        4 => incompatible_equality(&ncrb_qubit),
        5 => equal_bounds(),
        6 => random_problem_ordering(),
        7 => random_measurements(),
        8 => projective_z(),
        9 => matrix_inequalities(),
        10 => ordering_suite(),
        11 => envelope_equivalence(),
        12 => convexity_and_kkt(),
        _ => unreachable!(),
    };
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(BUDGETS_S[id - 1]);
    let (mut passed, mut detail, explained) = match result {
        Ok(check) => (
            check.ok,
            check.notes.join("; "),
            check.explained.unwrap_or(false),
        ),
        Err(e) => (false, format!("error: {e}"), false),
    };
    let mut explained = explained;
    if elapsed > budget {
        passed = false;
        explained = false;
        detail.push_str("; FAILED runtime budget exceeded");
    }
    let limitation = LIMITATIONS
        .iter()
        .find(|(i, _)| *i == id)
        .map(|&(_, reason)| Limitation { reason, explained });
    Outcome {
        id,
        name: NAMES[id - 1],
        passed,
        detail,
        elapsed,
        budget,
        limitation,
    }
}

pub fn run_all() -> Vec<Outcome> {
    (1..=CRITERIA).map(run).collect()
}

fn rotations_closed_forms() -> Result<Check> {
    let mut grid = Vec::new();
    for &r in &[0.3, 0.5, 0.8, 1.0] {
        for &th in &[FRAC_PI_6, FRAC_PI_4, FRAC_PI_3] {
            for &ph in &[0.0, FRAC_PI_8, FRAC_PI_4] {
                grid.push(RotationsConfig::new(r, th, ph)?);
            }
        }
    }
    let opts = SolverOptions::default();
    let rows: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|cfg| {
            let p = rotations_problem(cfg);
            let refv = rotations_reference(cfg);
            let w = WeightMatrix::identity();
            let n = rel(ncrb_general(&p, &w, &opts)?.value, refv.ncrb);
            let h = if cfg.r < 1.0 {
                rel(hcrb_general(&p, &w, &opts)?.value, refv.hcrb)
            } else {
                0.0
            };
            let reference_c = refv.c_tilde.unwrap_or(f64::NAN);
            let c = (incompatibility(&p)? - reference_c).abs();
            Ok((n, h, c))
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let (n, h, c) = (max(|r| r.0), max(|r| r.1), max(|r| r.2));
    let mut check = Check::new();
    check.require(rows.len() == 36, format!("{} grid points", rows.len()));
    check.require(n <= 1e-5, format!("ncrb max rel {n:.1e} <= 1e-5"));
    check.require(h <= 1e-5, format!("hcrb max rel {h:.1e} <= 1e-5"));
    check.require(c <= 1e-9, format!("c~ max abs {c:.1e} <= 1e-9"));
    Ok(check)
}

fn lwb_of(problem: &crate::model::EstimationProblem) -> Result<crate::luwang::LwbResult> {
    let data = QfiData::compute(problem, DEFAULT_RANK_TOL)?;
    Ok(lwb(&LwurSpec::from_qfi(&data)?))
}

fn finite_gap() -> Result<Check> {
    let mut check = Check::new();
    let mut worst: f64 = 0.0;
    for &r in &[0.25, 0.5, 1.0] {
        let p = rotations_problem(&RotationsConfig::new(r, FRAC_PI_4, FRAC_PI_4)?);
        let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
        let numeric = lwb_numeric(&LwurSpec::from_qfi(&data)?).value;
        worst = worst.max(rel(numeric, 4.0 / (r * r)));
    }
    check.require(
        worst <= 1e-8,
        format!("numeric lwb = 4/r^2 max rel {worst:.1e} <= 1e-8"),
    );

    let p = rotations_problem(&RotationsConfig::new(0.5, FRAC_PI_4, FRAC_PI_4)?);
    let w = WeightMatrix::identity();
    let opts = SolverOptions::default();
    let got = [
        sld_crb(&sld_qfi(&p)?, &w),
        ncrb_general(&p, &w, &opts)?.value,
        hcrb_general(&p, &w, &opts)?.value,
        lwb_of(&p)?.value,
    ];
    let sqrt2 = std::f64::consts::SQRT_2;
    let expected = [12.0, 4.0 * (1.0 + sqrt2).powi(2), 12.0 + 4.0 * sqrt2, 16.0];
    let dev = got
        .iter()
        .zip(&expected)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    check.require(
        dev <= 1e-6,
        format!(
            "(sld, ncrb, hcrb, lwb) = ({:.7}, {:.7}, {:.7}, {:.7}), max abs dev {dev:.1e} <= 1e-6",
            got[0], got[1], got[2], got[3]
        ),
    );
    Ok(check)
}

fn infinite_gap() -> Result<Check> {
    let mut check = Check::new();
    let opts = SolverOptions::default();
    let w = WeightMatrix::identity();
    let mut all_infinite = true;
    let mut worst: f64 = 0.0;
    for &(r, ph) in &[(1.0, FRAC_PI_4), (1.0, FRAC_PI_3), (0.5, FRAC_PI_6)] {
        let p = rotations_problem(&RotationsConfig::new(r, FRAC_PI_2, ph)?);
        all_infinite &= ncrb_general(&p, &w, &opts)?.is_infinite();
        all_infinite &= hcrb_general(&p, &w, &opts)?.is_infinite();
        all_infinite &= sld_crb(&sld_qfi(&p)?, &w).is_infinite();
        let expected = 1.0 / (r * r * ph.sin().powi(2)) + 1.0 / (r * r * ph.cos().powi(2));
        worst = worst.max(rel(lwb_of(&p)?.value, expected));
    }
    check.require(all_infinite, "ncrb, hcrb, sldcrb all +inf".into());
    check.require(worst <= 1e-8, format!("lwb max rel {worst:.1e} <= 1e-8"));
    Ok(check)
}

/// With the parameters rotated so that the SLD information is diagonal,
/// the Lu–Wang and Nagaoka bounds coincide on qubits.
fn incompatible_equality(ncrb_fn: &dyn Fn(&Matrix2<f64>, &WeightMatrix) -> f64) -> Result<Check> {
    let mut worst_c: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let p = random_problem(2, &mut SeededRng::new(4, k))?;
        let f = sld_qfi(&p)?;
        let a = SymmetricEigen::new(f).eigenvectors.transpose();
        let q = p.reparameterized(&a);
        let data = QfiData::compute(&q, DEFAULT_RANK_TOL)?;
        worst_c = worst_c.max((data.c_tilde()? - 1.0).abs());
        let n = ncrb_fn(&data.qfi, &WeightMatrix::identity());
        let lw = lwb(&LwurSpec::from_qfi(&data)?).value;
        worst = worst.max(rel(lw, n));
    }
    let mut check = Check::new();
    check.require(
        worst_c <= 1e-9,
        format!("|c~ - 1| max {worst_c:.1e} <= 1e-9"),
    );
    check.require(
        worst <= 1e-8,
        format!("|ncrb - lwb|/ncrb max {worst:.1e} <= 1e-8"),
    );
    Ok(check)
}

fn equal_bounds() -> Result<Check> {
    let opts = SolverOptions::default();
    let rows: Vec<(usize, f64, f64, f64)> = (2..=5usize)
        .into_par_iter()
        .map(|d| {
            let (p, expected) = equal_bounds_problem(d)?;
            let n = ncrb_general(&p, &WeightMatrix::identity(), &opts)?.value;
            let lw = lwb_of(&p)?.value;
            let c = (incompatibility(&p)? - 1.0).abs();
            Ok((d, rel(n, expected), rel(lw, expected), c))
        })
        .collect::<Result<_>>()?;
    let mut check = Check::new();
    for (d, n, lw, c) in rows {
        check.require(
            n <= 1e-4 && lw <= 1e-4 && c <= 1e-9,
            format!("d={d}: ncrb rel {n:.1e}, lwb rel {lw:.1e}, |c~-1| {c:.1e}"),
        );
    }
    Ok(check)
}

fn random_problem_ordering() -> Result<Check> {
    let opts = SolverOptions::default();
    let mut check = Check::new();
    let mut explained = true;
    for d in [2usize, 3] {
        let rows: Vec<(f64, f64, f64)> = (0..1000u64)
            .into_par_iter()
            .map(|k| {
                let p = random_problem(d, &mut SeededRng::new(600 + d as u64, k))?;
                let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
                let c = data.c_tilde()?;
                let n = ncrb(&p, &WeightMatrix::identity(), &opts)?.value;
                let lw = lwb(&LwurSpec::from_qfi(&data)?).value;
                Ok((c, n, lw))
            })
            .collect::<Result<_>>()?;
        let violations = rows
            .iter()
            .filter(|(_, n, lw)| *lw > n * (1.0 + 1e-7))
            .count();
        let high: Vec<(f64, f64)> = rows
            .iter()
            .filter(|(c, _, _)| *c > 0.999)
            .map(|(c, n, lw)| (*c, (n - lw) / n))
            .collect();
        let worst_high = high.iter().map(|h| h.1).fold(0.0, f64::max);
        let ratio = high
            .iter()
            .map(|(c, g)| g / (2.0 * (1.0 - c)).sqrt())
            .fold(0.0, f64::max);
        check.require(
            violations == 0,
            format!("d={d}: {} draws, lwb > ncrb in {violations}", rows.len()),
        );
        check.require(
            worst_high <= 1e-2,
            format!(
                "d={d}: {} with c~>0.999, max normalized gap {worst_high:.1e} <= 1e-2",
                high.len()
            ),
        );
        if !high.is_empty() {
            check
                .notes
                .push(format!("d={d}: max gap/sqrt(2(1-c~)) {ratio:.4}"));
        }
        explained &= violations == 0 && ratio <= 1.0 + 1e-6;
    }
    check.explained = Some(explained);
    Ok(check)
}

fn random_measurements() -> Result<Check> {
    let p = rotations_problem(&RotationsConfig::new(1.0, FRAC_PI_4, FRAC_PI_4)?);
    let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
    let best = 1.0 / ncrb_qubit(&data.qfi, &WeightMatrix::identity());
    let rows: Vec<(f64, f64)> = (0..10_000u64)
        .into_par_iter()
        .map(|k| {
            let povm = random_rank1_povm(2, 3, &mut SeededRng::new(7, k))?;
            let rep = regret_report_with(&data, &p, &povm)?;
            Ok((rep.gap, rep.precision))
        })
        .collect::<Result<_>>()?;
    let min_g = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let max_p = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let low_gap_max = rows
        .iter()
        .filter(|r| r.0 < 1e-3)
        .map(|r| r.1)
        .fold(0.0, f64::max);
    let low_gap_count = rows.iter().filter(|r| r.0 < 1e-3).count();
    let mut check = Check::new();
    check.require(min_g < 1e-4, format!("min G {min_g:.2e} < 1e-4"));
    check.require(
        max_p >= 0.8 * best && max_p <= best + 1e-7,
        format!("max precision {max_p:.6} in [0.8, 1]x1/C_N = {best:.6}"),
    );
    check.require(
        low_gap_max < 0.5 * max_p,
        format!("{low_gap_count} draws with G < 1e-3, best precision {low_gap_max:.3e} < half max"),
    );
    Ok(check)
}

fn projective_z() -> Result<Check> {
    let p = rotations_problem(&RotationsConfig::new(1.0, FRAC_PI_4, FRAC_PI_4)?);
    let povm = Povm::computational_basis(2);
    let f = classical_fisher(&p, &povm, DEFAULT_P_TOL)?;
    let expected = Matrix2::new(0.5, -0.5, -0.5, 0.5);
    let dev = (f - expected).abs().max();
    let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
    let rep = regret_report_with(&data, &p, &povm)?;
    let mut check = Check::new();
    check.require(dev <= 1e-12, format!("F deviation {dev:.1e} <= 1e-12"));
    check.require(rep.gap.abs() <= 1e-9, format!("G = {:.1e}", rep.gap));
    check.require(
        rep.precision == 0.0,
        format!("precision = {}", rep.precision),
    );
    Ok(check)
}

fn matrix_inequalities() -> Result<Check> {
    let rows: Vec<(f64, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let d = 2 + (k % 2) as usize;
            let p = random_problem(d, &mut SeededRng::new(9, k))?;
            let mut rng = SeededRng::new(90, k);
            let povm = match k % 4 {
                0 | 1 => random_rank1_povm(d, d + 1, &mut rng)?,
                2 => random_rank1_povm(d, d, &mut rng)?,
                _ => random_fullrank_povm(d, 3, &mut rng)?,
            };
            let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
            let rep = regret_report_with(&data, &p, &povm)?;
            let min_eig = SymmetricEigen::new(rep.regret).eigenvalues.min();
            Ok((min_eig, rep.gap))
        })
        .collect::<Result<_>>()?;
    let min_eig = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let min_gap = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mut check = Check::new();
    check.require(
        min_eig >= -1e-8,
        format!("min eig(F_Q - F) {min_eig:.2e} >= -1e-8"),
    );
    check.require(min_gap >= -1e-9, format!("min G {min_gap:.2e} >= -1e-9"));
    Ok(check)
}

fn ordering_suite() -> Result<Check> {
    let opts = SolverOptions::default();
    let w = WeightMatrix::identity();
    let mixed: Vec<(f64, f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|k| {
            let d = 2 + (k % 2) as usize;
            let p = random_problem(d, &mut SeededRng::new(10, k))?;
            let s = sld_crb(&sld_qfi(&p)?, &w);
            let h = hcrb_general(&p, &w, &opts)?.value;
            let n = ncrb_general(&p, &w, &opts)?.value;
            Ok((s, h, n))
        })
        .collect::<Result<_>>()?;
    let violations = mixed
        .iter()
        .filter(|(s, h, n)| *s > h + 1e-7 || *h > n + 1e-7)
        .count();
    let pure: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let d = 2 + (k % 2) as usize;
            let p = random_pure_problem(d, &mut SeededRng::new(11, k))?;
            let h = hcrb_general(&p, &w, &opts)?.value;
            let n = ncrb_general(&p, &w, &opts)?.value;
            Ok(rel(h, n))
        })
        .collect::<Result<_>>()?;
    let worst = pure.iter().copied().fold(0.0, f64::max);
    let mut check = Check::new();
    check.require(
        violations == 0,
        format!(
            "{} mixed problems, {violations} ordering violations",
            mixed.len()
        ),
    );
    check.require(
        worst <= 1e-5,
        format!("pure |hcrb - ncrb|/ncrb max {worst:.1e} <= 1e-5"),
    );
    Ok(check)
}

fn envelope_equivalence() -> Result<Check> {
    let opts = SolverOptions::default();
    let grid = log_ratio_weight_grid(101, 0.9);
    let devs: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|k| {
            let p = random_problem(2, &mut SeededRng::new(12, k))?;
            let f = sld_qfi(&p)?;
            let det = f[(0, 0)] * f[(1, 1)] - f[(0, 1)] * f[(1, 0)];
            let (a, b) = (f[(1, 1)] / det, f[(0, 0)] / det);
            let curve = envelope_from_weighted_bound(
                |w| Ok(ncrb_general(&p, w, &opts)?.value),
                &grid,
                "ncrb",
            )?;
            let mut worst: f64 = 0.0;
            for &(v1, v2) in &curve.points {
                let hyp = b + 1.0 / (det * (v1 - a));
                worst = worst.max((v2 - hyp).abs() / hyp);
            }
            if curve.points.len() != grid.len() - 1 {
                worst = f64::INFINITY;
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let worst = devs.iter().copied().fold(0.0, f64::max);
    let mut check = Check::new();
    check.require(
        worst <= 1e-4,
        format!("20 problems x 101 weights, max rel deviation {worst:.2e} <= 1e-4"),
    );
    Ok(check)
}

fn convexity_and_kkt() -> Result<Check> {
    let mut rng = SeededRng::new(13, 0);
    let mut checked = 0;
    let mut worst_mid = f64::NEG_INFINITY;
    while checked < 1000 {
        let spec = LwurSpec::new(
            rng.normal().exp(),
            rng.normal().exp(),
            0.5 + 0.5 * rng.normal().tanh(),
        )?;
        let mut draw = || {
            (
                (1.0 + 2.0 * rng.normal().abs()) / spec.f11(),
                (1.0 + 2.0 * rng.normal().abs()) / spec.f22(),
            )
        };
        let (p, q) = (draw(), draw());
        if lwur_slack(p.0, p.1, &spec)? > 0.0 || lwur_slack(q.0, q.1, &spec)? > 0.0 {
            continue;
        }
        let mid = lwur_slack(0.5 * (p.0 + q.0), 0.5 * (p.1 + q.1), &spec)?;
        worst_mid = worst_mid.max(mid);
        checked += 1;
    }

    let kkt: Vec<(bool, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let d = 2 + (k % 2) as usize;
            let p = random_problem(d, &mut SeededRng::new(14, k))?;
            let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
            let spec = LwurSpec::from_qfi(&data)?;
            let c = spec.c_tilde();
            let numeric = c > CLOSED_FORM_SWITCH && c < 1.0 - CLOSED_FORM_SWITCH;
            Ok((numeric, lwb(&spec).dual.kkt_residual))
        })
        .collect::<Result<_>>()?;
    let numeric = kkt.iter().filter(|r| r.0).count();
    let worst_kkt = kkt.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut check = Check::new();
    check.require(
        worst_mid <= 1e-10,
        format!("1000 midpoints, max slack {worst_mid:.1e} <= 1e-10"),
    );
    check.require(
        worst_kkt <= 1e-9,
        format!(
            "{} optima ({numeric} numeric), max KKT residual {worst_kkt:.1e} <= 1e-9",
            kkt.len()
        ),
    );
    Ok(check)
}
