use qlimits_core::acceptance::{self, Outcome};
use qlimits_core::bounds::{log_ratio_weight_grid, UncertaintyCurve};
use qlimits_core::luwang::{lwur_boundary_curve, LwurSpec};
use qlimits_core::measurement::regret_report_with;
use qlimits_core::model::DEFAULT_RANK_TOL;
use qlimits_core::randomgen::{random_fullrank_povm, random_problem, random_rank1_povm};
use qlimits_core::scenarios::rotations_problem;
use qlimits_core::{
    envelope_from_weighted_bound, hcrb, lwb, nagaoka_curve_qubit, ncrb, sld_crb, BoundResult,
    EstimationProblem, QfiData, RotationsConfig, SeededRng, SolverOptions, WeightMatrix,
};
use rayon::prelude::*;

use crate::table::{Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CurveKind {
    Nagaoka,
    Lwur,
    SldEnvelope,
    NcrbEnvelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Rank {
    #[value(name = "1")]
    One,
    Full,
}

/// Half-width of the `ln u` range used for envelope weight grids.
const ENVELOPE_HALF_WIDTH: f64 = 3.0;

/// Decades spanned on either side of the midpoint `v₁ = 2·v_min`.
const CURVE_DECADES: f64 = 3.0;

fn method(b: &BoundResult) -> &'static str {
    if b.optimizer.is_some() {
        "solver"
    } else {
        "closed-form"
    }
}

pub fn bounds(problem: &EstimationProblem, w: &WeightMatrix) -> Result<Table, CliError> {
    let opts = SolverOptions::default();
    let data = QfiData::compute(problem, DEFAULT_RANK_TOL)?;
    let sld = sld_crb(&data.qfi, w);
    let n = ncrb(problem, w, &opts)?;
    let h = hcrb(problem, w, &opts)?;
    let (c_tilde, lw) = match LwurSpec::from_qfi(&data) {
        Ok(spec) => (spec.c_tilde(), lwb(&spec).value),
        Err(e) => {
            eprintln!("warning: Lu-Wang bound undefined: {e}");
            (f64::NAN, f64::NAN)
        }
    };
    let mut table = Table::new(&[
        "sldcrb",
        "ncrb",
        "hcrb",
        "lwb",
        "c_tilde",
        "ncrb_method",
        "ncrb_iterations",
        "ncrb_constraint_residual",
        "hcrb_method",
        "hcrb_iterations",
        "hcrb_constraint_residual",
    ]);
    table.push(vec![
        sld.into(),
        n.value.into(),
        h.value.into(),
        lw.into(),
        c_tilde.into(),
        method(&n).into(),
        n.diagnostics.iterations.into(),
        n.diagnostics.constraint_residual.into(),
        method(&h).into(),
        h.diagnostics.iterations.into(),
        h.diagnostics.constraint_residual.into(),
    ]);
    Ok(table)
}

/// Grid `v_min·(1 + 10^t)` with `t` uniform in `[-3, 3]`; the midpoint is `2·v_min`.
pub fn v1_grid(v_min: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| {
            let t = if points == 1 {
                0.0
            } else {
                -CURVE_DECADES + 2.0 * CURVE_DECADES * k as f64 / (points - 1) as f64
            };
            v_min * (1.0 + 10f64.powf(t))
        })
        .collect()
}

pub fn curve(
    problem: &EstimationProblem,
    kind: CurveKind,
    points: usize,
) -> Result<Table, CliError> {
    if points == 0 {
        return Err(CliError::Validation("points: must be at least 1".into()));
    }
    let data = QfiData::compute(problem, DEFAULT_RANK_TOL)?;
    let curve: UncertaintyCurve = match kind {
        CurveKind::Nagaoka => {
            if problem.dim() != 2 {
                return Err(CliError::Validation(format!(
                    "curve nagaoka requires dim 2, problem has dim {}",
                    problem.dim()
                )));
            }
            let finv = data
                .qfi
                .try_inverse()
                .ok_or_else(|| CliError::Solver("Fisher information is singular".into()))?;
            nagaoka_curve_qubit(&data.qfi, &v1_grid(finv[(0, 0)], points))?
        }
        CurveKind::Lwur => {
            let spec = LwurSpec::from_qfi(&data)?;
            lwur_boundary_curve(&spec, &v1_grid(1.0 / spec.f11(), points))?
        }
        CurveKind::SldEnvelope => {
            let grid = log_ratio_weight_grid(points, ENVELOPE_HALF_WIDTH);
            envelope_from_weighted_bound(|w| Ok(sld_crb(&data.qfi, w)), &grid, "sldcrb")?
        }
        CurveKind::NcrbEnvelope => {
            let opts = SolverOptions::default();
            let grid = log_ratio_weight_grid(points, ENVELOPE_HALF_WIDTH);
            envelope_from_weighted_bound(|w| Ok(ncrb(problem, w, &opts)?.value), &grid, "ncrb")?
        }
    };
    if !curve.dropped.is_empty() {
        eprintln!(
            "note: {} grid point(s) produced no boundary value: {:?}",
            curve.dropped.len(),
            curve.dropped
        );
    }
    let mut table = Table::new(&["v1", "v2"]);
    for (v1, v2) in curve.points {
        table.push(vec![v1.into(), v2.into()]);
    }
    Ok(table)
}

fn map_indices<T: Send>(count: usize, serial: bool, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    if serial {
        (0..count as u64).map(f).collect()
    } else {
        (0..count as u64).into_par_iter().map(f).collect()
    }
}

/// Returns the table and the number of instances that failed.
pub fn random_problems(
    dim: usize,
    count: usize,
    seed: u64,
    serial: bool,
) -> Result<(Table, usize), CliError> {
    if dim < 2 || count == 0 {
        return Err(CliError::Validation(format!(
            "need dim >= 2 and count >= 1, got dim {dim}, count {count}"
        )));
    }
    let opts = SolverOptions::default();
    let rows = map_indices(
        count,
        serial,
        |k| -> qlimits_core::Result<(f64, f64, f64)> {
            let p = random_problem(dim, &mut SeededRng::new(seed, k))?;
            let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
            let spec = LwurSpec::from_qfi(&data)?;
            let n = ncrb(&p, &WeightMatrix::identity(), &opts)?.value;
            Ok((spec.c_tilde(), n, lwb(&spec).value))
        },
    );
    let mut table = Table::new(&[
        "index",
        "c_tilde",
        "ncrb",
        "lwb",
        "gap_normalized",
        "status",
    ]);
    let mut failed = 0;
    for (k, row) in rows.into_iter().enumerate() {
        match row {
            Ok((c, n, lw)) => table.push(vec![
                k.into(),
                c.into(),
                n.into(),
                lw.into(),
                ((n - lw) / n).into(),
                "ok".into(),
            ]),
            Err(e) => {
                failed += 1;
                eprintln!("instance {k}: {e}");
                let nan = f64::NAN;
                table.push(vec![
                    k.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                    "failed".into(),
                ]);
            }
        }
    }
    Ok((table, failed))
}

pub struct MeasurementRun {
    pub cfg: RotationsConfig,
    pub count: usize,
    pub rank: Rank,
    pub outcomes: usize,
    pub seed: u64,
    pub serial: bool,
}

pub fn random_measurements(run: &MeasurementRun) -> Result<(Table, usize), CliError> {
    if run.count == 0 || run.outcomes < 2 {
        return Err(CliError::Validation(
            "need count >= 1 and outcomes >= 2".into(),
        ));
    }
    let p = rotations_problem(&run.cfg);
    let data = QfiData::compute(&p, DEFAULT_RANK_TOL)?;
    let c_n = ncrb(&p, &WeightMatrix::identity(), &SolverOptions::default())?.value;
    let c_lw = lwb(&LwurSpec::from_qfi(&data)?).value;
    let d = p.dim();
    let rows = map_indices(run.count, run.serial, |k| {
        let mut rng = SeededRng::new(run.seed, k);
        let povm = match run.rank {
            Rank::One => random_rank1_povm(d, run.outcomes, &mut rng)?,
            Rank::Full => random_fullrank_povm(d, run.outcomes, &mut rng)?,
        };
        regret_report_with(&data, &p, &povm)
    });
    let mut table = Table::new(&["index", "G", "precision", "F11", "F22", "F12"]);
    let nan = f64::NAN;
    table.push(vec![
        "ncrb_reference".into(),
        nan.into(),
        (1.0 / c_n).into(),
        nan.into(),
        nan.into(),
        nan.into(),
    ]);
    table.push(vec![
        "lwb_reference".into(),
        nan.into(),
        (1.0 / c_lw).into(),
        nan.into(),
        nan.into(),
        nan.into(),
    ]);
    let mut failed = 0;
    for (k, row) in rows.into_iter().enumerate() {
        let cells: Vec<Cell> = match row {
            Ok(rep) => {
                let f = rep.classical_fisher;
                vec![
                    k.into(),
                    rep.gap.into(),
                    rep.precision.into(),
                    f[(0, 0)].into(),
                    f[(1, 1)].into(),
                    f[(0, 1)].into(),
                ]
            }
            Err(e) => {
                failed += 1;
                eprintln!("draw {k}: {e}");
                vec![
                    k.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                    nan.into(),
                ]
            }
        };
        table.push(cells);
    }
    Ok((table, failed))
}

pub fn rotations(cfg: &RotationsConfig, w: &WeightMatrix) -> Result<Table, CliError> {
    bounds(&rotations_problem(cfg), w)
}

pub fn selftest(only: Option<usize>) -> Result<Vec<Outcome>, CliError> {
    match only {
        Some(id) if !(1..=acceptance::CRITERIA).contains(&id) => {
            Err(CliError::Validation(format!(
                "criterion must be in 1..={}, got {id}",
                acceptance::CRITERIA
            )))
        }
        Some(id) => Ok(vec![acceptance::run(id)]),
        None => Ok(acceptance::run_all()),
    }
}
