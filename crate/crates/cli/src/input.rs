use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Matrix2;
use qlimits_core::linalg::c;
use qlimits_core::{CMatrix, DensityMatrix, EstimationProblem, HermitianMatrix, WeightMatrix};
use serde::Deserialize;

use crate::CliError;

/// On-disk problem description. Complex entries are `[re, im]` pairs, rows
/// listed in order.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    pub rho: Vec<Vec<[f64; 2]>>,
    pub drho1: Vec<Vec<[f64; 2]>>,
    pub drho2: Vec<Vec<[f64; 2]>>,
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("problem file: {e}")))
    }

    fn field(&self, name: &str, rows: &[Vec<[f64; 2]>]) -> Result<HermitianMatrix, CliError> {
        let d = self.dim;
        if rows.len() != d {
            return Err(CliError::Validation(format!(
                "{name}: expected {d} rows, found {}",
                rows.len()
            )));
        }
        let mut m = CMatrix::zeros(d, d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(CliError::Validation(format!(
                    "{name}: row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            for (j, &[re, im]) in row.iter().enumerate() {
                m[(i, j)] = c(re, im);
            }
        }
        HermitianMatrix::new(m).map_err(|e| CliError::Validation(format!("{name}: {e}")))
    }

    pub fn to_problem(&self) -> Result<EstimationProblem, CliError> {
        if self.dim < 2 {
            return Err(CliError::Validation(format!(
                "dim: must be at least 2, got {}",
                self.dim
            )));
        }
        let rho = DensityMatrix::new(self.field("rho", &self.rho)?)
            .map_err(|e| CliError::Validation(format!("rho: {e}")))?;
        let d1 = self.field("drho1", &self.drho1)?;
        let d2 = self.field("drho2", &self.drho2)?;
        EstimationProblem::new(rho, d1, d2).map_err(CliError::from)
    }
}

pub fn load_problem(path: &Path) -> Result<EstimationProblem, CliError> {
    ProblemFile::read(path)?.to_problem()
}

/// Parses an angle in radians. Accepts plain decimals and multiples or
/// fractions of pi such as `pi/4`, `3pi/4`, `-pi/2`, `2*pi/3`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t: String = s
        .chars()
        .filter(|ch| !ch.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("angle must be finite: {s}"))
        };
    }
    let Some(pos) = t.find("pi") else {
        return Err(format!("cannot parse angle {s:?}"));
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let numerator = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h
            .parse::<f64>()
            .map_err(|_| format!("cannot parse angle {s:?}"))?,
    };
    let denominator = match tail {
        "" => 1.0,
        t => t
            .strip_prefix('/')
            .and_then(|d| d.parse::<f64>().ok())
            .filter(|d| *d != 0.0)
            .ok_or_else(|| format!("cannot parse angle {s:?}"))?,
    };
    Ok(numerator * PI / denominator)
}

/// `--weight-matrix` literal `[[a, b], [b, c]]`.
pub fn parse_weight_matrix(s: &str) -> Result<WeightMatrix, CliError> {
    let rows: [[f64; 2]; 2] =
        serde_json::from_str(s).map_err(|e| CliError::Validation(format!("weight matrix: {e}")))?;
    let m = Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]);
    WeightMatrix::new(m).map_err(|e| CliError::Validation(format!("weight matrix: {e}")))
}

pub fn weight(w: f64, matrix: Option<&str>) -> Result<WeightMatrix, CliError> {
    match matrix {
        Some(s) => parse_weight_matrix(s),
        None => WeightMatrix::diag_w(w).map_err(|e| CliError::Validation(format!("weight: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_angle("2*pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("tau").is_err());
        assert!(parse_angle("inf").is_err());
    }

    #[test]
    fn weight_matrix_literal() {
        let w = parse_weight_matrix("[[2, 0.5], [0.5, 1]]").unwrap();
        assert_eq!(w.matrix()[(0, 1)], 0.5);
        assert!(parse_weight_matrix("[[1, 2], [2, 1]]").is_err());
        assert!(parse_weight_matrix("[1, 2]").is_err());
    }

    #[test]
    fn field_errors_name_the_field() {
        let text = r#"{"dim": 2,
            "rho": [[[0.5,0],[0,0]],[[0,0],[0.5,0]]],
            "drho1": [[[1,0],[0,0.3]],[[0,0],[-1,0]]],
            "drho2": [[[0,0],[1,0]],[[1,0],[0,0]]]}"#;
        let err = ProblemFile::parse(text).unwrap().to_problem().unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("drho1:"), "{msg}");
        assert!(msg.contains("not Hermitian"), "{msg}");
    }
}
