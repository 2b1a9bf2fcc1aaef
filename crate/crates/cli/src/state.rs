//! Density matrices given on the command line, either as a family member or
//! as a JSON file.

use std::path::Path;

use qbell::linalg::{CMat, C64};
use qbell::qstate::{family_state, Family, Operator};
use qbell::{Error, Result};
use serde::Deserialize;

/// JSON density-matrix file: `{"d": 3, "real": [[...]], "imag": [[...]]}`.
/// Rows are `d^2` long; `imag` may be omitted.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    d: usize,
    real: Vec<Vec<f64>>,
    #[serde(default)]
    imag: Option<Vec<Vec<f64>>>,
}

pub fn load_state(path: &Path) -> Result<(Operator, usize)> {
    let text = std::fs::read_to_string(path)?;
    let file: StateFile = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let d = file.d;
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let n = d * d;
    let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
    if !shape_ok(&file.real) || !file.imag.as_ref().is_none_or(shape_ok) {
        return Err(Error::Parse(format!("state matrix must be {n} x {n} for d = {d}")));
    }
    let m = CMat::from_fn(n, n, |i, j| C64::new(file.real[i][j], file.imag.as_ref().map_or(0.0, |im| im[i][j])));
    let rho = Operator::new(m);
    if !rho.is_hermitian() {
        return Err(Error::NotHermitian(qbell::linalg::hermiticity_defect(rho.matrix())));
    }
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized(tr));
    }
    if !rho.is_density_matrix() {
        return Err(Error::Parse(format!("state has negative eigenvalue {:.3e}", rho.min_eigenvalue())));
    }
    Ok((rho, d))
}

pub fn parse_params(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad parameter '{t}' in '{s}'"))))
        .collect()
}

/// The state named by either `--family/--params` or `--state`.
pub fn resolve(
    family: Option<Family>,
    params: Option<&[f64]>,
    state: Option<&Path>,
    d: Option<usize>,
) -> Result<(Operator, usize)> {
    match (family, state) {
        (Some(f), None) => {
            let p = params.ok_or_else(|| Error::Parse("--params is required with --family".into()))?;
            let d = d.unwrap_or_else(|| f.default_dimension());
            Ok((family_state(f, p, d)?, d))
        }
        (None, Some(path)) => {
            let (rho, file_d) = load_state(path)?;
            match d {
                Some(d) if d != file_d => Err(Error::DimensionMismatch { expected: file_d, got: d }),
                _ => Ok((rho, file_d)),
            }
        }
        (Some(_), Some(_)) => Err(Error::Parse("give either --family or --state, not both".into())),
        (None, None) => Err(Error::Parse("a state is required: --family with --params, or --state".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params() {
        assert_eq!(parse_params("1, -0.5,2e-1").unwrap(), vec![1.0, -0.5, 0.2]);
        assert!(parse_params("1,x").is_err());
    }

    #[test]
    fn state_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let mut real = vec![vec![0.0; 4]; 4];
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            real[i][j] = 0.5;
        }
        std::fs::write(&path, serde_json::json!({"d": 2, "real": real}).to_string()).unwrap();
        let (rho, d) = load_state(&path).unwrap();
        assert_eq!(d, 2);
        assert!((rho.min_eigenvalue()).abs() < 1e-12);

        real[0][0] = 0.7;
        std::fs::write(&path, serde_json::json!({"d": 2, "real": real}).to_string()).unwrap();
        assert!(matches!(load_state(&path), Err(Error::Unnormalized(_))));
        std::fs::write(&path, r#"{"d": 2, "real": [[1.0]]}"#).unwrap();
        assert!(matches!(load_state(&path), Err(Error::Parse(_))));
    }
}
