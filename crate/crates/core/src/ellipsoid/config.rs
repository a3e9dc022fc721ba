//! Text specification of coefficient fields.

use serde::{Deserialize, Serialize};

use crate::ellipsoid::field::{AngleProfile, CoefficientField};
use crate::error::{Error, Result};
use crate::matcore::{EllipticityClass, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldKindSpec {
    #[default]
    Constant,
    Checkerboard,
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSpec {
    #[default]
    Linear,
    Polar,
}

/// A coefficient field as written in a configuration file:
///
/// ```toml
/// [field]
/// kind = "checkerboard"
/// n = 2
/// lambda = 1.0
/// Lambda = 2.0
/// cell = 0.25
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub kind: FieldKindSpec,
    pub n: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// Constant value; defaults to `diag(λ, …, λ, Λ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<f64>,
    /// Checkerboard values; both default to the axis-swapped diagonal pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub even: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub odd: Option<Vec<Vec<f64>>>,
    /// Rotating spectrum; defaults to `(λ, Λ, λ, …)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winding: Option<f64>,
}

impl FieldSpec {
    pub fn constant_identity(n: usize) -> Self {
        FieldSpec {
            kind: FieldKindSpec::Constant,
            n,
            lambda: 1.0,
            big_lambda: 1.0,
            matrix: None,
            cell: None,
            even: None,
            odd: None,
            eigenvalues: None,
            profile: None,
            omega: None,
            winding: None,
        }
    }

    pub fn class<T: Real>(&self) -> Result<EllipticityClass<T>> {
        EllipticityClass::new(self.n, T::lit(self.lambda), T::lit(self.big_lambda))
    }

    pub fn build<T: Real>(&self) -> Result<CoefficientField<T>> {
        let cls = self.class::<T>()?;
        let sym = |rows: &Vec<Vec<f64>>| -> Result<SymMatrix<T>> {
            let rows: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect();
            SymMatrix::from_rows(&rows)
        };
        match self.kind {
            FieldKindSpec::Constant => {
                let a = match &self.matrix {
                    Some(rows) => sym(rows)?,
                    None => {
                        let mut d = vec![cls.lambda; self.n];
                        d[self.n - 1] = cls.big_lambda;
                        SymMatrix::diag(&d)
                    }
                };
                CoefficientField::constant(cls, a)
            }
            FieldKindSpec::Checkerboard => {
                let cell = T::lit(self.cell.ok_or_else(|| Error::Config("checkerboard field needs `cell`".into()))?);
                match (&self.even, &self.odd) {
                    (Some(e), Some(o)) => CoefficientField::checkerboard(cls, cell, sym(e)?, sym(o)?),
                    (None, None) => CoefficientField::checkerboard_axes(cls, cell),
                    _ => Err(Error::Config("give both `even` and `odd` or neither".into())),
                }
            }
            FieldKindSpec::Rotating => {
                let eig = match &self.eigenvalues {
                    Some(v) => v.iter().map(|&x| T::lit(x)).collect(),
                    None => {
                        let mut v = vec![cls.lambda; self.n];
                        if self.n >= 2 {
                            v[1] = cls.big_lambda;
                        }
                        v
                    }
                };
                let profile = match self.profile.unwrap_or_default() {
                    ProfileSpec::Linear => AngleProfile::Linear {
                        omega: match &self.omega {
                            Some(w) => w.iter().map(|&x| T::lit(x)).collect(),
                            None => {
                                let mut w = vec![T::zero(); self.n];
                                w[0] = T::one();
                                w
                            }
                        },
                    },
                    ProfileSpec::Polar => AngleProfile::Polar {
                        winding: T::lit(self.winding.unwrap_or(1.0)),
                    },
                };
                CoefficientField::rotating(cls, eig, profile)
            }
        }
    }
}

/// Parses `"1,0;0,1"` (rows separated by `;`, entries by `,`).
pub fn parse_matrix_rows(s: &str) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad matrix entry {v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("matrix {s:?} is not square")));
    }
    Ok(rows)
}

pub fn parse_sym_matrix<T: Real>(s: &str) -> Result<SymMatrix<T>> {
    let rows = parse_matrix_rows(s)?;
    let rows: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect();
    SymMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_checkerboard_section() {
        let spec: FieldSpec = toml::from_str(
            r#"
            kind = "checkerboard"
            n = 2
            lambda = 1.0
            Lambda = 2.0
            cell = 0.25
            "#,
        )
        .unwrap();
        let f = spec.build::<f64>().unwrap();
        assert_eq!(f.det_target(), 2.0);
        assert_eq!(f.evaluate(&[0.1, 0.1]).unwrap(), SymMatrix::diag(&[1.0, 2.0]));
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: std::result::Result<FieldSpec, _> = toml::from_str("n = 2\nlambda = 1.0\nLambda = 1.0\ncolour = 3\n");
        assert!(r.is_err());
    }

    #[test]
    fn matrix_strings() {
        let m = parse_sym_matrix::<f64>("5,-12; -12,29").unwrap();
        assert_eq!(m[(0, 1)], -12.0);
        assert!(parse_matrix_rows("1,2;3").is_err());
        assert!(parse_sym_matrix::<f64>("1,2;3,4").is_err());
    }
}
