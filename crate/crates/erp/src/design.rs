use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::epochs::EpochMeta;
use crate::error::{ErpError, Result};

pub const INTERCEPT: &str = "intercept";

/// Intercept plus mean-centred predictors, one row per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
    /// Mean removed from each column (0 for the intercept).
    pub centering: Vec<f64>,
    /// Index of the target column, if the design has one.
    pub target: Option<usize>,
}

/// Removes the mean twice so the remaining mean is at rounding level.
fn center(v: &mut [f64]) -> f64 {
    let n = v.len() as f64;
    let m1 = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= m1);
    let m2 = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= m2);
    m1 + m2
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Builds a design from raw columns; the intercept comes first.
    pub fn from_columns(columns: &[(&str, &[f64])], target: Option<&str>) -> Result<DesignMatrix> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if n == 0 {
            return Err(ErpError::Config("design needs at least one row".into()));
        }
        let mut names = vec![INTERCEPT.to_string()];
        let mut centering = vec![0.0];
        let mut values = DMatrix::from_element(n, columns.len() + 1, 1.0);
        for (j, (name, raw)) in columns.iter().enumerate() {
            if names.iter().any(|m| m == name) {
                return Err(ErpError::DuplicateColumn(name.to_string()));
            }
            if raw.len() != n {
                return Err(ErpError::RowMismatch { data: n, design: raw.len() });
            }
            let mut v = raw.to_vec();
            let mean = center(&mut v);
            let scale = raw.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
            if v.iter().all(|x| x.abs() <= 1e-12 * scale) {
                return Err(ErpError::ConstantColumn(name.to_string()));
            }
            values.set_column(j + 1, &DVector::from_vec(v));
            names.push(name.to_string());
            centering.push(mean);
        }
        let target = match target {
            Some(t) => Some(names.iter().position(|m| m == t).ok_or_else(|| ErpError::MissingColumn(t.into()))?),
            None => None,
        };
        Ok(DesignMatrix {
            names,
            values,
            centering,
            target,
        })
    }

    /// Rows `rows` of the raw columns, re-centred.
    pub fn subset(&self, rows: &[usize]) -> Result<DesignMatrix> {
        let cols: Vec<(String, Vec<f64>)> = (1..self.cols())
            .map(|j| {
                let raw = rows.iter().map(|&r| self.values[(r, j)] + self.centering[j]).collect();
                (self.names[j].clone(), raw)
            })
            .collect();
        let refs: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        let target = self.target.map(|t| self.names[t].as_str());
        DesignMatrix::from_columns(&refs, target)
    }

    /// Appends raw columns (centred) after the existing ones.
    pub fn with_columns(&self, extra: &[(&str, &[f64])]) -> Result<DesignMatrix> {
        let mut out = self.clone();
        for (name, raw) in extra {
            if out.names.iter().any(|m| m == name) {
                return Err(ErpError::DuplicateColumn(name.to_string()));
            }
            if raw.len() != out.rows() {
                return Err(ErpError::RowMismatch {
                    data: out.rows(),
                    design: raw.len(),
                });
            }
            let mut v = raw.to_vec();
            let mean = center(&mut v);
            let j = out.cols();
            out.values = out.values.insert_column(j, 0.0);
            out.values.set_column(j, &DVector::from_vec(v));
            out.names.push(name.to_string());
            out.centering.push(mean);
        }
        Ok(out)
    }
}

/// Intercept, then the control columns, then the target (when given), all
/// taken from the metadata's numeric columns.
pub fn build_design(meta: &EpochMeta, target: Option<&str>, controls: &[&str]) -> Result<DesignMatrix> {
    let mut cols: Vec<(&str, &[f64])> = Vec::new();
    for name in controls.iter().copied().chain(target) {
        if cols.iter().any(|(n, _)| *n == name) {
            return Err(ErpError::DuplicateColumn(name.to_string()));
        }
        let v = meta.column(name).ok_or_else(|| ErpError::MissingColumn(name.to_string()))?;
        cols.push((name, v));
    }
    if meta.is_empty() {
        return Err(ErpError::Config("no epochs".into()));
    }
    if cols.is_empty() {
        let ones = vec![1.0; meta.len()];
        return Ok(DesignMatrix {
            names: vec![INTERCEPT.into()],
            values: DMatrix::from_column_slice(ones.len(), 1, &ones),
            centering: vec![0.0],
            target: None,
        });
    }
    DesignMatrix::from_columns(&cols, target)
}

/// Seeded uniform row permutation.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

/// Permutes rows jointly across every column: row `i` of the result is
/// row `perm[i]` of `d`.
pub fn permute_design(d: &DesignMatrix, seed: u64) -> DesignMatrix {
    let perm = permutation(d.rows(), seed);
    DesignMatrix {
        values: d.values.select_rows(perm.iter()),
        ..d.clone()
    }
}

/// Least-squares solver for one design, via the Cholesky factor of the
/// Gram matrix.
#[derive(Debug, Clone)]
pub struct Ols {
    /// `(X'X)^-1 X'`, predictors x rows.
    pub pinv: DMatrix<f64>,
}

impl Ols {
    pub fn new(d: &DesignMatrix) -> Result<Ols> {
        check_rank(d)?;
        let x = &d.values;
        let gram = x.transpose() * x;
        let chol = gram
            .cholesky()
            .ok_or_else(|| ErpError::RankDeficient {
                column: d.names.last().cloned().unwrap_or_default(),
                with: d.names[..d.cols() - 1].to_vec(),
            })?;
        Ok(Ols {
            pinv: chol.solve(&x.transpose()),
        })
    }

    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        (&self.pinv * DVector::from_column_slice(y)).iter().copied().collect()
    }

    /// Residual sum of squares of `y` under design `d`.
    pub fn rss(&self, d: &DesignMatrix, y: &[f64]) -> f64 {
        let yv = DVector::from_column_slice(y);
        let fitted = &d.values * (&self.pinv * &yv);
        (yv - fitted).norm_squared()
    }
}

const COLLINEAR: f64 = 1e-10;

/// Incremental Cholesky of the Gram matrix. A column whose squared residual
/// after projecting onto the earlier columns is below `COLLINEAR` times its
/// squared norm is reported along with the columns that explain it.
fn check_rank(d: &DesignMatrix) -> Result<()> {
    let p = d.cols();
    if d.rows() < p {
        return Err(ErpError::RankDeficient {
            column: d.names[d.rows()..].join(", "),
            with: vec![format!("only {} rows for {p} columns", d.rows())],
        });
    }
    let g = d.values.transpose() * &d.values;
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        for i in 0..j {
            let s: f64 = (0..i).map(|k| l[(j, k)] * l[(i, k)]).sum();
            l[(j, i)] = (g[(j, i)] - s) / l[(i, i)];
        }
        let r = g[(j, j)] - (0..j).map(|k| l[(j, k)].powi(2)).sum::<f64>();
        if r <= COLLINEAR * g[(j, j)] {
            let sub = g.view((0, 0), (j, j)).into_owned();
            let rhs = g.view((0, j), (j, 1)).into_owned();
            let coef = sub.cholesky().map(|c| c.solve(&rhs));
            let with = match coef {
                Some(c) => (0..j)
                    .filter(|&k| c[k].abs() > 1e-8)
                    .map(|k| d.names[k].clone())
                    .collect(),
                None => d.names[..j].to_vec(),
            };
            return Err(ErpError::RankDeficient {
                column: d.names[j].clone(),
                with,
            });
        }
        l[(j, j)] = r.sqrt();
    }
    Ok(())
}
