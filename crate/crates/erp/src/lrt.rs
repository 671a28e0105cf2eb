use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::design::{DesignMatrix, Ols};
use crate::error::{ErpError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LrtResult {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
    pub rss0: f64,
    pub rss1: f64,
    pub n: usize,
}

/// Indicator columns for every subject but the first; the intercept
/// carries the first subject.
pub fn subject_dummies(subjects: &[String]) -> Vec<(String, Vec<f64>)> {
    let mut ids: Vec<&String> = Vec::new();
    for s in subjects {
        if !ids.contains(&s) {
            ids.push(s);
        }
    }
    ids.iter()
        .skip(1)
        .map(|id| {
            let col = subjects.iter().map(|s| if s == *id { 1.0 } else { 0.0 }).collect();
            (format!("subject[{id}]"), col)
        })
        .collect()
}

fn with_subjects(d: &DesignMatrix, dummies: &[(String, Vec<f64>)]) -> Result<DesignMatrix> {
    let refs: Vec<(&str, &[f64])> = dummies.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    d.with_columns(&refs)
}

/// Likelihood-ratio comparison of nested Gaussian linear models, each
/// augmented with per-subject intercepts: chi2 = n ln(RSS0 / RSS1) on
/// (columns of d1 - columns of d0) degrees of freedom.
pub fn lrt_compare(y: &[f64], d0: &DesignMatrix, d1: &DesignMatrix, subjects: &[String]) -> Result<LrtResult> {
    let n = y.len();
    for (what, rows) in [("d0", d0.rows()), ("d1", d1.rows()), ("subject ids", subjects.len())] {
        if rows != n {
            return Err(ErpError::Config(format!("{what} has {rows} rows for {n} observations")));
        }
    }
    for (j, name) in d0.names.iter().enumerate() {
        let k = d1
            .column_index(name)
            .ok_or_else(|| ErpError::NotNested(format!("'{name}' is in the smaller design only")))?;
        let same = d0.values.column(j).iter().zip(d1.values.column(k).iter()).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        if !same {
            return Err(ErpError::NotNested(format!("column '{name}' differs between the designs")));
        }
    }
    if d1.cols() == d0.cols() {
        return Err(ErpError::NotNested("the designs are identical".into()));
    }
    let dummies = subject_dummies(subjects);
    let (x0, x1) = (with_subjects(d0, &dummies)?, with_subjects(d1, &dummies)?);
    let rss0 = Ols::new(&x0)?.rss(&x0, y);
    let rss1 = Ols::new(&x1)?.rss(&x1, y);
    let df = d1.cols() - d0.cols();
    let chi2 = (n as f64 * (rss0 / rss1).ln()).max(0.0);
    let p = ChiSquared::new(df as f64)
        .map_err(|e| ErpError::Config(e.to_string()))?
        .sf(chi2);
    Ok(LrtResult { chi2, df, p, rss0, rss1, n })
}

/// One-sample Kolmogorov-Smirnov test of `xs` against U(0, 1). Returns the
/// statistic and its asymptotic p value (with the small-sample correction
/// `sqrt(n) + 0.12 + 0.11 / sqrt(n)`).
pub fn ks_uniform(xs: &[f64]) -> (f64, f64) {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_table_values() {
        // classical asymptotic critical values
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_q(1.224) - 0.10).abs() < 5e-4);
    }

    #[test]
    fn ks_statistic_by_hand() {
        // ecdf steps at .1 .4 .9: largest gap is 2/3 - .4
        let (d, _) = ks_uniform(&[0.9, 0.1, 0.4]);
        assert!((d - 0.2666666666666667).abs() < 1e-12);
        let (_, p) = ks_uniform(&vec![0.99; 50]);
        assert!(p < 1e-10);
    }

    #[test]
    fn dummies_skip_first_subject() {
        let s: Vec<String> = ["a", "b", "a", "c"].iter().map(|x| x.to_string()).collect();
        let d = subject_dummies(&s);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0], ("subject[b]".to_string(), vec![0.0, 1.0, 0.0, 0.0]));
        assert_eq!(d[1].1, vec![0.0, 0.0, 0.0, 1.0]);
    }
}
