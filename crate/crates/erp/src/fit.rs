use crate::design::{DesignMatrix, Ols};
use crate::epochs::EpochSet;
use crate::error::{ErpError, Result};

/// Per-(channel, timepoint) least-squares fit.
#[derive(Debug, Clone)]
pub struct PointwiseFit {
    pub names: Vec<String>,
    pub n_channels: usize,
    pub n_times: usize,
    /// Predictor-major: `betas[k][c * n_times + t]`.
    pub betas: Vec<Vec<f64>>,
    /// Residual sum of squares per cell.
    pub rss: Vec<f64>,
    /// Lag-1 autocorrelation of the residuals across consecutive epochs,
    /// averaged over cells.
    pub ar1: f64,
}

impl PointwiseFit {
    pub fn beta(&self, c: usize, t: usize, k: usize) -> f64 {
        self.betas[k][c * self.n_times + t]
    }

    /// Fitted-value residuals of epoch `i`, one per cell.
    pub fn residuals(&self, e: &EpochSet, d: &DesignMatrix, i: usize) -> Vec<f64> {
        let mut r = e.epoch(i).to_vec();
        for (k, b) in self.betas.iter().enumerate() {
            let x = d.values[(i, k)];
            r.iter_mut().zip(b).for_each(|(r, b)| *r -= x * b);
        }
        r
    }
}

/// `out += a * x`.
pub(crate) fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    out.iter_mut().zip(x).for_each(|(o, x)| *o += a * x);
}

pub fn fit_pointwise(e: &EpochSet, d: &DesignMatrix) -> Result<PointwiseFit> {
    if e.n_epochs() != d.rows() {
        return Err(ErpError::RowMismatch {
            data: e.n_epochs(),
            design: d.rows(),
        });
    }
    let ols = Ols::new(d)?;
    let cells = e.epoch_len();
    let mut betas = vec![vec![0.0; cells]; d.cols()];
    for i in 0..e.n_epochs() {
        let y = e.epoch(i);
        for (k, b) in betas.iter_mut().enumerate() {
            axpy(b, ols.pinv[(k, i)], y);
        }
    }
    let mut fit = PointwiseFit {
        names: d.names.clone(),
        n_channels: e.n_channels,
        n_times: e.n_times,
        betas,
        rss: vec![0.0; cells],
        ar1: 0.0,
    };
    let mut lag = vec![0.0; cells];
    let mut prev: Option<Vec<f64>> = None;
    for i in 0..e.n_epochs() {
        let r = fit.residuals(e, d, i);
        axpy_sq(&mut fit.rss, &r);
        if let Some(p) = &prev {
            lag.iter_mut().zip(p.iter().zip(&r)).for_each(|(l, (a, b))| *l += a * b);
        }
        prev = Some(r);
    }
    let rhos: Vec<f64> = lag
        .iter()
        .zip(&fit.rss)
        .filter(|(_, &s)| s > 0.0)
        .map(|(l, s)| l / s)
        .collect();
    fit.ar1 = if rhos.is_empty() { 0.0 } else { rhos.iter().sum::<f64>() / rhos.len() as f64 };
    Ok(fit)
}

fn axpy_sq(out: &mut [f64], r: &[f64]) {
    out.iter_mut().zip(r).for_each(|(o, r)| *o += r * r);
}
