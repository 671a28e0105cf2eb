use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Graph, ParamSet, Result, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Step of the five-point difference stencil.
    pub step: f64,
    /// Coordinates sampled per parameter tensor (all of them if smaller).
    pub coords_per_param: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Denominator floor, so coordinates whose true gradient is near zero
    /// are judged on absolute rather than relative error.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-3,
            coords_per_param: 16,
            seed: 0,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub coords_checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compares backprop gradients of the scalar built by `loss` against the
/// fourth-order stencil `(f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h`,
/// returning the worst
/// `|analytic - numeric| / max(|analytic|, |numeric|, floor)` over the
/// sampled coordinates.
pub fn finite_diff_check<F>(params: &ParamSet, loss: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let grads = {
        let mut g = Graph::new(params);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let eval = |ps: &ParamSet| -> Result<f64> {
        let mut g = Graph::new(ps);
        let l = loss(&mut g)?;
        Ok(g.scalar(l))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        coords_checked: 0,
        tolerance: opts.tolerance,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let n = params.get(id).len();
        let analytic = grads.dense(id, n);
        let coords: Vec<usize> = if n <= opts.coords_per_param {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        for k in coords {
            let orig = params.get(id).values()[k];
            let mut at = |d: f64| -> Result<f64> {
                work.get_mut(id).values_mut()[k] = orig + d * opts.step;
                eval(&work)
            };
            let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
            work.get_mut(id).values_mut()[k] = orig;
            let numeric = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * opts.step);
            let a = analytic[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.coords_checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = params.name(id).to_string();
                report.worst_index = k;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}
