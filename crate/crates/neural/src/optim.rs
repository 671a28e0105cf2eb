use serde::{Deserialize, Serialize};

use crate::{NeuralError, ParamSet, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip threshold; `f64::INFINITY` disables clipping.
    pub clip: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip: 5.0,
        }
    }
}

/// Adam with global-norm clipping. Moment buffers are created lazily to
/// match the parameter set on the first step.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    /// A non-finite gradient aborts before anything is modified.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if self.first.len() != params.len() {
            self.first = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
            self.second = self.first.clone();
        }
        let mut sq_norm = 0.0;
        for (_, name, t) in params.iter() {
            if let Some(g) = t.grad() {
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(NeuralError::NonFiniteGradient(name.to_string()));
                }
                sq_norm += g.iter().map(|x| x * x).sum::<f64>();
            }
        }
        let norm = sq_norm.sqrt();
        let scale = if norm > self.config.clip {
            self.config.clip / norm
        } else {
            1.0
        };

        self.steps += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - c.beta2.powi(self.steps as i32);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let t = params.get_mut(id);
            let Some(g) = t.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            let (m, v) = (&mut self.first[id.index()], &mut self.second[id.index()]);
            let vals = t.values_mut();
            for k in 0..vals.len() {
                let gk = g[k] * scale;
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                vals[k] -= c.learning_rate * mh / (vh.sqrt() + c.epsilon);
            }
            t.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn scalar_param(v: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("p", Tensor::vector(vec![v])).unwrap();
        ps
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut ps = scalar_param(0.3);
        let mut opt = Adam::new(AdamConfig::default());
        for _ in 0..5 {
            ps.get_mut(ps.id("p").unwrap()).grad_mut()[0] = 0.0;
            opt.step(&mut ps).unwrap();
        }
        assert_eq!(ps.get(ps.id("p").unwrap()).values(), &[0.3]);
        assert_eq!(opt.steps(), 5);
    }

    #[test]
    fn constant_positive_gradient_decreases_monotonically() {
        let mut ps = scalar_param(1.0);
        let id = ps.id("p").unwrap();
        let mut opt = Adam::new(AdamConfig::default());
        let mut prev = 1.0;
        for _ in 0..100 {
            ps.get_mut(id).grad_mut()[0] = 0.7;
            opt.step(&mut ps).unwrap();
            let now = ps.get(id).values()[0];
            assert!(now < prev);
            prev = now;
        }
        assert_eq!(ps.get(id).grad().unwrap(), &[0.0]);
    }

    #[test]
    fn clipped_update_equals_manual_clip() {
        let g = [30.0, -40.0]; // norm 50
        let mut a = ParamSet::new();
        a.add("p", Tensor::vector(vec![0.1, 0.2])).unwrap();
        let mut b = a.clone();
        let id = a.id("p").unwrap();

        let mut clipped = Adam::new(AdamConfig::default());
        a.get_mut(id).grad_mut().copy_from_slice(&g);
        clipped.step(&mut a).unwrap();

        let mut manual = Adam::new(AdamConfig {
            clip: f64::INFINITY,
            ..AdamConfig::default()
        });
        let s = 5.0 / 50.0;
        b.get_mut(id)
            .grad_mut()
            .copy_from_slice(&[g[0] * s, g[1] * s]);
        manual.step(&mut b).unwrap();
        assert_eq!(a.get(id).values(), b.get(id).values());
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut ps = scalar_param(1.0);
        let id = ps.id("p").unwrap();
        ps.get_mut(id).grad_mut()[0] = f64::NAN;
        let err = Adam::new(AdamConfig::default()).step(&mut ps).unwrap_err();
        assert!(err.to_string().contains("`p`"));
        assert_eq!(ps.get(id).values(), &[1.0]);
    }
}
