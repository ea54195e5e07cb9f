use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Conditioning, Transition};
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyDims {
    pub views: usize,
    /// Latent width per view.
    pub view_width: usize,
    pub cond_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
}

impl Default for PolicyDims {
    fn default() -> Self {
        Self {
            views: 2,
            view_width: 7,
            cond_dim: 8,
            time_dim: 8,
            hidden: 32,
        }
    }
}

impl PolicyDims {
    pub fn latent_dim(&self) -> usize {
        self.views * self.view_width
    }

    pub fn input_dim(&self) -> usize {
        self.latent_dim() + self.time_dim + self.cond_dim
    }

    pub fn param_count(&self) -> usize {
        let (i, h, o) = (self.input_dim(), self.hidden, self.latent_dim());
        h * i + h + o * h + o
    }

    pub fn validate(&self) -> Result<()> {
        if self.views == 0 || self.view_width == 0 || self.hidden == 0 {
            return Err(Error::Config("policy dims must be positive".into()));
        }
        if self.view_width != super::VIEW_WIDTH {
            return Err(Error::Config(format!("view_width must be {}", super::VIEW_WIDTH)));
        }
        if self.time_dim % 2 != 0 {
            return Err(Error::Config("time_dim must be even".into()));
        }
        if self.param_count() > 10_000 {
            return Err(Error::Config(format!(
                "policy has {} parameters, limit is 10000",
                self.param_count()
            )));
        }
        Ok(())
    }
}

/// Flat parameter vector laid out as `W1 | b1 | W2 | b2`, matrices
/// row-major (`W1` is hidden × input, `W2` is latent × hidden).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    dims: PolicyDims,
    theta: Vec<f64>,
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl PolicyParams {
    /// `W1 ~ N(0, 1/input)`, `b1 ~ N(0, 1)`, `W2 ~ N(0, 1/hidden)`, `b2 = 0`.
    ///
    /// The random hidden bias gives the untrained policy an input-independent
    /// offset in its mean, which the output layer can move coherently.
    pub fn init(dims: PolicyDims, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[0x1417]);
        let mut theta = vec![0.0; dims.param_count()];
        let l = Self::layout(&dims);
        let s1 = (1.0 / dims.input_dim() as f64).sqrt();
        for w in &mut theta[l.w1..l.b1] {
            *w = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        for b in &mut theta[l.b1..l.w2] {
            *b = rng.sample::<f64, _>(StandardNormal);
        }
        let s2 = (1.0 / dims.hidden as f64).sqrt();
        for w in &mut theta[l.w2..l.b2] {
            *w = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        Self { dims, theta }
    }

    pub fn from_vec(dims: PolicyDims, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != dims.param_count() {
            return Err(Error::DimensionMismatch {
                expected: dims.param_count(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite policy parameter".into()));
        }
        Ok(Self { dims, theta })
    }

    pub fn dims(&self) -> &PolicyDims {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn layout(d: &PolicyDims) -> Layout {
        let (i, h, o) = (d.input_dim(), d.hidden, d.latent_dim());
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + o * h;
        Layout { w1, b1, w2, b2 }
    }

    pub(crate) fn check_cond(&self, cond: &Conditioning) -> Result<()> {
        if cond.dim() != self.dims.cond_dim {
            return Err(Error::DimensionMismatch {
                expected: self.dims.cond_dim,
                got: cond.dim(),
            });
        }
        Ok(())
    }

    fn input(&self, z: &[f64], t: usize, steps: usize, cond: &Conditioning) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dims.input_dim());
        x.extend_from_slice(z);
        x.extend(time_embedding(t, steps, self.dims.time_dim));
        x.extend_from_slice(&cond.0);
        x
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let l = Self::layout(&self.dims);
        let n_in = self.dims.input_dim();
        (0..self.dims.hidden)
            .map(|k| {
                let row = &self.theta[l.w1 + k * n_in..l.w1 + (k + 1) * n_in];
                let a = self.theta[l.b1 + k] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                a.tanh()
            })
            .collect()
    }

    fn output(&self, h: &[f64]) -> Vec<f64> {
        let l = Self::layout(&self.dims);
        let hd = self.dims.hidden;
        (0..self.dims.latent_dim())
            .map(|o| {
                let row = &self.theta[l.w2 + o * hd..l.w2 + (o + 1) * hd];
                self.theta[l.b2 + o] + row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    /// Predicted mean `μ_θ(z_t, t, c)`.
    pub fn mean(&self, z: &[f64], t: usize, steps: usize, cond: &Conditioning) -> Vec<f64> {
        let x = self.input(z, t, steps, cond);
        self.output(&self.hidden(&x))
    }

    /// Adds `scale · ∇_θ log π_θ(z_prev | z_t)` into `grad`; returns the log-prob.
    pub(crate) fn log_prob_grad_into(
        &self,
        tr: &Transition,
        steps: usize,
        cond: &Conditioning,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let l = Self::layout(&self.dims);
        let (n_in, hd, n_out) = (self.dims.input_dim(), self.dims.hidden, self.dims.latent_dim());
        let x = self.input(&tr.z_t, tr.t, steps, cond);
        let h = self.hidden(&x);
        let mean = self.output(&h);
        let logp = super::gaussian_log_prob(&tr.z_prev, &mean, tr.sigma);

        let inv_var = 1.0 / (tr.sigma * tr.sigma);
        let g_mu: Vec<f64> = tr.z_prev.iter().zip(&mean).map(|(z, m)| (z - m) * inv_var).collect();
        let mut g_h = vec![0.0; hd];
        for o in 0..n_out {
            let g = g_mu[o];
            grad[l.b2 + o] += scale * g;
            let row = l.w2 + o * hd;
            for k in 0..hd {
                grad[row + k] += scale * g * h[k];
                g_h[k] += g * self.theta[row + k];
            }
        }
        for k in 0..hd {
            let g_a = g_h[k] * (1.0 - h[k] * h[k]);
            grad[l.b1 + k] += scale * g_a;
            let row = l.w1 + k * n_in;
            for j in 0..n_in {
                grad[row + j] += scale * g_a * x[j];
            }
        }
        logp
    }
}

/// Sinusoidal embedding of the normalised timestep `t / steps`.
pub fn time_embedding(t: usize, steps: usize, dim: usize) -> Vec<f64> {
    let s = t as f64 / steps.max(1) as f64;
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for k in 0..half {
        let freq = std::f64::consts::PI * (1u64 << k) as f64;
        out.push((freq * s).sin());
        out.push((freq * s).cos());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dims_fit_budget() {
        let d = PolicyDims::default();
        assert_eq!(d.latent_dim(), 14);
        assert_eq!(d.input_dim(), 30);
        assert_eq!(d.param_count(), 32 * 30 + 32 + 14 * 32 + 14);
        assert!(d.validate().is_ok());
        let big = PolicyDims {
            hidden: 1000,
            ..d
        };
        assert!(big.validate().is_err());
    }

    #[test]
    fn from_vec_checks_length() {
        let d = PolicyDims::default();
        assert!(PolicyParams::from_vec(d, vec![0.0; 3]).is_err());
        assert!(PolicyParams::from_vec(d, vec![0.0; d.param_count()]).is_ok());
    }

    #[test]
    fn embedding_shape() {
        let e = time_embedding(2, 4, 8);
        assert_eq!(e.len(), 8);
        assert!((e[0] - (std::f64::consts::PI * 0.5).sin()).abs() < 1e-15);
    }
}
