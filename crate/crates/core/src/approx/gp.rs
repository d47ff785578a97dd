//! Gaussian-process regression with an RBF kernel and fixed
//! hyperparameters. Targets are centered on their mean, which also serves as
//! the prior mean for predictions far from the data.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::ApproxError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub length_scale: f64,
    pub signal: f64,
    pub noise: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            length_scale: 1.0,
            signal: 1.0,
            noise: 1e-2,
        }
    }
}

pub const BASE_JITTER: f64 = 1e-9;
const MAX_JITTER: f64 = 1e-3;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn rbf(a: &[f64], b: &[f64], p: &GpParams) -> f64 {
    p.signal * (-sq_dist(a, b) / (2.0 * p.length_scale * p.length_scale)).exp()
}

#[derive(Debug, Clone)]
pub struct GpRegressor {
    params: GpParams,
    x: Vec<Vec<f64>>,
    mean: f64,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl GpRegressor {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: GpParams) -> Result<Self, ApproxError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(ApproxError::Invalid(format!("{} inputs for {} targets", x.len(), y.len())));
        }
        if params.noise < 0.0 || params.length_scale <= 0.0 || params.signal <= 0.0 {
            return Err(ApproxError::Invalid("GP parameters must be positive".into()));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(ApproxError::DimensionMismatch { expected: d, got: 0 });
        }
        let n = x.len();
        let k = DMatrix::from_fn(n, n, |i, j| rbf(&x[i], &x[j], &params));
        let mut jitter = BASE_JITTER;
        let chol = loop {
            let m = &k + DMatrix::identity(n, n) * (params.noise + jitter);
            if let Some(c) = Cholesky::new(m) {
                break c;
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER {
                return Err(ApproxError::NotPositiveDefinite);
            }
        };
        let mean = y.iter().sum::<f64>() / n as f64;
        let centered = DVector::from_iterator(n, y.iter().map(|v| v - mean));
        let alpha = chol.solve(&centered);
        Ok(Self {
            params,
            x: x.to_vec(),
            mean,
            alpha,
            chol,
            jitter,
        })
    }

    pub fn params(&self) -> GpParams {
        self.params
    }

    /// Jitter that made the kernel matrix factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    fn kstar(&self, q: &[f64]) -> Result<DVector<f64>, ApproxError> {
        if q.len() != self.dim() {
            return Err(ApproxError::DimensionMismatch {
                expected: self.dim(),
                got: q.len(),
            });
        }
        Ok(DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| rbf(xi, q, &self.params))))
    }

    /// Posterior mean and latent-function variance at each query point.
    pub fn predict(&self, queries: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), ApproxError> {
        let mut means = Vec::with_capacity(queries.len());
        let mut vars = Vec::with_capacity(queries.len());
        let l = self.chol.l();
        for q in queries {
            let ks = self.kstar(q)?;
            means.push(self.mean + ks.dot(&self.alpha));
            let v = l
                .solve_lower_triangular(&ks)
                .expect("cholesky factor has a positive diagonal");
            vars.push((self.params.signal - v.dot(&v)).max(0.0));
        }
        Ok((means, vars))
    }

    /// Gradient of the posterior mean with respect to the query point.
    pub fn mean_gradient(&self, q: &[f64]) -> Result<Vec<f64>, ApproxError> {
        let ks = self.kstar(q)?;
        let l2 = self.params.length_scale * self.params.length_scale;
        let mut g = vec![0.0; q.len()];
        for (i, xi) in self.x.iter().enumerate() {
            let w = self.alpha[i] * ks[i] / l2;
            for d in 0..q.len() {
                g[d] -= w * (q[d] - xi[d]);
            }
        }
        Ok(g)
    }
}
