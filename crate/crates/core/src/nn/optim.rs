use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    /// Heavy-ball momentum in the `v = mu v + g; p -= lr v` form.
    Sgd { lr: f64, momentum: f64 },
    RmsProp { lr: f64, rho: f64, eps: f64 },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerConfig {
    pub fn sgd(lr: f64, momentum: f64) -> Self {
        OptimizerConfig::Sgd { lr, momentum }
    }

    pub fn rmsprop(lr: f64) -> Self {
        OptimizerConfig::RmsProp {
            lr,
            rho: 0.9,
            eps: 1e-8,
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr, .. }
            | OptimizerConfig::RmsProp { lr, .. }
            | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        let ok = self.lr() > 0.0
            && self.lr().is_finite()
            && match *self {
                OptimizerConfig::Sgd { momentum, .. } => unit(momentum),
                OptimizerConfig::RmsProp { rho, eps, .. } => unit(rho) && eps > 0.0,
                OptimizerConfig::Adam {
                    beta1, beta2, eps, ..
                } => unit(beta1) && unit(beta2) && eps > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::argument(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Optimizer state, one `f64` slot vector per parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new<T: Real>(config: OptimizerConfig, net: &Network<T>) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Vec<f64>> = net.params().iter().flatten().map(|t| vec![0.0; t.len()]).collect();
        Ok(Optimizer {
            config,
            second: zeros.clone(),
            first: zeros,
            steps: 0,
        })
    }

    pub fn step<T: Real>(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        let params: Vec<_> = net.params_mut().iter_mut().flatten().collect();
        let grads: Vec<_> = grads.iter().collect();
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(Error::State("gradients do not match the network".into()));
        }
        self.steps += 1;
        let t = self.steps as i32;
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::State(format!("gradient {k} has the wrong length")));
            }
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            let pd = p.data_mut();
            match self.config {
                OptimizerConfig::Sgd { lr, momentum } => {
                    for i in 0..pd.len() {
                        m[i] = momentum * m[i] + g.data()[i].as_f64();
                        pd[i] = T::from_f64(pd[i].as_f64() - lr * m[i]);
                    }
                }
                OptimizerConfig::RmsProp { lr, rho, eps } => {
                    for i in 0..pd.len() {
                        let gi = g.data()[i].as_f64();
                        v[i] = rho * v[i] + (1.0 - rho) * gi * gi;
                        pd[i] = T::from_f64(pd[i].as_f64() - lr * gi / (v[i].sqrt() + eps));
                    }
                }
                OptimizerConfig::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                } => {
                    let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                    for i in 0..pd.len() {
                        let gi = g.data()[i].as_f64();
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        let step = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                        pd[i] = T::from_f64(pd[i].as_f64() - step);
                    }
                }
            }
        }
        Ok(())
    }
}
