use serde::{Deserialize, Serialize};

use super::network::{Architecture, GradientSet, NetworkParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments, shape-congruent with [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(arch: &Architecture, config: AdamConfig) -> Self {
        let n = arch.parameter_count();
        Self {
            config,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }

    pub fn from_parts(
        config: AdamConfig,
        step: u64,
        first_moment: Vec<f64>,
        second_moment: Vec<f64>,
    ) -> Result<Self> {
        if first_moment.len() != second_moment.len() {
            return Err(Error::InvalidInput("moment length mismatch".into()));
        }
        if second_moment.iter().any(|v| !(*v >= 0.0) || !v.is_finite())
            || first_moment.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("invalid Adam moments".into()));
        }
        Ok(Self {
            config,
            step,
            first_moment,
            second_moment,
        })
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One Adam update of `params` along `grads`.
    ///
    /// The new parameters and moments are computed before anything is
    /// committed, so a non-finite update leaves both untouched.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &GradientSet, lr: f64) -> Result<()> {
        let n = params.as_slice().len();
        if grads.as_slice().len() != n || self.first_moment.len() != n {
            return Err(Error::InvalidInput(format!(
                "Adam state for {} parameters applied to {n}",
                self.first_moment.len()
            )));
        }
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::InvalidInput(format!("learning rate {lr}")));
        }
        if !grads.is_finite() {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step + 1;
        let bc1 = 1.0 - beta1.powf(t as f64);
        let bc2 = 1.0 - beta2.powf(t as f64);
        let mut m = self.first_moment.clone();
        let mut v = self.second_moment.clone();
        let mut theta = params.as_slice().to_vec();
        for i in 0..n {
            let g = grads.as_slice()[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite Adam update at parameter {i} (step {t}, lr {lr})"
            )));
        }
        params.as_mut_slice().copy_from_slice(&theta);
        self.first_moment = m;
        self.second_moment = v;
        self.step = t;
        Ok(())
    }
}

/// `target := (1 − rho) · target + rho · online`, elementwise.
pub fn soft_update(target: &mut NetworkParams, online: &NetworkParams, rho: f64) -> Result<()> {
    if target.architecture() != online.architecture() {
        return Err(Error::InvalidInput(
            "target and online networks differ in shape".into(),
        ));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho {rho} outside [0, 1]")));
    }
    for (phi, &theta) in target.as_mut_slice().iter_mut().zip(online.as_slice()) {
        *phi = (1.0 - rho) * *phi + rho * theta;
    }
    Ok(())
}
