//! JED-U-ADMM: the ADMM iterations unrolled into `L` layers with trainable
//! scalars `{rho_l, theta_l, alpha_l, gamma_l}` and a `tanh` auxiliary update.
//!
//! The network runs on real-valued matrices. Signals are stacked as
//! `[Re; Im]` and channels use the `[[Re, -Im], [Im, Re]]` block form, so
//! `realify(H) * realify(X) = realify(H X)`.

mod adam;
mod network;
mod persist;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use network::{
    grad_params, grad_params_with_upstream, infer, infer_complex, loss, u_admm_forward,
    u_admm_forward_with, ForwardOutput, LayerRecord, ZUpdate,
};
pub use persist::{load_params, params_from_str, params_to_string, save_params, ScenarioMeta, TrainedParams, PARAMS_FORMAT};
pub use train::{train, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMat, RealMat};
use num_complex::Complex64;

/// Smallest `|theta|` used in the `tanh` update.
pub const THETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealKind {
    /// `[Re; Im]`, `2m x n`.
    Signal,
    /// `[[Re, -Im], [Im, Re]]`, `2m x 2n`.
    Channel,
}

pub fn realify(m: &ComplexMat, kind: RealKind) -> RealMat {
    let (r, c) = m.shape();
    match kind {
        RealKind::Signal => RealMat::from_fn(2 * r, c, |i, j| {
            if i < r {
                m[(i, j)].re
            } else {
                m[(i - r, j)].im
            }
        }),
        RealKind::Channel => RealMat::from_fn(2 * r, 2 * c, |i, j| {
            let v = m[(i % r, j % c)];
            match (i < r, j < c) {
                (true, true) | (false, false) => v.re,
                (true, false) => -v.im,
                (false, true) => v.im,
            }
        }),
    }
}

/// Inverse of [`realify`] with [`RealKind::Signal`].
pub fn derealify_signal(m: &RealMat) -> Result<ComplexMat> {
    if !m.rows().is_multiple_of(2) {
        return Err(Error::Shape(format!("stacked signal has odd row count {}", m.rows())));
    }
    let r = m.rows() / 2;
    Ok(ComplexMat::from_fn(r, m.cols(), |i, j| {
        Complex64::new(m[(i, j)], m[(i + r, j)])
    }))
}

/// Reads the complex matrix off the left block column `[Re; Im]` of a
/// channel-form real matrix.
pub fn derealify_channel(m: &RealMat) -> Result<ComplexMat> {
    if !m.rows().is_multiple_of(2) || !m.cols().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "channel block form needs even dimensions, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let (r, c) = (m.rows() / 2, m.cols() / 2);
    Ok(ComplexMat::from_fn(r, c, |i, j| Complex64::new(m[(i, j)], m[(i + r, j)])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    /// `theta`, `alpha` and `gamma` are shared by all layers.
    Shared,
    Unshared,
}

/// Per-layer scalars of the unfolded network.
///
/// `rho` always has one entry per layer; `theta`, `alpha` and `gamma` have
/// one entry per layer in unshared mode and a single entry in shared mode.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedParams {
    pub mode: ParamMode,
    pub layers: usize,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Regularizer of the pilot-only initial channel estimate.
    pub gamma0: f64,
}

impl UnfoldedParams {
    /// Starting point that mirrors JED-ADMM: `rho_l = gamma_l = gamma_0 =
    /// noise_ratio`, `alpha_l = 1`, `theta_l = 1`.
    pub fn admm_like(mode: ParamMode, layers: usize, noise_ratio: f64) -> Self {
        let per = match mode {
            ParamMode::Shared => 1,
            ParamMode::Unshared => layers,
        };
        Self {
            mode,
            layers,
            rho: vec![noise_ratio; layers],
            theta: vec![1.0; per],
            alpha: vec![1.0; per],
            gamma: vec![noise_ratio; per],
            gamma0: noise_ratio,
        }
    }

    /// Parameters under which the network (with a box projection in place of
    /// `tanh`) reproduces JED-ADMM with penalty `rho` exactly.
    pub fn admm_equivalent(mode: ParamMode, layers: usize, rho: f64, noise_ratio: f64) -> Self {
        let mut p = Self::admm_like(mode, layers, noise_ratio);
        p.rho = vec![rho / 2.0; layers];
        p
    }

    fn per_layer_len(&self) -> usize {
        match self.mode {
            ParamMode::Shared => 1,
            ParamMode::Unshared => self.layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, len: usize, want: usize| {
            Err(Error::InvalidArgument(format!(
                "{what} has {len} entries, expected {want} for {} layers in {:?} mode",
                self.layers, self.mode
            )))
        };
        if self.layers == 0 {
            return Err(Error::InvalidArgument("at least one layer is required".into()));
        }
        if self.rho.len() != self.layers {
            return bad("rho", self.rho.len(), self.layers);
        }
        let per = self.per_layer_len();
        for (name, v) in [("theta", &self.theta), ("alpha", &self.alpha), ("gamma", &self.gamma)] {
            if v.len() != per {
                return bad(name, v.len(), per);
            }
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::InvalidArgument(format!("rho entries must be positive, got {r}")));
        }
        let all = self
            .rho
            .iter()
            .chain(&self.theta)
            .chain(&self.alpha)
            .chain(&self.gamma)
            .chain(std::iter::once(&self.gamma0));
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    fn idx(&self, layer: usize) -> usize {
        match self.mode {
            ParamMode::Shared => 0,
            ParamMode::Unshared => layer,
        }
    }

    /// Parameters of layer `layer` (0-based) as `(rho, theta, alpha, gamma)`.
    pub fn layer(&self, layer: usize) -> (f64, f64, f64, f64) {
        let i = self.idx(layer);
        (self.rho[layer], self.theta[i], self.alpha[i], self.gamma[i])
    }

    /// Number of trainable scalars: `4L` unshared, `L + 4` shared.
    ///
    /// In unshared mode `gamma0` stays at its initial value.
    pub fn trainable_count(&self) -> usize {
        match self.mode {
            ParamMode::Shared => self.layers + 4,
            ParamMode::Unshared => 4 * self.layers,
        }
    }

    /// Trainable vector: `ln rho_1..L`, then `theta`, `alpha`, `gamma`, then
    /// `gamma0` in shared mode.
    pub fn to_trainable(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.trainable_count());
        v.extend(self.rho.iter().map(|r| r.ln()));
        v.extend(&self.theta);
        v.extend(&self.alpha);
        v.extend(&self.gamma);
        if self.mode == ParamMode::Shared {
            v.push(self.gamma0);
        }
        v
    }

    /// Writes a trainable vector produced by [`Self::to_trainable`] back.
    pub fn set_trainable(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.trainable_count() {
            return Err(Error::InvalidArgument(format!(
                "trainable vector has {} entries, expected {}",
                v.len(),
                self.trainable_count()
            )));
        }
        let l = self.layers;
        let per = self.per_layer_len();
        for (r, &lr) in self.rho.iter_mut().zip(&v[..l]) {
            *r = lr.exp();
        }
        let mut off = l;
        for dst in [&mut self.theta, &mut self.alpha, &mut self.gamma] {
            dst.copy_from_slice(&v[off..off + per]);
            off += per;
        }
        if self.mode == ParamMode::Shared {
            self.gamma0 = v[off];
        }
        Ok(())
    }
}
