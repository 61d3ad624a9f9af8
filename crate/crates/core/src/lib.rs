//! Joint channel estimation and symbol detection for block-fading MIMO
//! uplinks.
//!
//! * [`model`] draws channels, pilots, symbols and noise.
//! * [`detectors`] holds the JED-AM and JED-ADMM solvers, perfect-CSI
//!   baselines and the FLOPS model.
//! * [`unfolded`] is the trainable unfolded ADMM network (JED-U-ADMM).
//! * [`harness`] runs seeded Monte-Carlo BER sweeps and writes CSV/SVG.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod seeding;
pub mod unfolded;

pub use detectors::{
    flops_estimate, hard_decision, jed_admm, jed_am, project_box, AdmmConfig, FlopsAlgorithm,
    FlopsReport, JedOutput, JedState,
};
pub use error::{Error, Result};
pub use harness::{run_ber_sweep, Algorithm, BerPoint, ExperimentConfig, Penalty, SweepResult};
pub use linalg::{ComplexMat, Mat, RealMat};
pub use model::{ChannelKind, ChannelSpec, Constellation, LinkScenario, NoiseSpec, PilotScheme, Realization};
pub use unfolded::{ParamMode, TrainConfig, TrainedParams, UnfoldedParams};
