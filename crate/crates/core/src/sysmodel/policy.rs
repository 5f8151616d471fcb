use std::fmt;
use std::sync::Arc;

use super::{CostSpec, GaussianStream};
use crate::numkernel::Matrix;

/// Everything observed up to time `t`: states `x_0..x_t` and inputs `u_0..u_{t-1}`.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub states: &'a [Vec<f64>],
    pub inputs: &'a [Vec<f64>],
}

impl<'a> History<'a> {
    /// Current time index.
    pub fn t(&self) -> usize {
        self.inputs.len()
    }

    pub fn state(&self) -> &'a [f64] {
        self.states.last().expect("history holds at least x_0")
    }
}

/// A causal input map. Implementations see only the history and the
/// auxiliary randomization stream.
pub trait Controller {
    fn act(&mut self, history: &History<'_>, aux: &mut GaussianStream) -> Vec<f64>;
}

pub type CustomPolicy = Arc<dyn Fn(&History<'_>, &mut GaussianStream) -> Vec<f64> + Send + Sync>;

/// Certainty-equivalence schedule: doubling epochs, least-squares refits,
/// exploratory noise of variance `min(1, t^-1/2)`.
#[derive(Debug, Clone)]
pub struct CeSchedule {
    /// Stabilizing gain played during the first epoch.
    pub initial_gain: Matrix,
    pub first_epoch: usize,
    pub cost: CostSpec,
    pub explore: bool,
    /// Freeze the model at these dynamics instead of re-estimating.
    pub frozen_model: Option<(Matrix, Matrix)>,
}

impl CeSchedule {
    pub fn new(initial_gain: Matrix, cost: CostSpec) -> Self {
        Self {
            initial_gain,
            first_epoch: 32,
            cost,
            explore: true,
            frozen_model: None,
        }
    }

    pub fn exploration_variance(t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            (t as f64).powf(-0.5).min(1.0)
        }
    }
}

#[derive(Clone)]
pub enum PolicyKind {
    LinearFeedback(Matrix),
    WhiteNoise { variance: f64 },
    CertaintyEquivalent(CeSchedule),
    Custom(CustomPolicy),
}

impl fmt::Debug for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LinearFeedback(k) => f.debug_tuple("LinearFeedback").field(k).finish(),
            Self::WhiteNoise { variance } => f.debug_struct("WhiteNoise").field("variance", variance).finish(),
            Self::CertaintyEquivalent(s) => f.debug_tuple("CertaintyEquivalent").field(s).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Input policy plus the seed of its auxiliary randomization signal.
#[derive(Debug, Clone)]
pub struct Policy {
    pub kind: PolicyKind,
    pub aux_seed: Option<u64>,
}

impl Policy {
    pub fn feedback(k: Matrix) -> Self {
        Self {
            kind: PolicyKind::LinearFeedback(k),
            aux_seed: None,
        }
    }

    pub fn white_noise(variance: f64) -> Self {
        Self {
            kind: PolicyKind::WhiteNoise { variance },
            aux_seed: None,
        }
    }

    pub fn certainty_equivalent(schedule: CeSchedule) -> Self {
        Self {
            kind: PolicyKind::CertaintyEquivalent(schedule),
            aux_seed: None,
        }
    }

    pub fn custom(f: CustomPolicy) -> Self {
        Self {
            kind: PolicyKind::Custom(f),
            aux_seed: None,
        }
    }

    pub fn with_aux_seed(mut self, seed: u64) -> Self {
        self.aux_seed = Some(seed);
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PolicyKind::LinearFeedback(_) => "linear-feedback",
            PolicyKind::WhiteNoise { .. } => "white-noise",
            PolicyKind::CertaintyEquivalent(_) => "certainty-equivalent",
            PolicyKind::Custom(_) => "custom",
        }
    }

    /// Fresh controller state for one rollout with `p` inputs.
    pub fn controller(&self, p: usize) -> Box<dyn Controller + '_> {
        match &self.kind {
            PolicyKind::LinearFeedback(k) => Box::new(Feedback(k)),
            PolicyKind::WhiteNoise { variance } => Box::new(Noise {
                std_dev: variance.max(0.0).sqrt(),
                p,
            }),
            PolicyKind::CertaintyEquivalent(s) => {
                Box::new(crate::learnpipe::CeController::new(s.clone(), p))
            }
            PolicyKind::Custom(f) => Box::new(Custom(f)),
        }
    }
}

struct Feedback<'a>(&'a Matrix);

impl Controller for Feedback<'_> {
    fn act(&mut self, history: &History<'_>, _aux: &mut GaussianStream) -> Vec<f64> {
        self.0.mul_vec(history.state())
    }
}

struct Noise {
    std_dev: f64,
    p: usize,
}

impl Controller for Noise {
    fn act(&mut self, _history: &History<'_>, aux: &mut GaussianStream) -> Vec<f64> {
        aux.normal_vec(self.p, self.std_dev)
    }
}

struct Custom<'a>(&'a CustomPolicy);

impl Controller for Custom<'_> {
    fn act(&mut self, history: &History<'_>, aux: &mut GaussianStream) -> Vec<f64> {
        (self.0)(history, aux)
    }
}
