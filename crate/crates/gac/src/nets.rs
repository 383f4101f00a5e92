//! Policy and critic networks.
//!
//! The actor is a push-forward sampler: it maps state and latent noise
//! through a fully connected stack with relu hidden layers and a tanh output,
//! so actions land in the normalized box [-1, 1]^d. Critics share the same
//! stack shape with a linear scalar output, and come as two online/target
//! pairs whose pessimistic minimum is used everywhere.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{gd_step, MlpParams, Tape, Tensor, Var};
use crate::error::{GacError, Result};
use crate::mmd::sample_gaussian;

/// Latent noise source feeding the actor.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSpec {
    pub noise_dim: usize,
    /// Standard deviation used when acting during training.
    pub train_sigma: f64,
    /// Standard deviation used in evaluation; may be zero for a
    /// deterministic probe of the sampler.
    pub test_sigma: f64,
}

impl LatentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.noise_dim == 0 {
            return Err(GacError::InvalidArgument("latent noise_dim must be positive".into()));
        }
        if !(self.train_sigma > 0.0) || !self.train_sigma.is_finite() {
            return Err(GacError::InvalidArgument(format!(
                "latent train_sigma must be positive and finite, got {}",
                self.train_sigma
            )));
        }
        if !(self.test_sigma >= 0.0) || !self.test_sigma.is_finite() {
            return Err(GacError::InvalidArgument(format!(
                "latent test_sigma must be non-negative and finite, got {}",
                self.test_sigma
            )));
        }
        Ok(())
    }

    pub fn sample(&self, n: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Tensor {
        sample_gaussian(n, self.noise_dim, sigma, rng)
    }
}

/// Tape handles for one bound parameter stack, in layer order.
pub struct MlpVars {
    pub w: Vec<Var>,
    pub b: Vec<Var>,
}

/// Binds parameters onto a tape, as gradient leaves when `trainable`.
pub fn bind_mlp(tape: &mut Tape, params: &MlpParams, trainable: bool) -> MlpVars {
    let mut w = Vec::with_capacity(params.weights.len());
    let mut b = Vec::with_capacity(params.biases.len());
    for (wt, bt) in params.weights.iter().zip(&params.biases) {
        if trainable {
            w.push(tape.param(wt.clone()));
            b.push(tape.param(bt.clone()));
        } else {
            w.push(tape.constant(wt.clone()));
            b.push(tape.constant(bt.clone()));
        }
    }
    MlpVars { w, b }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum OutputActivation {
    Linear,
    Tanh,
}

fn mlp_forward(
    tape: &mut Tape,
    vars: &MlpVars,
    input: Var,
    out_act: OutputActivation,
) -> Result<Var> {
    let last = vars.w.len() - 1;
    let mut h = input;
    for l in 0..vars.w.len() {
        h = tape.matmul(h, vars.w[l])?;
        h = tape.bias_add(h, vars.b[l])?;
        if l < last {
            h = tape.relu(h)?;
        } else if out_act == OutputActivation::Tanh {
            h = tape.tanh(h)?;
        }
    }
    Ok(h)
}

/// Plain forward pass without a tape; mirrors `mlp_forward` operation by
/// operation so both paths produce bit-identical values.
fn mlp_forward_value(params: &MlpParams, input: &Tensor, out_act: OutputActivation) -> Tensor {
    let last = params.weights.len() - 1;
    let mut h = input.clone();
    for l in 0..params.weights.len() {
        let mut z = crate::diffcore::raw_matmul(&h, &params.weights[l]);
        let n = params.biases[l].len();
        for row in z.data_mut().chunks_mut(n) {
            for (d, &bb) in row.iter_mut().zip(params.biases[l].data()) {
                *d += bb;
            }
        }
        if l < last {
            for v in z.data_mut() {
                *v = v.max(0.0);
            }
        } else if out_act == OutputActivation::Tanh {
            for v in z.data_mut() {
                *v = v.tanh();
            }
        }
        h = z;
    }
    h
}

/// Push-forward policy network: action = tanh stack applied to
/// concat(state, noise).
#[derive(Clone, Debug, PartialEq)]
pub struct ActorNet {
    state_dim: usize,
    noise_dim: usize,
    action_dim: usize,
    pub params: MlpParams,
}

impl ActorNet {
    pub fn init(
        state_dim: usize,
        noise_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut dims = vec![state_dim + noise_dim];
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        Ok(ActorNet { state_dim, noise_dim, action_dim, params: MlpParams::init(&dims, rng)? })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> MlpVars {
        bind_mlp(tape, &self.params, trainable)
    }

    /// Actions for already-bound inputs: `states` `[n, state_dim]` and
    /// `noise` `[n, noise_dim]` tape nodes.
    pub fn forward(&self, tape: &mut Tape, vars: &MlpVars, states: Var, noise: Var) -> Result<Var> {
        let input = tape.concat_cols(states, noise)?;
        mlp_forward(tape, vars, input, OutputActivation::Tanh)
    }

    fn check_batch(&self, states: &Tensor, noise: &Tensor) -> Result<()> {
        let (ns, ds) = states.dims2();
        let (nz, dz) = noise.dims2();
        if ns != nz || ds != self.state_dim || dz != self.noise_dim {
            return Err(GacError::InvalidArgument(format!(
                "actor batch shapes {:?} and {:?} do not match dims (state {}, noise {})",
                states.shape(),
                noise.shape(),
                self.state_dim,
                self.noise_dim
            )));
        }
        Ok(())
    }

    /// Batch of actions without building a tape.
    pub fn act_batch(&self, states: &Tensor, noise: &Tensor) -> Result<Tensor> {
        self.check_batch(states, noise)?;
        let (n, _) = states.dims2();
        let mut data = Vec::with_capacity(n * (self.state_dim + self.noise_dim));
        for i in 0..n {
            data.extend_from_slice(states.row(i));
            data.extend_from_slice(noise.row(i));
        }
        let input = Tensor::new(vec![n, self.state_dim + self.noise_dim], data)?;
        Ok(mlp_forward_value(&self.params, &input, OutputActivation::Tanh))
    }

    /// Single action; all components land in [-1, 1].
    pub fn act(&self, state: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        let s = Tensor::matrix(1, state.len(), state.to_vec())?;
        let z = Tensor::matrix(1, noise.len(), noise.to_vec())?;
        Ok(self.act_batch(&s, &z)?.data().to_vec())
    }
}

/// Which critic pair to evaluate.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum QPair {
    Online,
    Target,
}

/// Two online critics and their targets. The targets trail the online pair
/// by one gradient-descent step on half the squared parameter distance per
/// update, i.e. `q2 -= step * (q2 - q1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QEnsemble {
    state_dim: usize,
    action_dim: usize,
    pub q1a: MlpParams,
    pub q1b: MlpParams,
    pub q2a: MlpParams,
    pub q2b: MlpParams,
}

impl QEnsemble {
    /// Initializes two independent online critics; targets start as copies.
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut dims = vec![state_dim + action_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let q1a = MlpParams::init(&dims, rng)?;
        let q1b = MlpParams::init(&dims, rng)?;
        let q2a = q1a.clone();
        let q2b = q1b.clone();
        Ok(QEnsemble { state_dim, action_dim, q1a, q1b, q2a, q2b })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn pair(&self, which: QPair) -> (&MlpParams, &MlpParams) {
        match which {
            QPair::Online => (&self.q1a, &self.q1b),
            QPair::Target => (&self.q2a, &self.q2b),
        }
    }

    pub fn bind_pair(&self, tape: &mut Tape, which: QPair, trainable: bool) -> (MlpVars, MlpVars) {
        let (a, b) = self.pair(which);
        (bind_mlp(tape, a, trainable), bind_mlp(tape, b, trainable))
    }

    /// Pessimistic value `min(Qa, Qb)` for bound critics; `[n, 1]` output.
    /// Gradient flows through whichever critic attains the minimum (the
    /// first on ties).
    pub fn min_q(
        tape: &mut Tape,
        va: &MlpVars,
        vb: &MlpVars,
        states: Var,
        actions: Var,
    ) -> Result<Var> {
        let input = tape.concat_cols(states, actions)?;
        let qa = mlp_forward(tape, va, input, OutputActivation::Linear)?;
        let qb = mlp_forward(tape, vb, input, OutputActivation::Linear)?;
        tape.min(qa, qb)
    }

    /// `min(Qa, Qb)` over a batch without gradients.
    pub fn min_q_value(&self, which: QPair, states: &Tensor, actions: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let s = tape.constant(states.clone());
        let a = tape.constant(actions.clone());
        let (va, vb) = self.bind_pair(&mut tape, which, false);
        let q = Self::min_q(&mut tape, &va, &vb, s, a)?;
        Ok(tape.value(q).clone())
    }

    /// Both online parameter stacks flattened in canonical order, first
    /// net then second, for a single optimizer over the pair.
    pub fn online_flat_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.q1a.flat_mut();
        v.extend(self.q1b.flat_mut());
        v
    }

    /// Moves each target one gradient-descent step toward its online critic.
    pub fn target_update(&mut self, step: f64) -> Result<()> {
        for (target, online) in [(&mut self.q2a, &self.q1a), (&mut self.q2b, &self.q1b)] {
            let grads: Vec<Tensor> = target
                .flat()
                .iter()
                .zip(online.flat())
                .map(|(t, o)| {
                    let data = t.data().iter().zip(o.data()).map(|(tv, ov)| tv - ov).collect();
                    Tensor::new(t.shape().to_vec(), data).expect("matching shapes")
                })
                .collect();
            gd_step(&mut target.flat_mut(), &grads, step, "target critics")?;
        }
        Ok(())
    }
}

/// The full parameter set of one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Networks {
    pub actor: ActorNet,
    pub critics: QEnsemble,
}
