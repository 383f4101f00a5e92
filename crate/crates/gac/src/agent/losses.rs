//! Loss graphs for the critic, the actor, and the baseline actor.
//!
//! Each builder assembles its objective on a caller-provided tape and
//! returns the loss node together with the trainable parameter bindings,
//! so the caller can run backward and feed an optimizer.

use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{GacError, Result};
use crate::mmd::{policy_mmd_var, repeat_rows, KernelSpec};
use crate::nets::{ActorNet, MlpVars, QEnsemble, QPair};

/// Critic loss graph: the bound online pair and the scalar objective
/// (1/2m)·Σ(yᵢ − Q₁(sᵢ,aᵢ))², with Q₁ the online minimum.
pub struct CriticGraph {
    pub loss: Var,
    pub q1a: MlpVars,
    pub q1b: MlpVars,
}

/// Actor loss graph: the bound policy parameters, the scalar objective,
/// and the MMD node when the entropy term is present.
pub struct ActorGraph {
    pub loss: Var,
    pub mmd: Option<Var>,
    pub actor: MlpVars,
}

/// Entropy regularizer attached to the actor objective.
pub struct MmdTerm<'a> {
    /// Uniform reference actions, `[states·samples, action_dim]`.
    pub refs: &'a Tensor,
    pub alpha: f64,
    pub kernel: &'a KernelSpec,
}

/// Bellman regression targets yᵢ = rᵢ + γ·(1 − doneᵢ)·Q₂ᵢ. Terminal
/// transitions drop the bootstrap term; time-limit truncations are stored
/// as non-terminal and bootstrap normally.
pub fn critic_targets(
    rewards: &[f64],
    terminals: &[f64],
    q2_next: &Tensor,
    gamma: f64,
) -> Result<Tensor> {
    let m = rewards.len();
    if terminals.len() != m || q2_next.len() != m {
        return Err(GacError::ShapeMismatch {
            op: "critic_targets",
            detail: format!(
                "{m} rewards, {} terminals, {} bootstrap values",
                terminals.len(),
                q2_next.len()
            ),
        });
    }
    let data = (0..m)
        .map(|i| rewards[i] + gamma * (1.0 - terminals[i]) * q2_next.data()[i])
        .collect();
    Tensor::new(vec![m, 1], data)
}

/// Builds the critic regression loss against fixed targets. Gradient flows
/// only into the online pair; the targets are plain numbers by the time
/// this is called.
pub fn critic_loss_graph(
    tape: &mut Tape,
    critics: &QEnsemble,
    states: &Tensor,
    actions: &Tensor,
    targets: &Tensor,
) -> Result<CriticGraph> {
    let m = states.dims2().0;
    if targets.len() != m {
        return Err(GacError::ShapeMismatch {
            op: "critic_loss",
            detail: format!("{m} transitions but {} targets", targets.len()),
        });
    }
    let s = tape.constant(states.clone());
    let a = tape.constant(actions.clone());
    let y = tape.constant(targets.clone());
    let (q1a, q1b) = critics.bind_pair(tape, QPair::Online, true);
    let q1 = QEnsemble::min_q(tape, &q1a, &q1b, s, a)?;
    let neg_q1 = tape.scalar_mul(q1, -1.0)?;
    let resid = tape.add(y, neg_q1)?;
    let sq = tape.square(resid)?;
    let total = tape.sum(sq)?;
    let loss = tape.scalar_mul(total, 0.5 / m as f64)?;
    Ok(CriticGraph { loss, q1a, q1b })
}

/// Builds the actor objective −mean min-Q(s, G(s,z)) [+ α·MMD when an
/// entropy term is supplied]. `states` is `[m, state_dim]`; `noise` is
/// `[m·samples, noise_dim]` with the draws for one state contiguous.
/// Critic parameters are bound as constants so no gradient reaches them.
pub fn actor_loss_graph(
    tape: &mut Tape,
    actor: &ActorNet,
    critics: &QEnsemble,
    states: &Tensor,
    noise: &Tensor,
    samples_per_state: usize,
    mmd_term: Option<MmdTerm<'_>>,
) -> Result<ActorGraph> {
    let (m, _) = states.dims2();
    if samples_per_state == 0 {
        return Err(GacError::InvalidArgument("actor loss needs at least 1 sample per state".into()));
    }
    let rows = m * samples_per_state;
    if noise.dims2() != (rows, actor.noise_dim()) {
        return Err(GacError::ShapeMismatch {
            op: "actor_loss",
            detail: format!(
                "noise shape {:?} does not match {rows} x {}",
                noise.shape(),
                actor.noise_dim()
            ),
        });
    }
    let states_rep = repeat_rows(states, samples_per_state);
    let s = tape.constant(states_rep);
    let z = tape.constant(noise.clone());
    let actor_vars = actor.bind(tape, true);
    let actions = actor.forward(tape, &actor_vars, s, z)?;
    let (ca, cb) = critics.bind_pair(tape, QPair::Online, false);
    let q = QEnsemble::min_q(tape, &ca, &cb, s, actions)?;
    let q_mean = tape.mean(q)?;
    let q_loss = tape.scalar_mul(q_mean, -1.0)?;

    let (loss, mmd) = match mmd_term {
        Some(term) => {
            if term.refs.dims2() != (rows, actor.action_dim()) {
                return Err(GacError::ShapeMismatch {
                    op: "actor_loss",
                    detail: format!(
                        "reference actions shape {:?} do not match {rows} x {}",
                        term.refs.shape(),
                        actor.action_dim()
                    ),
                });
            }
            if !term.alpha.is_finite() || term.alpha < 0.0 {
                return Err(GacError::InvalidArgument(format!(
                    "alpha must be finite and non-negative, got {}",
                    term.alpha
                )));
            }
            let r = tape.constant(term.refs.clone());
            let mmd = policy_mmd_var(tape, actions, r, m, samples_per_state, term.kernel)?;
            let weighted = tape.scalar_mul(mmd, term.alpha)?;
            (tape.add(q_loss, weighted)?, Some(mmd))
        }
        None => (q_loss, None),
    };
    Ok(ActorGraph { loss, mmd, actor: actor_vars })
}
