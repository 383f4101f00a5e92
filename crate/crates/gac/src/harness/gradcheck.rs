//! Finite-difference verification of every trained gradient path.
//!
//! Each suite builds a small random scenario, takes the analytic gradient
//! through the tape, and compares it entry by entry against central
//! differences of the scalar loss. Scenarios are redrawn until every relu
//! preactivation, critic min-tie, and kernel clamp sits at least a margin
//! away from its kink, so the finite-difference probe never straddles a
//! non-differentiable point. The whole run is deterministic in the seed.

use rand_chacha::ChaCha8Rng;

use crate::agent::core::stack_grads;
use crate::agent::losses::{actor_loss_graph, critic_loss_graph, MmdTerm};
use crate::diffcore::{MlpParams, Tape, Tensor};
use crate::error::{GacError, Result};
use crate::harness::rngs::stream;
use crate::mmd::{mmd_estimate, mmd_var, repeat_rows, sample_gaussian, sample_uniform_sym, KernelSpec};
use crate::nets::{ActorNet, QEnsemble};

/// Maximum tolerated relative error between analytic and finite-difference
/// gradients.
pub const TOLERANCE: f64 = 1e-4;
/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Minimum distance of any scenario from a kink (relu zero, min tie,
/// pairwise-distance clamp), in the respective preactivation units. Far
/// larger than `FD_STEP`, so probes stay on one smooth branch.
const KINK_MARGIN: f64 = 1e-3;
const REDRAW_LIMIT: usize = 100;

/// Worst relative error of one suite over all seeds and parameter entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub worst_rel_err: f64,
    pub checks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub seeds: u64,
    pub suites: Vec<SuiteReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.worst_rel_err < TOLERANCE)
    }
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3)
}

/// Forward pass mirroring the tape math, tracking the smallest absolute
/// hidden-layer preactivation. Returns (raw output row, min margin).
fn forward_with_margin(params: &MlpParams, row: &[f64]) -> (Vec<f64>, f64) {
    let mut x = row.to_vec();
    let mut margin = f64::INFINITY;
    let layers = params.weights.len();
    for l in 0..layers {
        let w = &params.weights[l];
        let b = &params.biases[l];
        let (n_in, n_out) = (w.shape()[0], w.shape()[1]);
        let mut pre = vec![0.0; n_out];
        for (j, p) in pre.iter_mut().enumerate() {
            let mut s = b.data()[j];
            for i in 0..n_in {
                s += x[i] * w.data()[i * n_out + j];
            }
            *p = s;
        }
        if l + 1 < layers {
            for &p in &pre {
                margin = margin.min(p.abs());
            }
            x = pre.iter().map(|&p| p.max(0.0)).collect();
        } else {
            x = pre;
        }
    }
    (x, margin)
}

/// Smallest kink distance of the critic pair over a batch of (state, action)
/// rows: relu margins of both nets and the |q1a - q1b| tie margin.
fn critic_margin(critics: &QEnsemble, states: &Tensor, actions: &Tensor) -> f64 {
    let (n, sd) = states.dims2();
    let ad = actions.dims2().1;
    let mut worst = f64::INFINITY;
    for r in 0..n {
        let mut row = Vec::with_capacity(sd + ad);
        row.extend_from_slice(states.row(r));
        row.extend_from_slice(actions.row(r));
        let (qa, ma) = forward_with_margin(&critics.q1a, &row);
        let (qb, mb) = forward_with_margin(&critics.q1b, &row);
        worst = worst.min(ma).min(mb).min((qa[0] - qb[0]).abs());
    }
    worst
}

fn actor_margin(actor: &ActorNet, states_rep: &Tensor, noise: &Tensor) -> f64 {
    let (n, sd) = states_rep.dims2();
    let zd = noise.dims2().1;
    let mut worst = f64::INFINITY;
    for r in 0..n {
        let mut row = Vec::with_capacity(sd + zd);
        row.extend_from_slice(states_rep.row(r));
        row.extend_from_slice(noise.row(r));
        let (_, m) = forward_with_margin(&actor.params, &row);
        worst = worst.min(m);
    }
    worst
}

/// Smallest squared pairwise distance between distinct rows of the union of
/// two sample sets; guards the energy kernel's square root.
fn pairwise_margin(x: &Tensor, y: &Tensor) -> f64 {
    let rows: Vec<&[f64]> = (0..x.dims2().0)
        .map(|i| x.row(i))
        .chain((0..y.dims2().0).map(|i| y.row(i)))
        .collect();
    let mut worst = f64::INFINITY;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d2: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            worst = worst.min(d2);
        }
    }
    worst
}

struct ErrTracker {
    worst: f64,
    checks: usize,
}

impl ErrTracker {
    fn new() -> Self {
        ErrTracker { worst: 0.0, checks: 0 }
    }

    fn record(&mut self, analytic: f64, fd: f64) {
        self.worst = self.worst.max(rel_err(analytic, fd));
        self.checks += 1;
    }
}

fn critic_eval(critics: &QEnsemble, s: &Tensor, a: &Tensor, y: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let g = critic_loss_graph(&mut tape, critics, s, a, y)?;
    Ok(tape.value(g.loss).item())
}

/// Runs one critic-loss sweep; `corrupt` injects a deliberate error into the
/// first analytic gradient entry (negative-control hook).
fn critic_suite(
    rng: &mut ChaCha8Rng,
    hidden: &[usize],
    tracker: &mut ErrTracker,
    corrupt: bool,
) -> Result<()> {
    let (sd, ad, m) = (3, 2, 4);
    let mut critics = QEnsemble::init(sd, ad, hidden, rng)?;
    let (states, actions, targets) = {
        let mut drawn = None;
        for _ in 0..REDRAW_LIMIT {
            let s = sample_gaussian(m, sd, 1.0, rng);
            let a = sample_uniform_sym(m, ad, rng);
            let y = sample_gaussian(m, 1, 1.0, rng);
            if critic_margin(&critics, &s, &a) > KINK_MARGIN {
                drawn = Some((s, a, y));
                break;
            }
        }
        drawn.ok_or_else(|| {
            GacError::InvalidArgument("no kink-free critic scenario in 100 draws".into())
        })?
    };

    let mut analytic = {
        let mut tape = Tape::new();
        let graph = critic_loss_graph(&mut tape, &critics, &states, &actions, &targets)?;
        let grads = tape.backward(graph.loss)?;
        let mut v = stack_grads(&tape, &grads, &graph.q1a);
        v.extend(stack_grads(&tape, &grads, &graph.q1b));
        v
    };
    if corrupt {
        analytic[0].data_mut()[0] += 1.0;
    }

    let layers = critics.q1a.weights.len();
    for which in 0..2 {
        for l in 0..layers {
            for is_weight in [true, false] {
                let flat_idx = which * 2 * layers + 2 * l + usize::from(!is_weight);
                let n = analytic[flat_idx].data().len();
                for e in 0..n {
                    let set = |c: &mut QEnsemble, delta: f64| {
                        let p = if which == 0 { &mut c.q1a } else { &mut c.q1b };
                        let t = if is_weight { &mut p.weights[l] } else { &mut p.biases[l] };
                        t.data_mut()[e] += delta;
                    };
                    set(&mut critics, FD_STEP);
                    let fp = critic_eval(&critics, &states, &actions, &targets)?;
                    set(&mut critics, -2.0 * FD_STEP);
                    let fm = critic_eval(&critics, &states, &actions, &targets)?;
                    set(&mut critics, FD_STEP);
                    tracker.record(analytic[flat_idx].data()[e], (fp - fm) / (2.0 * FD_STEP));
                }
            }
        }
    }
    Ok(())
}

fn actor_eval(
    actor: &ActorNet,
    critics: &QEnsemble,
    states: &Tensor,
    noise: &Tensor,
    k: usize,
    refs: &Tensor,
    alpha: f64,
    kernel: &KernelSpec,
) -> Result<f64> {
    let mut tape = Tape::new();
    let g = actor_loss_graph(
        &mut tape,
        actor,
        critics,
        states,
        noise,
        k,
        Some(MmdTerm { refs, alpha, kernel }),
    )?;
    Ok(tape.value(g.loss).item())
}

fn actor_suite(rng: &mut ChaCha8Rng, hidden: &[usize], tracker: &mut ErrTracker) -> Result<()> {
    let (sd, ad, zd, m, k) = (3, 2, 2, 4, 3);
    let alpha = 0.7;
    let kernel = KernelSpec::EnergySquared;
    let mut actor = ActorNet::init(sd, zd, ad, hidden, rng)?;
    let critics = QEnsemble::init(sd, ad, hidden, rng)?;
    let (states, noise, refs) = {
        let mut drawn = None;
        for _ in 0..REDRAW_LIMIT {
            let s = sample_gaussian(m, sd, 1.0, rng);
            let z = sample_gaussian(m * k, zd, 1.0, rng);
            let r = sample_uniform_sym(m * k, ad, rng);
            let s_rep = repeat_rows(&s, k);
            let actions = actor.act_batch(&s_rep, &z)?;
            let mut ok = actor_margin(&actor, &s_rep, &z) > KINK_MARGIN
                && critic_margin(&critics, &s_rep, &actions) > KINK_MARGIN;
            // Keep the per-state discrepancy away from the sqrt clamp.
            for block in 0..m {
                let slice = |t: &Tensor| {
                    let rows: Vec<Vec<f64>> =
                        (block * k..(block + 1) * k).map(|i| t.row(i).to_vec()).collect();
                    Tensor::from_rows(&rows).expect("uniform block rows")
                };
                if mmd_estimate(&slice(&actions), &slice(&r), &kernel)? < KINK_MARGIN {
                    ok = false;
                }
            }
            if ok {
                drawn = Some((s, z, r));
                break;
            }
        }
        drawn.ok_or_else(|| {
            GacError::InvalidArgument("no kink-free actor scenario in 100 draws".into())
        })?
    };

    let analytic = {
        let mut tape = Tape::new();
        let graph = actor_loss_graph(
            &mut tape,
            &actor,
            &critics,
            &states,
            &noise,
            k,
            Some(MmdTerm { refs: &refs, alpha, kernel: &kernel }),
        )?;
        let grads = tape.backward(graph.loss)?;
        stack_grads(&tape, &grads, &graph.actor)
    };

    let layers = actor.params.weights.len();
    for l in 0..layers {
        for is_weight in [true, false] {
            let flat_idx = 2 * l + usize::from(!is_weight);
            let n = analytic[flat_idx].data().len();
            for e in 0..n {
                let set = |a: &mut ActorNet, delta: f64| {
                    let t =
                        if is_weight { &mut a.params.weights[l] } else { &mut a.params.biases[l] };
                    t.data_mut()[e] += delta;
                };
                set(&mut actor, FD_STEP);
                let fp = actor_eval(&actor, &critics, &states, &noise, k, &refs, alpha, &kernel)?;
                set(&mut actor, -2.0 * FD_STEP);
                let fm = actor_eval(&actor, &critics, &states, &noise, k, &refs, alpha, &kernel)?;
                set(&mut actor, FD_STEP);
                tracker.record(analytic[flat_idx].data()[e], (fp - fm) / (2.0 * FD_STEP));
            }
        }
    }
    Ok(())
}

fn mmd_suite(rng: &mut ChaCha8Rng, tracker: &mut ErrTracker) -> Result<()> {
    let (n, d) = (4, 2);
    for kernel in [
        KernelSpec::EnergySquared,
        KernelSpec::Energy,
        KernelSpec::Gaussian { sigma: 1.2 },
    ] {
        let (x, y) = {
            let mut drawn = None;
            for _ in 0..REDRAW_LIMIT {
                let x = sample_gaussian(n, d, 1.0, rng);
                let y = sample_gaussian(n, d, 1.0, rng);
                if pairwise_margin(&x, &y) > KINK_MARGIN
                    && mmd_estimate(&x, &y, &kernel)? > KINK_MARGIN
                {
                    drawn = Some((x, y));
                    break;
                }
            }
            drawn.ok_or_else(|| {
                GacError::InvalidArgument("no kink-free sample sets in 100 draws".into())
            })?
        };
        let analytic = {
            let mut tape = Tape::new();
            let xv = tape.param(x.clone());
            let yv = tape.constant(y.clone());
            let mv = mmd_var(&mut tape, xv, yv, &kernel)?;
            let grads = tape.backward(mv)?;
            grads.get(xv).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()))
        };
        let mut x_pert = x.clone();
        for e in 0..x_pert.data().len() {
            x_pert.data_mut()[e] += FD_STEP;
            let fp = mmd_estimate(&x_pert, &y, &kernel)?;
            x_pert.data_mut()[e] -= 2.0 * FD_STEP;
            let fm = mmd_estimate(&x_pert, &y, &kernel)?;
            x_pert.data_mut()[e] += FD_STEP;
            tracker.record(analytic.data()[e], (fp - fm) / (2.0 * FD_STEP));
        }
    }
    Ok(())
}

/// The entropy-weight objective is linear in log α with slope (β - mmd);
/// this checks the slope the optimizer uses against a finite difference of
/// the objective itself.
fn alpha_suite(rng: &mut ChaCha8Rng, tracker: &mut ErrTracker) -> Result<()> {
    let log_alpha = sample_gaussian(1, 1, 1.0, rng).data()[0];
    let beta = 0.42;
    let mmd_value = sample_gaussian(1, 1, 1.0, rng).data()[0].abs();
    let objective = |la: f64| la * (beta - mmd_value);
    let analytic = beta - mmd_value;
    let fd = (objective(log_alpha + FD_STEP) - objective(log_alpha - FD_STEP)) / (2.0 * FD_STEP);
    tracker.record(analytic, fd);
    Ok(())
}

/// Runs all gradient suites over `seeds` independent scenarios on networks
/// with the given hidden sizes. `corrupt` makes the critic suite report a
/// deliberately wrong gradient so callers can verify failure detection.
pub fn run(seeds: u64, hidden: &[usize], corrupt: bool) -> Result<GradcheckReport> {
    if seeds == 0 {
        return Err(GacError::InvalidArgument("gradcheck needs at least one seed".into()));
    }
    let mut critic = ErrTracker::new();
    let mut actor = ErrTracker::new();
    let mut mmd = ErrTracker::new();
    let mut alpha = ErrTracker::new();
    for i in 0..seeds {
        let mut rng = stream(i, "gradcheck");
        critic_suite(&mut rng, hidden, &mut critic, corrupt)?;
        actor_suite(&mut rng, hidden, &mut actor)?;
        mmd_suite(&mut rng, &mut mmd)?;
        alpha_suite(&mut rng, &mut alpha)?;
    }
    Ok(GradcheckReport {
        seeds,
        suites: vec![
            SuiteReport { name: "critic_loss", worst_rel_err: critic.worst, checks: critic.checks },
            SuiteReport { name: "actor_loss", worst_rel_err: actor.worst, checks: actor.checks },
            SuiteReport { name: "mmd", worst_rel_err: mmd.worst, checks: mmd.checks },
            SuiteReport {
                name: "alpha_objective",
                worst_rel_err: alpha.worst,
                checks: alpha.checks,
            },
        ],
    })
}

/// One line per suite, `PASS`/`FAIL` per the tolerance.
pub fn format_report(report: &GradcheckReport) -> String {
    let mut out = String::new();
    for s in &report.suites {
        let verdict = if s.worst_rel_err < TOLERANCE { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "{}: worst relative error {:.3e} over {} checks ({} seeds) {verdict}\n",
            s.name, s.worst_rel_err, s.checks, report.seeds
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_seeds_pass_within_tolerance() {
        let report = run(2, &[8, 8], false).unwrap();
        assert!(report.passed(), "{}", format_report(&report));
        for s in &report.suites {
            assert!(s.checks > 0);
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let a = run(2, &[8, 8], false).unwrap();
        let b = run(2, &[8, 8], false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let report = run(1, &[8, 8], true).unwrap();
        assert!(!report.passed());
        assert!(report.suites[0].worst_rel_err > TOLERANCE);
        assert!(format_report(&report).contains("FAIL"));
    }

    #[test]
    fn margin_helpers_match_direct_forward() {
        let mut rng = stream(9, "gradcheck-test");
        let actor = ActorNet::init(2, 1, 1, &[4], &mut rng).unwrap();
        let row = [0.3, -0.8, 0.5];
        let (raw, margin) = forward_with_margin(&actor.params, &row);
        let expected = actor.act(&row[..2], &row[2..]).unwrap();
        assert!((raw[0].tanh() - expected[0]).abs() < 1e-12);
        assert!(margin > 0.0);
    }
}
