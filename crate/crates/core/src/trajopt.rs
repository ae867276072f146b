//! Direct-transcription open-loop solver: minimizes the discretized
//! objective over a piecewise-constant control grid with Adam, using
//! reverse-mode gradients through the RK4 rollout. Serves as both the
//! training-data generator and the ground-truth oracle.

use crate::autodiff::{NodeId, Tape};
use crate::encoder::{Sample, TaskDataset};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::optim::{adam_step, AdamState};
use crate::problems::{
    dynamics_tape, rk4_rollout, running_cost, running_cost_tape, sample_initial_state,
    terminal_cost, terminal_cost_tape, ControlProblem, TaskSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    LeftEndpoint,
    Trapezoid,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub learning_rate: f64,
    /// Per-iteration multiplicative learning-rate factor; 1.0 disables decay.
    /// Stiff obstacle problems need decay for Adam to settle to a stationary
    /// point instead of oscillating across the valley.
    pub lr_decay: f64,
    pub grad_tol: f64,
    pub multi_start: usize,
    pub quadrature: Quadrature,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 5000,
            learning_rate: 0.05,
            lr_decay: 1.0,
            grad_tol: 1e-4,
            multi_start: 1,
            quadrature: Quadrature::LeftEndpoint,
            seed: 0,
        }
    }
}

/// A solved (or best-effort) open-loop trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub objective: f64,
    pub converged: bool,
    pub grad_norm: f64,
}

/// Discretized objective: quadrature of the running cost over the rollout
/// plus the terminal cost.
pub fn discretized_objective(
    problem: &ControlProblem,
    task: &TaskSpec,
    controls: &[Vec<f64>],
    x0: &[f64],
    quadrature: Quadrature,
) -> Result<f64> {
    assert_eq!(controls.len(), problem.n_steps, "control grid size mismatch");
    let rollout = rk4_rollout(problem, x0, |_, t| {
        let k = ((t / problem.step_size()).round() as usize).min(problem.n_steps - 1);
        controls[k].clone()
    })?;
    let h = problem.step_size();
    let mut j = 0.0;
    for k in 0..problem.n_steps {
        let lk = running_cost(problem, task, &rollout.states[k], &rollout.controls[k])?;
        match quadrature {
            Quadrature::LeftEndpoint => j += h * lk,
            Quadrature::Trapezoid => {
                let lk1 =
                    running_cost(problem, task, &rollout.states[k + 1], &rollout.controls[k])?;
                j += 0.5 * h * (lk + lk1);
            }
        }
    }
    j += terminal_cost(problem, task, rollout.states.last().unwrap())?;
    Ok(j)
}

/// Records a batched RK4 step on the tape under zero-order-hold controls.
fn rk4_step_tape(
    tape: &mut Tape,
    problem: &ControlProblem,
    x: NodeId,
    u: NodeId,
    h: f64,
) -> NodeId {
    let k1 = dynamics_tape(tape, problem, x, u);
    let k1h = tape.scale(k1, 0.5 * h);
    let x2 = tape.add(x, k1h);
    let k2 = dynamics_tape(tape, problem, x2, u);
    let k2h = tape.scale(k2, 0.5 * h);
    let x3 = tape.add(x, k2h);
    let k3 = dynamics_tape(tape, problem, x3, u);
    let k3h = tape.scale(k3, h);
    let x4 = tape.add(x, k3h);
    let k4 = dynamics_tape(tape, problem, x4, u);

    let k2x2 = tape.scale(k2, 2.0);
    let k3x2 = tape.scale(k3, 2.0);
    let s = tape.add(k1, k2x2);
    let s = tape.add(s, k3x2);
    let s = tape.add(s, k4);
    let sh = tape.scale(s, h / 6.0);
    tape.add(x, sh)
}

struct BatchForward {
    loss: NodeId,
    per_row_objective: Vec<f64>,
    control_leaves: Vec<NodeId>,
}

/// Builds the full batched rollout + objective on a fresh tape. Row b of
/// every control leaf belongs to trajectory b; the scalar loss is the sum
/// of per-row objectives, so gradients stay separable across rows.
fn forward_batch(
    tape: &mut Tape,
    problem: &ControlProblem,
    task: &TaskSpec,
    x0s: &DenseMatrix,
    controls: &[DenseMatrix],
    quadrature: Quadrature,
) -> BatchForward {
    let h = problem.step_size();
    let b = x0s.rows();
    let mut x = tape.constant(x0s.clone());
    let mut control_leaves = Vec::with_capacity(problem.n_steps);
    let mut cost: Option<NodeId> = None;
    for k in 0..problem.n_steps {
        let u = tape.leaf(controls[k].clone());
        control_leaves.push(u);
        let x_next = rk4_step_tape(tape, problem, x, u, h);
        let lk = running_cost_tape(tape, problem, task, x, u);
        let step_cost = match quadrature {
            Quadrature::LeftEndpoint => tape.scale(lk, h),
            Quadrature::Trapezoid => {
                let lk1 = running_cost_tape(tape, problem, task, x_next, u);
                let s = tape.add(lk, lk1);
                tape.scale(s, 0.5 * h)
            }
        };
        cost = Some(match cost {
            Some(c) => tape.add(c, step_cost),
            None => step_cost,
        });
        x = x_next;
    }
    let term = terminal_cost_tape(tape, problem, task, x);
    let total = tape.add(cost.expect("n_steps >= 1"), term);
    let per_row_objective = tape.value(total).data().to_vec();
    assert_eq!(per_row_objective.len(), b);
    let loss = tape.sum(total);
    BatchForward { loss, per_row_objective, control_leaves }
}

/// Solves one open-loop problem per row of `x0s`. Rows are optimized
/// jointly (the loss is separable and Adam is coordinate-wise, so this is
/// exactly independent per-trajectory optimization).
pub fn solve_open_loop_batch(
    problem: &ControlProblem,
    task: &TaskSpec,
    x0s: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<Vec<Trajectory>> {
    let b = x0s.len();
    assert!(b >= 1);
    let n_steps = problem.n_steps;
    let m = problem.control_dim;
    let x0_mat = DenseMatrix::from_vec(
        b,
        problem.state_dim,
        x0s.iter().flat_map(|x| x.iter().copied()).collect(),
    );

    // best-so-far per row, shared across starts: one slot for the lowest
    // objective over all iterates, one for the lowest objective among
    // stationary iterates (gradient inf-norm <= grad_tol). The stationary
    // slot wins when populated, so a microscopically lower objective seen at
    // a non-stationary iterate cannot shadow a converged one.
    let mut best_obj = vec![f64::INFINITY; b];
    let mut best_controls = vec![vec![vec![0.0; m]; n_steps]; b];
    let mut best_grad_norm = vec![f64::INFINITY; b];
    let mut stat_obj = vec![f64::INFINITY; b];
    let mut stat_controls = vec![vec![vec![0.0; m]; n_steps]; b];
    let mut stat_grad_norm = vec![f64::INFINITY; b];

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for start in 0..opts.multi_start.max(1) {
        let mut controls: Vec<DenseMatrix> = (0..n_steps)
            .map(|_| {
                let data = (0..b * m)
                    .map(|_| if start == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) })
                    .collect();
                DenseMatrix::from_vec(b, m, data)
            })
            .collect();
        let mut adam = AdamState::new(n_steps * b * m, opts.learning_rate);

        for _iter in 0..opts.max_iters {
            let mut tape = Tape::new();
            let fwd = forward_batch(&mut tape, problem, task, &x0_mat, &controls, opts.quadrature);
            let grads = tape.backward(fwd.loss);

            // per-row gradient infinity norm over the whole control grid
            let mut row_inf = vec![0.0f64; b];
            let mut flat_grad = Vec::with_capacity(n_steps * b * m);
            for &leaf in &fwd.control_leaves {
                let g = grads.wrt(leaf).expect("controls are trainable");
                for r in 0..b {
                    for c in 0..m {
                        let v = g.get(r, c);
                        row_inf[r] = row_inf[r].max(v.abs());
                        flat_grad.push(v);
                    }
                }
            }

            for r in 0..b {
                if fwd.per_row_objective[r] < best_obj[r] {
                    best_obj[r] = fwd.per_row_objective[r];
                    for k in 0..n_steps {
                        best_controls[r][k].copy_from_slice(
                            &controls[k].data()[r * m..(r + 1) * m],
                        );
                    }
                    best_grad_norm[r] = row_inf[r];
                }
                if row_inf[r] <= opts.grad_tol && fwd.per_row_objective[r] < stat_obj[r] {
                    stat_obj[r] = fwd.per_row_objective[r];
                    for k in 0..n_steps {
                        stat_controls[r][k].copy_from_slice(
                            &controls[k].data()[r * m..(r + 1) * m],
                        );
                    }
                    stat_grad_norm[r] = row_inf[r];
                }
            }
            // stop only when the current joint iterate is stationary for every
            // row; a transient dip in one row must not freeze the others
            if row_inf.iter().all(|&g| g <= opts.grad_tol) {
                break;
            }

            // flatten current controls matching the gradient layout
            let mut flat: Vec<f64> =
                controls.iter().flat_map(|c| c.data().iter().copied()).collect();
            adam_step(&mut flat, &flat_grad, &mut adam);
            adam.alpha *= opts.lr_decay;
            for (k, chunk) in flat.chunks(b * m).enumerate() {
                controls[k].data_mut().copy_from_slice(chunk);
            }
        }
    }
    // per row, return the best stationary iterate when one was visited,
    // otherwise the best overall; convergence is judged at the iterate
    // actually returned
    let mut converged = vec![false; b];
    for r in 0..b {
        if stat_obj[r].is_finite() {
            best_obj[r] = stat_obj[r];
            std::mem::swap(&mut best_controls[r], &mut stat_controls[r]);
            best_grad_norm[r] = stat_grad_norm[r];
            converged[r] = true;
        } else {
            converged[r] = best_grad_norm[r] <= opts.grad_tol;
        }
    }

    // re-integrate the best controls so states/objective are exactly
    // consistent with discretized_objective
    let mut out = Vec::with_capacity(b);
    for r in 0..b {
        let ctrl = best_controls[r].clone();
        let rollout = rk4_rollout(problem, &x0s[r], |_, t| {
            let k = ((t / problem.step_size()).round() as usize).min(n_steps - 1);
            ctrl[k].clone()
        })?;
        let objective =
            discretized_objective(problem, task, &ctrl, &x0s[r], opts.quadrature)?;
        out.push(Trajectory {
            times: rollout.times,
            states: rollout.states,
            controls: ctrl,
            objective,
            converged: converged[r],
            grad_norm: best_grad_norm[r],
        });
    }
    Ok(out)
}

/// Single-trajectory convenience wrapper.
pub fn solve_open_loop(
    problem: &ControlProblem,
    task: &TaskSpec,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<Trajectory> {
    Ok(solve_open_loop_batch(problem, task, &[x0.to_vec()], opts)?
        .pop()
        .unwrap())
}

/// Solves `n_traj` instances of one task from sampled initial states and
/// flattens the converged trajectories into a labeled dataset.
pub fn generate_task_dataset(
    problem: &ControlProblem,
    task: &TaskSpec,
    n_traj: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<(TaskDataset, Vec<Trajectory>)> {
    assert!(n_traj >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0s: Vec<Vec<f64>> = (0..n_traj)
        .map(|_| sample_initial_state(problem, &mut rng))
        .collect();
    let trajectories = solve_open_loop_batch(problem, task, &x0s, opts)?;
    let unconverged = trajectories.iter().filter(|t| !t.converged).count();
    if unconverged * 10 > n_traj {
        return Err(Error::NotConverged { unconverged, total: n_traj });
    }
    let mut samples = Vec::new();
    let mut objectives = Vec::new();
    for traj in &trajectories {
        if !traj.converged {
            continue;
        }
        objectives.push(traj.objective);
        for k in 0..problem.n_steps {
            samples.push(Sample {
                state: traj.states[k].clone(),
                time: traj.times[k],
                control: traj.controls[k].clone(),
            });
        }
    }
    Ok((
        TaskDataset {
            problem_kind: problem.kind,
            task: task.clone(),
            samples,
            trajectory_objectives: objectives,
        },
        trajectories,
    ))
}
