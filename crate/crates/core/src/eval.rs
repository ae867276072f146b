//! Closed-loop deployment of encoder policies and the evaluation harness:
//! true vs predicted objective, cost decomposition, terminal deviation, and
//! worst-case task selection.

use crate::encoder::{infer_coefficients_ls, policy_eval, BasisSet, CoefficientVector};
use crate::error::{Error, Result};
use crate::operator::{operator_infer, OperatorNet};
use crate::problems::{
    obstacle_cost, rk4_rollout, sample_initial_state, terminal_cost, ControlProblem, Rollout,
    TaskSpec,
};
use crate::trajopt::{generate_task_dataset, solve_open_loop_batch, SolverOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskTag {
    Seen,
    Interpolation,
    Extrapolation,
}

impl TaskTag {
    pub fn label(&self) -> &'static str {
        match self {
            TaskTag::Seen => "seen",
            TaskTag::Interpolation => "interpolation",
            TaskTag::Extrapolation => "extrapolation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMethod {
    Ls,
    Operator,
}

impl InferenceMethod {
    pub fn label(&self) -> &'static str {
        match self {
            InferenceMethod::Ls => "ls",
            InferenceMethod::Operator => "operator",
        }
    }
}

/// One evaluation task: an id for reporting, the task itself, and its
/// relation to the training grid.
#[derive(Debug, Clone)]
pub struct EvalTask {
    pub id: String,
    pub task: TaskSpec,
    pub tag: TaskTag,
}

#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub method: InferenceMethod,
    pub tasks: Vec<EvalTask>,
    /// Fresh initial states rolled out per task.
    pub n_rollouts: usize,
    pub seed: u64,
    /// Oracle trajectories granted for LS inference on each new task.
    pub ls_budget_trajectories: usize,
    pub lambda_tik: f64,
    pub solver: SolverOptions,
}

impl EvalPlan {
    pub fn new(method: InferenceMethod, tasks: Vec<EvalTask>, n_rollouts: usize, seed: u64) -> Self {
        EvalPlan {
            method,
            tasks,
            n_rollouts,
            seed,
            ls_budget_trajectories: 1,
            lambda_tik: 1e-3,
            solver: SolverOptions::default(),
        }
    }
}

/// Per-task metrics, averaged over the rolled-out initial states.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub task_id: String,
    pub tag: TaskTag,
    pub method: InferenceMethod,
    pub true_objective: f64,
    pub predicted_objective: f64,
    pub control_cost: f64,
    pub obstacle_cost: f64,
    pub terminal_cost: f64,
    pub terminal_deviation: f64,
    pub n_rollouts: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn mean_true_objective(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.true_objective))
    }

    pub fn mean_predicted_objective(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.predicted_objective))
    }

    pub fn mean_terminal_deviation(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.terminal_deviation))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in it {
        s += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Metrics of a single closed-loop rollout. The objective is the exact sum
/// of the three cost components.
#[derive(Debug, Clone)]
pub struct PolicyRollout {
    pub rollout: Rollout,
    pub objective: f64,
    pub control_cost: f64,
    pub obstacle_cost: f64,
    pub terminal_cost: f64,
    pub terminal_deviation: f64,
}

/// Left-endpoint cost decomposition of a rollout under a task.
pub fn rollout_metrics(
    problem: &ControlProblem,
    task: &TaskSpec,
    rollout: Rollout,
) -> Result<PolicyRollout> {
    let h = problem.step_size();
    let mut control = 0.0;
    let mut obstacle = 0.0;
    for k in 0..problem.n_steps {
        control += 0.5 * rollout.controls[k].iter().map(|v| v * v).sum::<f64>() * h;
        obstacle += obstacle_cost(problem, task, &rollout.states[k]) * h;
    }
    let terminal = terminal_cost(problem, task, &rollout.states[problem.n_steps])?;
    let pos = problem.position_dims();
    let deviation = rollout.states[problem.n_steps][..pos]
        .iter()
        .zip(&task.target[..pos])
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(PolicyRollout {
        objective: control + obstacle + terminal,
        control_cost: control,
        obstacle_cost: obstacle,
        terminal_cost: terminal,
        terminal_deviation: deviation,
        rollout,
    })
}

/// Closed-loop deployment: u(x, t) = Σ c_j φ_j(x, t), integrated by RK4
/// with zero-order hold. `NonFiniteState` marks a diverged rollout.
pub fn rollout_policy(
    basis: &BasisSet,
    coeff: &CoefficientVector,
    problem: &ControlProblem,
    task: &TaskSpec,
    x0: &[f64],
) -> Result<PolicyRollout> {
    // fail early on shape problems instead of inside the control closure
    policy_eval(basis, coeff, x0, 0.0)?;
    let rollout = rk4_rollout(problem, x0, |x, t| {
        policy_eval(basis, coeff, x, t).expect("policy dimensions verified before rollout")
    })?;
    rollout_metrics(problem, task, rollout)
}

pub fn derive_seed(base: u64, idx: u64, salt: u64) -> u64 {
    // splitmix64 over the mixed inputs; decorrelates per-task streams
    let mut z = base
        .wrapping_add(idx.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(salt.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything needed to draw one task's evaluation: the policy rollouts and
/// the oracle solutions from the same initial states.
#[derive(Debug, Clone)]
pub struct EvalDetail {
    pub task_id: String,
    pub task: TaskSpec,
    pub policy_rollouts: Vec<PolicyRollout>,
    pub oracle_trajectories: Vec<crate::trajopt::Trajectory>,
}

/// Runs the full comparison: per task, infer coefficients (LS on a fresh
/// oracle dataset of the configured budget, or the operator network), roll
/// out from fresh initial states, and solve the identical states with the
/// oracle. Diverged rollouts are imputed with the zero-control baseline.
pub fn evaluate_plan(
    basis: &BasisSet,
    operator: Option<&OperatorNet>,
    problem: &ControlProblem,
    plan: &EvalPlan,
) -> Result<(EvalReport, Vec<EvalDetail>)> {
    let mut rows = Vec::with_capacity(plan.tasks.len());
    let mut details = Vec::with_capacity(plan.tasks.len());

    for (idx, entry) in plan.tasks.iter().enumerate() {
        let coeff = match plan.method {
            InferenceMethod::Ls => {
                let (dataset, _) = generate_task_dataset(
                    problem,
                    &entry.task,
                    plan.ls_budget_trajectories,
                    derive_seed(plan.seed, idx as u64, 1),
                    &plan.solver,
                )?;
                infer_coefficients_ls(basis, &dataset, plan.lambda_tik)?
            }
            InferenceMethod::Operator => {
                let net = operator.ok_or(Error::Config(
                    "operator inference requested without an operator checkpoint".into(),
                ))?;
                operator_infer(net, basis, &entry.task)?
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, idx as u64, 2));
        let x0s: Vec<Vec<f64>> = (0..plan.n_rollouts)
            .map(|_| sample_initial_state(problem, &mut rng))
            .collect();

        let oracle = solve_open_loop_batch(problem, &entry.task, &x0s, &plan.solver)?;

        let mut policy_rollouts = Vec::with_capacity(x0s.len());
        let mut diverged = 0usize;
        for x0 in &x0s {
            match rollout_policy(basis, &coeff, problem, &entry.task, x0) {
                Ok(pr) => policy_rollouts.push(pr),
                Err(Error::NonFiniteState { .. }) => {
                    // pessimistic imputation: score the diverged start as if
                    // the policy had output zero control
                    diverged += 1;
                    let zero = rk4_rollout(problem, x0, |_, _| vec![0.0; problem.control_dim])?;
                    policy_rollouts.push(rollout_metrics(problem, &entry.task, zero)?);
                }
                Err(e) => return Err(e),
            }
        }

        let n = x0s.len();
        rows.push(EvalRow {
            task_id: entry.id.clone(),
            tag: entry.tag,
            method: plan.method,
            true_objective: mean(oracle.iter().map(|t| t.objective)),
            predicted_objective: mean(policy_rollouts.iter().map(|p| p.objective)),
            control_cost: mean(policy_rollouts.iter().map(|p| p.control_cost)),
            obstacle_cost: mean(policy_rollouts.iter().map(|p| p.obstacle_cost)),
            terminal_cost: mean(policy_rollouts.iter().map(|p| p.terminal_cost)),
            terminal_deviation: mean(policy_rollouts.iter().map(|p| p.terminal_deviation)),
            n_rollouts: n,
            diverged,
        });
        details.push(EvalDetail {
            task_id: entry.id.clone(),
            task: entry.task.clone(),
            policy_rollouts,
            oracle_trajectories: oracle,
        });
    }

    Ok((EvalReport { rows }, details))
}

/// Task ids with the largest predicted − true objective gap, largest first,
/// ties broken by task id. Asking for more than exist returns all.
pub fn worst_case_select(report: &EvalReport, k: usize) -> Vec<String> {
    let mut ranked: Vec<(&EvalRow, f64)> = report
        .rows
        .iter()
        .map(|r| (r, r.predicted_objective - r.true_objective))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.task_id.cmp(&b.0.task_id))
    });
    ranked.into_iter().take(k).map(|(r, _)| r.task_id.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::CoeffSource;
    use crate::nn::{Activation, MlpParams};
    use crate::problems::ProblemKind;
    use crate::trajopt::discretized_objective;
    use crate::trajopt::Quadrature;
    use rand::Rng;

    fn toy_basis(seed: u64) -> BasisSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BasisSet::unnormalized(
            MlpParams::init(3, &[16], 4, 2, Activation::Tanh, &mut rng),
            ProblemKind::PointMass2D,
        )
    }

    fn coeffs(values: Vec<f64>) -> CoefficientVector {
        CoefficientVector { values, source: CoeffSource::Ls }
    }

    #[test]
    fn zero_coefficients_match_zero_control_rollout() {
        let problem = ControlProblem::point_mass_2d();
        let task = TaskSpec::point_mass_target([1.0, 1.0]);
        let basis = toy_basis(1);
        let pr = rollout_policy(&basis, &coeffs(vec![0.0; 4]), &problem, &task, &[-1.5, -1.5])
            .unwrap();
        let zero = rk4_rollout(&problem, &[-1.5, -1.5], |_, _| vec![0.0, 0.0]).unwrap();
        assert_eq!(pr.rollout.states, zero.states);
        assert_eq!(pr.control_cost, 0.0);
    }

    #[test]
    fn rollout_is_deterministic() {
        let problem = ControlProblem::point_mass_2d();
        let task = TaskSpec::point_mass_target([2.0, 1.0]);
        let basis = toy_basis(2);
        let c = coeffs(vec![0.3, -0.5, 0.8, 0.1]);
        let a = rollout_policy(&basis, &c, &problem, &task, &[-1.0, -2.0]).unwrap();
        let b = rollout_policy(&basis, &c, &problem, &task, &[-1.0, -2.0]).unwrap();
        assert_eq!(a.rollout.states, b.rollout.states);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn decomposition_matches_discretized_objective() {
        let problem = ControlProblem::point_mass_2d();
        let task = TaskSpec::point_mass_target([1.5, 2.0]);
        let basis = toy_basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = coeffs((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let pr = rollout_policy(&basis, &c, &problem, &task, &[-1.2, -1.7]).unwrap();
        // identity: components sum to the objective
        let sum = pr.control_cost + pr.obstacle_cost + pr.terminal_cost;
        assert!((sum - pr.objective).abs() < 1e-10);
        // and the objective equals the oracle's quadrature of the same grid
        let reference = discretized_objective(
            &problem,
            &task,
            &pr.rollout.controls,
            &[-1.2, -1.7],
            Quadrature::LeftEndpoint,
        )
        .unwrap();
        assert!((pr.objective - reference).abs() < 1e-10, "{} vs {reference}", pr.objective);
    }

    #[test]
    fn worst_case_ranking_and_ties() {
        let row = |id: &str, gap: f64| EvalRow {
            task_id: id.into(),
            tag: TaskTag::Seen,
            method: InferenceMethod::Ls,
            true_objective: 1.0,
            predicted_objective: 1.0 + gap,
            control_cost: 0.0,
            obstacle_cost: 0.0,
            terminal_cost: 0.0,
            terminal_deviation: 0.0,
            n_rollouts: 1,
            diverged: 0,
        };
        let report = EvalReport {
            rows: vec![row("a", 0.1), row("b", 0.9), row("c", 0.5)],
        };
        assert_eq!(worst_case_select(&report, 1), vec!["b".to_string()]);
        assert_eq!(
            worst_case_select(&report, 10),
            vec!["b".to_string(), "c".to_string(), "a".to_string()]
        );
        let tied = EvalReport {
            rows: vec![row("c", 0.2), row("a", 0.2), row("b", 0.2)],
        };
        assert_eq!(
            worst_case_select(&tied, 2),
            vec!["a".to_string(), "b".to_string()]
        );
    }

    #[test]
    fn empty_plan_gives_empty_report() {
        let problem = ControlProblem::point_mass_2d();
        let basis = toy_basis(4);
        let plan = EvalPlan::new(InferenceMethod::Ls, vec![], 2, 0);
        let (report, details) = evaluate_plan(&basis, None, &problem, &plan).unwrap();
        assert!(report.rows.is_empty());
        assert!(details.is_empty());
    }

    #[test]
    fn operator_method_without_net_is_config_error() {
        let problem = ControlProblem::point_mass_2d();
        let basis = toy_basis(5);
        let plan = EvalPlan::new(
            InferenceMethod::Operator,
            vec![EvalTask {
                id: "t0".into(),
                task: TaskSpec::point_mass_target([1.0, 1.0]),
                tag: TaskTag::Seen,
            }],
            1,
            0,
        );
        match evaluate_plan(&basis, None, &problem, &plan) {
            Err(Error::Config(_)) => {}
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn report_is_reproducible() {
        let problem = ControlProblem::point_mass_2d();
        let basis = toy_basis(6);
        let plan = EvalPlan::new(
            InferenceMethod::Ls,
            vec![EvalTask {
                id: "t0".into(),
                task: TaskSpec::point_mass_target([1.0, 1.0]),
                tag: TaskTag::Seen,
            }],
            2,
            7,
        );
        let (r1, _) = evaluate_plan(&basis, None, &problem, &plan).unwrap();
        let (r2, _) = evaluate_plan(&basis, None, &problem, &plan).unwrap();
        assert_eq!(r1.rows[0].true_objective.to_bits(), r2.rows[0].true_objective.to_bits());
        assert_eq!(
            r1.rows[0].predicted_objective.to_bits(),
            r2.rows[0].predicted_objective.to_bits()
        );
    }
}
