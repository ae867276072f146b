use fe_control::eval::*;
use fe_control::encoder::*;
use fe_control::problems::*;
use fe_control::trajopt::*;

fn main() {
    let problem = ControlProblem::quadcopter_12d();
    let solver = SolverOptions {
        max_iters: 60_000,
        learning_rate: 0.01,
        grad_tol: 5e-2,
        ..Default::default()
    };

    let mut datasets = Vec::new();
    let mut idx = 0u64;
    for &a in &[2.0, 3.0] {
        for &b in &[2.0, 3.0] {
            for &c in &[2.0, 3.0] {
                let task = TaskSpec::quadcopter_target([a, b, c]);
                let t = std::time::Instant::now();
                let (ds, _) =
                    generate_task_dataset(&problem, &task, 50, derive_seed(0, idx, 100), &solver)
                        .expect("datagen");
                println!("datagen corner {idx} [{a},{b},{c}]: {:?}", t.elapsed());
                datasets.push(ds);
                idx += 1;
            }
        }
    }

    let fe = FeTrainConfig {
        basis_count: 64,
        hidden: vec![64, 64],
        steps: 12_000,
        ..FeTrainConfig::default()
    };
    let t = std::time::Instant::now();
    let (basis, losses) = fe_train(&datasets, &fe).expect("fe train");
    println!("fe train: {:?} final loss {:.4e}", t.elapsed(), losses.last().unwrap());

    let targets: Vec<([f64; 3], &str)> = vec![
        ([2.5, 2.5, 2.5], "heldout"),
        ([2.2, 2.7, 2.4], "heldout"),
        ([2.8, 2.3, 2.6], "heldout"),
        ([2.4, 2.4, 2.8], "heldout"),
        ([2.0, 2.0, 2.0], "seen"),
        ([3.0, 3.0, 3.0], "seen"),
    ];
    let tasks: Vec<EvalTask> = targets
        .iter()
        .enumerate()
        .map(|(i, (t, lbl))| EvalTask {
            id: format!("{lbl}_{i}"),
            task: TaskSpec::quadcopter_target(*t),
            tag: TaskTag::Interpolation,
        })
        .collect();
    let mut plan = EvalPlan::new(InferenceMethod::Ls, tasks, 10, 0);
    plan.ls_budget_trajectories = 20;
    plan.solver = solver;
    let t = std::time::Instant::now();
    let (report, details) = evaluate_plan(&basis, None, &problem, &plan).expect("eval");
    println!("eval: {:?}", t.elapsed());
    for (row, det) in report.rows.iter().zip(&details) {
        let mut objs: Vec<f64> = det.policy_rollouts.iter().map(|p| p.objective).collect();
        objs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "{}: true {:.2} pred {:.2} ratio {:.4} diverged {}/{} rollout objs {:?}",
            row.task_id,
            row.true_objective,
            row.predicted_objective,
            row.predicted_objective / row.true_objective,
            row.diverged,
            row.n_rollouts,
            objs.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>()
        );
    }
}
