//! Command-line surface: datagen → train-fe → train-op → eval → plot, plus
//! one-off inference and rollout commands. Exit codes: 0 success, 1 runtime
//! failure, 2 configuration error.

use crate::config::{load_config, ExperimentConfig};
use crate::encoder::{fe_train, infer_coefficients_ls, BasisSet, TaskDataset};
use crate::error::{Error, Result};
use crate::eval::{
    derive_seed, evaluate_plan, rollout_policy, worst_case_select, EvalPlan, EvalReport,
    InferenceMethod,
};
use crate::io::{
    append_manifest, hex, load_checkpoint, load_dataset, save_checkpoint, save_dataset,
    write_report_csv, Checkpoint, CheckpointPayload, Provenance,
};
use crate::operator::{operator_infer, operator_train, OperatorNet};
use crate::plot::emit_svg_plots;
use crate::problems::sample_initial_state;
use crate::trajopt::generate_task_dataset;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "fe-control", about = "Transferable feedback policies for parametric optimal control", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the training tasks with the oracle and persist the datasets.
    Datagen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the basis functions on the generated datasets.
    TrainFe {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the task-to-coefficients operator against the frozen basis.
    TrainOp {
        #[arg(long)]
        config: PathBuf,
    },
    /// Least-squares coefficient inference from a dataset file.
    InferLs {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Data-free coefficient inference for an evaluation task id.
    InferOp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        task_id: String,
    },
    /// Closed-loop rollout of the learned policy on one task.
    Rollout {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        task_id: String,
        #[arg(long, default_value = "ls")]
        method: String,
        /// Comma-separated initial state; sampled from the problem's
        /// distribution when omitted.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
    },
    /// Full comparison against the oracle; writes report.csv.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// One SVG per evaluation group (seen/interpolation/extrapolation).
    Plot {
        #[arg(long)]
        config: PathBuf,
    },
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; parse failures are config errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Error::Config(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Datagen { config } => cmd_datagen(&config),
        Command::TrainFe { config } => cmd_train_fe(&config),
        Command::TrainOp { config } => cmd_train_op(&config),
        Command::InferLs { config, dataset } => cmd_infer_ls(&config, &dataset),
        Command::InferOp { config, task_id } => cmd_infer_op(&config, &task_id),
        Command::Rollout { config, task_id, method, x0 } => {
            cmd_rollout(&config, &task_id, &method, x0.as_deref())
        }
        Command::Eval { config } => cmd_eval(&config),
        Command::Plot { config } => cmd_plot(&config),
    }
}

fn dataset_dir(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.join("datasets")
}

fn dataset_path(config: &ExperimentConfig, idx: usize) -> PathBuf {
    dataset_dir(config).join(format!("task_{idx:03}.feds"))
}

fn basis_path(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.join("basis.feck")
}

fn operator_path(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.join("operator.feck")
}

fn manifest_line(config: &ExperimentConfig, hash: &[u8; 32], cmd: &str, detail: &str) -> Result<()> {
    append_manifest(
        &config.out_dir,
        &format!(
            "cmd={cmd} config_sha256={} seed={} version={} {detail}",
            hex(hash),
            config.seed,
            env!("CARGO_PKG_VERSION"),
        ),
    )
}

fn load_basis(config: &ExperimentConfig) -> Result<BasisSet> {
    let path = basis_path(config);
    if !path.exists() {
        return Err(Error::Config(format!(
            "basis checkpoint missing at {} — run train-fe first",
            path.display()
        )));
    }
    match load_checkpoint(&path)?.payload {
        CheckpointPayload::Basis(basis) => {
            if basis.problem_kind != config.problem_kind()? {
                return Err(Error::Config(format!(
                    "basis checkpoint at {} was trained on a different problem family",
                    path.display()
                )));
            }
            Ok(basis)
        }
        _ => Err(Error::Config(format!(
            "{} is not a basis checkpoint",
            path.display()
        ))),
    }
}

fn load_operator(config: &ExperimentConfig) -> Result<OperatorNet> {
    let path = operator_path(config);
    if !path.exists() {
        return Err(Error::Config(format!(
            "operator checkpoint missing at {} — run train-op first",
            path.display()
        )));
    }
    match load_checkpoint(&path)?.payload {
        CheckpointPayload::Operator { net, problem_kind } => {
            if problem_kind != config.problem_kind()? {
                return Err(Error::Config(format!(
                    "operator checkpoint at {} was trained on a different problem family",
                    path.display()
                )));
            }
            Ok(net)
        }
        _ => Err(Error::Config(format!(
            "{} is not an operator checkpoint",
            path.display()
        ))),
    }
}

fn load_training_datasets(config: &ExperimentConfig) -> Result<Vec<TaskDataset>> {
    let mut datasets = Vec::with_capacity(config.datagen.tasks.len());
    for idx in 0..config.datagen.tasks.len() {
        let path = dataset_path(config, idx);
        if !path.exists() {
            return Err(Error::Config(format!(
                "dataset missing at {} — run datagen first",
                path.display()
            )));
        }
        let (dataset, _) = load_dataset(&path)?;
        if dataset.problem_kind != config.problem_kind()? {
            return Err(Error::Config(format!(
                "dataset at {} belongs to a different problem family",
                path.display()
            )));
        }
        datasets.push(dataset);
    }
    Ok(datasets)
}

fn cmd_datagen(config_path: &Path) -> Result<()> {
    let (config, hash) = load_config(config_path)?;
    let problem = config.control_problem()?;
    let opts = config.solver_options()?;
    std::fs::create_dir_all(dataset_dir(&config))?;
    for (idx, entry) in config.datagen.tasks.iter().enumerate() {
        let task = config.task_spec(entry)?;
        let seed = derive_seed(config.seed, idx as u64, 100);
        let (dataset, trajectories) =
            generate_task_dataset(&problem, &task, config.datagen.n_traj, seed, &opts)?;
        let path = dataset_path(&config, idx);
        save_dataset(&dataset, &problem, seed, &path)?;
        println!(
            "task {idx}: {} trajectories, {} samples, mean objective {:.4} -> {}",
            trajectories.len(),
            dataset.len(),
            dataset.trajectory_objectives.iter().sum::<f64>()
                / dataset.trajectory_objectives.len() as f64,
            path.display()
        );
    }
    manifest_line(&config, &hash, "datagen", &format!("tasks={}", config.datagen.tasks.len()))
}

fn cmd_train_fe(config_path: &Path) -> Result<()> {
    let (config, hash) = load_config(config_path)?;
    let datasets = load_training_datasets(&config)?;
    let fe_config = config.fe_train_config()?;
    let (basis, losses) = fe_train(&datasets, &fe_config)?;
    let path = basis_path(&config);
    save_checkpoint(
        &Checkpoint {
            payload: CheckpointPayload::Basis(basis),
            provenance: Provenance {
                config_hash: hash,
                seed: config.seed,
                steps: fe_config.steps as u64,
            },
        },
        &path,
    )?;
    println!(
        "trained {} bases for {} steps; loss {:.6e} -> {:.6e}; saved {}",
        fe_config.basis_count,
        fe_config.steps,
        losses.first().copied().unwrap_or(f64::NAN),
        losses.last().copied().unwrap_or(f64::NAN),
        path.display()
    );
    manifest_line(&config, &hash, "train-fe", &format!("steps={}", fe_config.steps))
}

fn cmd_train_op(config_path: &Path) -> Result<()> {
    let (config, hash) = load_config(config_path)?;
    let op_config = config.operator_train_config()?;
    let basis = load_basis(&config)?;
    let datasets = load_training_datasets(&config)?;
    let pairs: Vec<_> = datasets
        .into_iter()
        .map(|d| (d.task.clone(), d))
        .collect();
    let (net, final_loss) = operator_train(&basis, &pairs, &op_config)?;
    let path = operator_path(&config);
    save_checkpoint(
        &Checkpoint {
            payload: CheckpointPayload::Operator {
                net,
                problem_kind: config.problem_kind()?,
            },
            provenance: Provenance {
                config_hash: hash,
                seed: config.seed,
                steps: op_config.steps as u64,
            },
        },
        &path,
    )?;
    println!(
        "trained operator for {} steps; final coefficient MSE {final_loss:.6e}; saved {}",
        op_config.steps,
        path.display()
    );
    manifest_line(&config, &hash, "train-op", &format!("steps={}", op_config.steps))
}

fn print_coefficients(values: &[f64]) {
    let rendered: Vec<String> = values.iter().map(|v| format!("{v:.6e}")).collect();
    println!("[{}]", rendered.join(", "));
}

fn cmd_infer_ls(config_path: &Path, dataset_path: &Path) -> Result<()> {
    let (config, _) = load_config(config_path)?;
    let basis = load_basis(&config)?;
    let (dataset, _) = load_dataset(dataset_path)?;
    let coeff = infer_coefficients_ls(&basis, &dataset, config.fe.lambda_tik)?;
    print_coefficients(&coeff.values);
    Ok(())
}

fn find_eval_task(config: &ExperimentConfig, task_id: &str) -> Result<crate::eval::EvalTask> {
    config
        .eval_tasks()?
        .into_iter()
        .find(|t| t.id == task_id)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown task id '{task_id}' (expected one of the eval section's '<group>_<index>' ids)"
            ))
        })
}

fn cmd_infer_op(config_path: &Path, task_id: &str) -> Result<()> {
    let (config, _) = load_config(config_path)?;
    let basis = load_basis(&config)?;
    let net = load_operator(&config)?;
    let entry = find_eval_task(&config, task_id)?;
    let coeff = operator_infer(&net, &basis, &entry.task)?;
    print_coefficients(&coeff.values);
    Ok(())
}

fn cmd_rollout(
    config_path: &Path,
    task_id: &str,
    method: &str,
    x0_text: Option<&str>,
) -> Result<()> {
    let (config, _) = load_config(config_path)?;
    let problem = config.control_problem()?;
    let basis = load_basis(&config)?;
    let entry = find_eval_task(&config, task_id)?;

    let coeff = match method {
        "ls" => {
            let (dataset, _) = generate_task_dataset(
                &problem,
                &entry.task,
                config.eval.ls_budget,
                derive_seed(config.seed, 0, 3),
                &config.solver_options()?,
            )?;
            infer_coefficients_ls(&basis, &dataset, config.fe.lambda_tik)?
        }
        "operator" => operator_infer(&load_operator(&config)?, &basis, &entry.task)?,
        other => return Err(Error::Config(format!("unknown method '{other}'"))),
    };

    let x0 = match x0_text {
        Some(text) => {
            let parsed: std::result::Result<Vec<f64>, _> =
                text.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let x0 = parsed.map_err(|e| Error::Config(format!("--x0: {e}")))?;
            if x0.len() != problem.state_dim {
                return Err(Error::Config(format!(
                    "--x0 needs {} components, got {}",
                    problem.state_dim,
                    x0.len()
                )));
            }
            x0
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            sample_initial_state(&problem, &mut rng)
        }
    };

    let pr = rollout_policy(&basis, &coeff, &problem, &entry.task, &x0)?;
    println!("task {task_id} ({method}) from x0 = {x0:?}");
    println!("  objective           {:.6}", pr.objective);
    println!("  control cost        {:.6}", pr.control_cost);
    println!("  obstacle cost       {:.6}", pr.obstacle_cost);
    println!("  terminal cost       {:.6}", pr.terminal_cost);
    println!("  terminal deviation  {:.6}", pr.terminal_deviation);
    Ok(())
}

/// Runs every configured method over the eval tasks; rows for all methods
/// land in one report.
fn run_full_eval(
    config: &ExperimentConfig,
) -> Result<(EvalReport, Vec<(String, Vec<crate::eval::EvalDetail>)>)> {
    let problem = config.control_problem()?;
    let basis = load_basis(config)?;
    let methods = config.eval_methods()?;
    let operator = if methods.contains(&InferenceMethod::Operator) {
        Some(load_operator(config)?)
    } else {
        None
    };
    let tasks = config.eval_tasks()?;

    let mut rows = Vec::new();
    let mut groups: Vec<(String, Vec<crate::eval::EvalDetail>)> = Vec::new();
    for method in methods {
        let mut plan = EvalPlan::new(method, tasks.clone(), config.eval.n_rollouts, config.seed);
        plan.ls_budget_trajectories = config.eval.ls_budget;
        plan.lambda_tik = config.fe.lambda_tik;
        plan.solver = config.solver_options()?;
        let (report, details) = evaluate_plan(&basis, operator.as_ref(), &problem, &plan)?;
        // group plot material by tag, first method only (plots compare
        // trajectories, not inference variants)
        if groups.is_empty() {
            for (row, detail) in report.rows.iter().zip(details) {
                match groups.iter_mut().find(|(name, _)| *name == row.tag.label()) {
                    Some((_, list)) => list.push(detail),
                    None => groups.push((row.tag.label().to_string(), vec![detail])),
                }
            }
        }
        rows.extend(report.rows);
    }
    Ok((EvalReport { rows }, groups))
}

fn cmd_eval(config_path: &Path) -> Result<()> {
    let (config, hash) = load_config(config_path)?;
    let (report, _) = run_full_eval(&config)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join("report.csv");
    write_report_csv(&report, &path)?;
    for r in &report.rows {
        println!(
            "{:<20} {:<8} true {:.4}  predicted {:.4}  term.dev {:.4}  diverged {}",
            r.task_id, r.method.label(), r.true_objective, r.predicted_objective,
            r.terminal_deviation, r.diverged
        );
    }
    let worst = worst_case_select(&report, 3);
    println!("worst tasks by objective gap: {worst:?}");
    println!("report written to {}", path.display());
    manifest_line(&config, &hash, "eval", &format!("rows={}", report.rows.len()))
}

fn cmd_plot(config_path: &Path) -> Result<()> {
    let (config, hash) = load_config(config_path)?;
    let problem = config.control_problem()?;
    let (_, groups) = run_full_eval(&config)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let files = emit_svg_plots(&groups, &problem, &config.out_dir)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    manifest_line(&config, &hash, "plot", &format!("files={}", files.len()))
}
