//! Experiment configuration: a single TOML file drives the whole pipeline.
//! Unknown keys are rejected and every field is validated before any compute.

use crate::encoder::FeTrainConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalTask, InferenceMethod, TaskTag};
use crate::nn::Activation;
use crate::operator::OperatorTrainConfig;
use crate::problems::{ControlProblem, Obstacle, ProblemKind, TaskSpec};
use crate::trajopt::{Quadrature, SolverOptions};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub datagen: DatagenSection,
    pub fe: FeSection,
    #[serde(default)]
    pub operator: Option<OperatorSection>,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// One of "point-mass-2d", "quadcopter-12d", "bicycle-4d".
    pub family: String,
    /// Bicycle only: control-grid resolution (default 50).
    #[serde(default)]
    pub n_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
}

/// One task: a target (point mass / quadcopter) or obstacles (bicycle).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    #[serde(default)]
    pub obstacles: Option<Vec<ObstacleEntry>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatagenSection {
    pub tasks: Vec<TaskEntry>,
    pub n_traj: usize,
    #[serde(default)]
    pub solver: Option<SolverSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    /// Per-iteration learning-rate factor in (0, 1]; 1.0 disables decay.
    #[serde(default)]
    pub lr_decay: Option<f64>,
    #[serde(default)]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub multi_start: Option<usize>,
    /// "left-endpoint" (default) or "trapezoid".
    #[serde(default)]
    pub quadrature: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeSection {
    pub basis_count: usize,
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: String,
    #[serde(default = "default_lambda_tik")]
    pub lambda_tik: f64,
    #[serde(default)]
    pub lambda_basis: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub hidden: Vec<usize>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Subset of {"ls", "operator"}.
    pub methods: Vec<String>,
    pub n_rollouts: usize,
    #[serde(default = "default_ls_budget")]
    pub ls_budget: usize,
    #[serde(default)]
    pub seen: Vec<TaskEntry>,
    #[serde(default)]
    pub interpolation: Vec<TaskEntry>,
    #[serde(default)]
    pub extrapolation: Vec<TaskEntry>,
}

fn default_activation() -> String {
    "tanh".into()
}

fn default_lambda_tik() -> f64 {
    1e-3
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_batch() -> usize {
    256
}

fn default_ls_budget() -> usize {
    1
}

/// Parses and validates a config file; also returns the SHA-256 of its
/// bytes for provenance stamping.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, [u8; 32])> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Config(format!("{}: not valid UTF-8", path.display())))?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok((config, crate::io::sha256_bytes(&bytes)))
}

impl ExperimentConfig {
    pub fn problem_kind(&self) -> Result<ProblemKind> {
        match self.problem.family.as_str() {
            "point-mass-2d" => Ok(ProblemKind::PointMass2D),
            "quadcopter-12d" => Ok(ProblemKind::Quadcopter12D),
            "bicycle-4d" => Ok(ProblemKind::Bicycle4D),
            other => Err(Error::Config(format!(
                "problem.family: unknown family '{other}' (expected point-mass-2d, quadcopter-12d, or bicycle-4d)"
            ))),
        }
    }

    pub fn control_problem(&self) -> Result<ControlProblem> {
        Ok(match self.problem_kind()? {
            ProblemKind::PointMass2D => ControlProblem::point_mass_2d(),
            ProblemKind::Quadcopter12D => ControlProblem::quadcopter_12d(),
            ProblemKind::Bicycle4D => ControlProblem::bicycle_4d(self.problem.n_steps.unwrap_or(50)),
        })
    }

    pub fn task_spec(&self, entry: &TaskEntry) -> Result<TaskSpec> {
        let kind = self.problem_kind()?;
        match kind {
            ProblemKind::PointMass2D | ProblemKind::Quadcopter12D => {
                let want = if kind == ProblemKind::PointMass2D { 2 } else { 3 };
                let target = entry.target.as_ref().ok_or_else(|| {
                    Error::Config(format!("task for {} must set 'target'", self.problem.family))
                })?;
                if entry.obstacles.is_some() {
                    return Err(Error::Config(format!(
                        "task for {} must not set 'obstacles'",
                        self.problem.family
                    )));
                }
                if target.len() != want {
                    return Err(Error::Config(format!(
                        "target for {} needs {want} coordinates, got {}",
                        self.problem.family,
                        target.len()
                    )));
                }
                Ok(if kind == ProblemKind::PointMass2D {
                    TaskSpec::point_mass_target([target[0], target[1]])
                } else {
                    TaskSpec::quadcopter_target([target[0], target[1], target[2]])
                })
            }
            ProblemKind::Bicycle4D => {
                if entry.target.is_some() {
                    return Err(Error::Config(
                        "bicycle tasks have a fixed target; set 'obstacles' instead".into(),
                    ));
                }
                let obstacles = entry.obstacles.as_ref().ok_or_else(|| {
                    Error::Config("bicycle task must set 'obstacles'".into())
                })?;
                if obstacles.is_empty() || obstacles.len() > 2 {
                    return Err(Error::Config(format!(
                        "bicycle tasks carry 1 or 2 obstacles, got {}",
                        obstacles.len()
                    )));
                }
                for o in obstacles {
                    if o.width <= 0.0 {
                        return Err(Error::Config("obstacle width must be positive".into()));
                    }
                }
                Ok(TaskSpec::bicycle_obstacles(
                    obstacles
                        .iter()
                        .map(|o| Obstacle {
                            amplitude: o.amplitude,
                            center: o.center,
                            width: o.width,
                        })
                        .collect(),
                ))
            }
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let mut opts = SolverOptions { seed: self.seed, ..SolverOptions::default() };
        if let Some(s) = &self.datagen.solver {
            if let Some(v) = s.max_iters {
                opts.max_iters = v;
            }
            if let Some(v) = s.learning_rate {
                opts.learning_rate = v;
            }
            if let Some(v) = s.lr_decay {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::Config(format!(
                        "datagen.solver.lr_decay: {v} outside (0, 1]"
                    )));
                }
                opts.lr_decay = v;
            }
            if let Some(v) = s.grad_tol {
                opts.grad_tol = v;
            }
            if let Some(v) = s.multi_start {
                opts.multi_start = v;
            }
            if let Some(q) = &s.quadrature {
                opts.quadrature = match q.as_str() {
                    "left-endpoint" => Quadrature::LeftEndpoint,
                    "trapezoid" => Quadrature::Trapezoid,
                    other => {
                        return Err(Error::Config(format!(
                            "datagen.solver.quadrature: unknown rule '{other}'"
                        )))
                    }
                };
            }
        }
        Ok(opts)
    }

    pub fn activation(&self) -> Result<Activation> {
        match self.fe.activation.as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            other => Err(Error::Config(format!("fe.activation: unknown activation '{other}'"))),
        }
    }

    pub fn fe_train_config(&self) -> Result<FeTrainConfig> {
        Ok(FeTrainConfig {
            basis_count: self.fe.basis_count,
            hidden: self.fe.hidden.clone(),
            activation: self.activation()?,
            lambda_basis: self.fe.lambda_basis,
            lambda_tik: self.fe.lambda_tik,
            learning_rate: self.fe.learning_rate,
            steps: self.fe.steps,
            batch: self.fe.batch,
            seed: self.seed,
            detach_coefficients: false,
        })
    }

    pub fn operator_train_config(&self) -> Result<OperatorTrainConfig> {
        let section = self.operator.as_ref().ok_or_else(|| {
            Error::Config("missing [operator] section required by this command".into())
        })?;
        Ok(OperatorTrainConfig {
            hidden: section.hidden.clone(),
            learning_rate: section.learning_rate,
            steps: section.steps,
            seed: self.seed,
            lambda_tik: self.fe.lambda_tik,
        })
    }

    pub fn eval_methods(&self) -> Result<Vec<InferenceMethod>> {
        self.eval
            .methods
            .iter()
            .map(|m| match m.as_str() {
                "ls" => Ok(InferenceMethod::Ls),
                "operator" => Ok(InferenceMethod::Operator),
                other => Err(Error::Config(format!(
                    "eval.methods: unknown method '{other}' (expected ls or operator)"
                ))),
            })
            .collect()
    }

    /// All evaluation tasks with ids "{tag}_{index}".
    pub fn eval_tasks(&self) -> Result<Vec<EvalTask>> {
        let groups = [
            (TaskTag::Seen, &self.eval.seen),
            (TaskTag::Interpolation, &self.eval.interpolation),
            (TaskTag::Extrapolation, &self.eval.extrapolation),
        ];
        let mut out = Vec::new();
        for (tag, entries) in groups {
            for (i, entry) in entries.iter().enumerate() {
                out.push(EvalTask {
                    id: format!("{}_{i}", tag.label()),
                    task: self.task_spec(entry)?,
                    tag,
                });
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem_kind()?;
        self.activation()?;
        self.solver_options()?;
        self.eval_methods()?;
        if self.datagen.tasks.is_empty() {
            return Err(Error::Config("datagen.tasks must not be empty".into()));
        }
        if self.datagen.n_traj == 0 {
            return Err(Error::Config("datagen.n_traj must be at least 1".into()));
        }
        if self.fe.basis_count == 0 {
            return Err(Error::Config("fe.basis_count must be at least 1".into()));
        }
        if self.fe.batch == 0 {
            return Err(Error::Config("fe.batch must be at least 1".into()));
        }
        if self.eval.ls_budget == 0 {
            return Err(Error::Config("eval.ls_budget must be at least 1".into()));
        }
        for entry in &self.datagen.tasks {
            self.task_spec(entry)?;
        }
        self.eval_tasks()?;
        if self.eval_methods()?.contains(&InferenceMethod::Operator) && self.operator.is_none() {
            return Err(Error::Config(
                "eval.methods includes 'operator' but the [operator] section is missing".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const GOOD: &str = r#"
out_dir = "/tmp/run"
seed = 7

[problem]
family = "point-mass-2d"

[datagen]
tasks = [{ target = [1.0, 1.0] }, { target = [2.0, 2.0] }]
n_traj = 5

[fe]
basis_count = 8
hidden = [32, 32]
steps = 100

[operator]
hidden = [16]
steps = 50

[eval]
methods = ["ls", "operator"]
n_rollouts = 3
seen = [{ target = [1.0, 1.0] }]
interpolation = [{ target = [1.5, 1.5] }]
extrapolation = [{ target = [2.5, 2.5] }]
"#;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn good_config_parses_and_validates() {
        let f = write_config(GOOD);
        let (config, hash) = load_config(f.path()).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.fe.basis_count, 8);
        assert_eq!(config.fe.batch, 256); // default
        assert_eq!(config.eval_tasks().unwrap().len(), 3);
        assert_ne!(hash, [0u8; 32]);
    }

    #[test]
    fn unknown_key_rejected() {
        let f = write_config(&GOOD.replace("seed = 7", "seed = 7\nbogus_key = 1"));
        match load_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("bogus_key"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_target_dimension_rejected() {
        let f = write_config(&GOOD.replace("{ target = [1.5, 1.5] }", "{ target = [1.5] }"));
        match load_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("coordinates"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn operator_method_requires_operator_section() {
        let stripped = GOOD
            .replace("[operator]\nhidden = [16]\nsteps = 50\n", "")
            .replace("methods = [\"ls\", \"operator\"]", "methods = [\"ls\", \"operator\"]");
        let f = write_config(&stripped);
        match load_config(f.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("[operator]"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn bicycle_task_validation() {
        let text = GOOD
            .replace("family = \"point-mass-2d\"", "family = \"bicycle-4d\"")
            .replace(
                "tasks = [{ target = [1.0, 1.0] }, { target = [2.0, 2.0] }]",
                "tasks = [{ obstacles = [{ amplitude = 30.0, center = [2.0, 2.0], width = 0.5 }] }]",
            )
            .replace(
                "seen = [{ target = [1.0, 1.0] }]",
                "seen = [{ obstacles = [{ amplitude = 30.0, center = [2.0, 2.0], width = 0.5 }] }]",
            )
            .replace("interpolation = [{ target = [1.5, 1.5] }]", "interpolation = []")
            .replace("extrapolation = [{ target = [2.5, 2.5] }]", "extrapolation = []")
            .replace("methods = [\"ls\", \"operator\"]", "methods = [\"ls\"]");
        let f = write_config(&text);
        let (config, _) = load_config(f.path()).unwrap();
        let problem = config.control_problem().unwrap();
        assert_eq!(problem.n_steps, 50);
        let task = config.task_spec(&config.datagen.tasks[0]).unwrap();
        assert_eq!(task.obstacles.len(), 1);

        // a bicycle task with a target is a config error
        let bad = text.replace(
            "tasks = [{ obstacles = [{ amplitude = 30.0, center = [2.0, 2.0], width = 0.5 }] }]",
            "tasks = [{ target = [1.0, 1.0] }]",
        );
        let f2 = write_config(&bad);
        match load_config(f2.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("obstacles"), "{msg}"),
            other => panic!("expected Config error, got {other:?}"),
        }
    }
}
