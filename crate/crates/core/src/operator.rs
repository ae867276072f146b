//! Operator network: a direct mapping from the task specification to
//! basis coefficients, enabling data-free online adaptation for compactly
//! parameterized (target-location) tasks.

use crate::autodiff::Tape;
use crate::encoder::{infer_coefficients_ls, BasisSet, CoeffSource, CoefficientVector, TaskDataset};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::nn::{Activation, MlpParams};
use crate::optim::{adam_step, AdamState};
use crate::problems::{ProblemKind, TaskKind, TaskSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trained mapping eta -> c, bound to one basis set by checksum.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorNet {
    pub params: MlpParams,
    /// Bounding box of the training targets, used to normalize eta to [0,1]^d.
    pub eta_lo: Vec<f64>,
    pub eta_hi: Vec<f64>,
    pub basis_checksum: [u8; 32],
}

#[derive(Debug, Clone)]
pub struct OperatorTrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub lambda_tik: f64,
}

impl Default for OperatorTrainConfig {
    fn default() -> Self {
        OperatorTrainConfig {
            hidden: vec![64, 64, 64],
            learning_rate: 1e-3,
            steps: 4000,
            seed: 0,
            lambda_tik: 1e-3,
        }
    }
}

/// Number of free target coordinates for a problem family.
pub fn eta_dim(kind: ProblemKind) -> Result<usize> {
    match kind {
        ProblemKind::PointMass2D => Ok(2),
        ProblemKind::Quadcopter12D => Ok(3),
        ProblemKind::Bicycle4D => Err(Error::UnsupportedTaskKind(
            "bicycle tasks are obstacle-parameterized; use LS inference".into(),
        )),
    }
}

/// Raw eta vector: the target's free coordinates. Obstacle-parameterized
/// tasks are rejected.
pub fn raw_eta(kind: ProblemKind, task: &TaskSpec) -> Result<Vec<f64>> {
    if task.kind != TaskKind::Target {
        return Err(Error::UnsupportedTaskKind(format!("{:?}", task.kind)));
    }
    let d = eta_dim(kind)?;
    Ok(task.target[..d].to_vec())
}

/// Normalizes the target's free coordinates to the training grid's
/// bounding box: lo -> 0, hi -> 1.
pub fn encode_eta(
    kind: ProblemKind,
    task: &TaskSpec,
    lo: &[f64],
    hi: &[f64],
) -> Result<Vec<f64>> {
    let eta = raw_eta(kind, task)?;
    Ok(eta
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| if h > l { (v - l) / (h - l) } else { v - l })
        .collect())
}

/// Trains the operator on (task, dataset) pairs against a frozen basis.
/// The per-task target coefficients come from the LS projection and are
/// computed once up front.
pub fn operator_train(
    basis: &BasisSet,
    pairs: &[(TaskSpec, TaskDataset)],
    config: &OperatorTrainConfig,
) -> Result<(OperatorNet, f64)> {
    assert!(pairs.len() >= 2, "operator training needs at least two tasks");
    let kind = basis.problem_kind;
    let d = eta_dim(kind)?;
    let p = basis.basis_count();

    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (task, _) in pairs {
        for (i, v) in raw_eta(kind, task)?.iter().enumerate() {
            lo[i] = lo[i].min(*v);
            hi[i] = hi[i].max(*v);
        }
    }

    // cached target coefficients, one LS solve per task
    let mut inputs = Vec::with_capacity(pairs.len() * d);
    let mut targets = Vec::with_capacity(pairs.len() * p);
    for (task, dataset) in pairs {
        inputs.extend(encode_eta(kind, task, &lo, &hi)?);
        targets.extend(infer_coefficients_ls(basis, dataset, config.lambda_tik)?.values);
    }
    let x = DenseMatrix::from_vec(pairs.len(), d, inputs);
    let y = DenseMatrix::from_vec(pairs.len(), p, targets);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::init(d, &config.hidden, 1, p, Activation::Tanh, &mut rng);
    let mut adam = AdamState::new(params.param_count(), config.learning_rate);
    let mut final_loss = f64::NAN;

    for step in 0..config.steps {
        let mut tape = Tape::new();
        let leaves = params.tape_leaves(&mut tape);
        let xin = tape.constant(x.clone());
        let pred = params.forward_with_leaves(&mut tape, xin, &leaves);
        let yin = tape.constant(y.clone());
        let diff = tape.sub(yin, pred);
        let sq = tape.sumsq(diff);
        let loss = tape.scale(sq, 1.0 / pairs.len() as f64);
        final_loss = tape.scalar(loss);
        if !final_loss.is_finite() {
            return Err(Error::DivergedTraining { step });
        }
        let grad = tape.grad_vector(loss, &leaves);
        let mut flat = params.flatten();
        adam_step(&mut flat, &grad, &mut adam);
        params.unflatten_into(&flat);
    }
    if config.steps == 0 {
        final_loss = f64::INFINITY;
    }

    Ok((
        OperatorNet { params, eta_lo: lo, eta_hi: hi, basis_checksum: basis.checksum() },
        final_loss,
    ))
}

/// Data-free inference: c = psi(eta).
pub fn operator_infer(
    net: &OperatorNet,
    basis: &BasisSet,
    task: &TaskSpec,
) -> Result<CoefficientVector> {
    if net.basis_checksum != basis.checksum() {
        return Err(Error::BasisMismatch);
    }
    let eta = encode_eta(basis.problem_kind, task, &net.eta_lo, &net.eta_hi)?;
    let out = net.params.forward(&eta)?;
    Ok(CoefficientVector { values: out.data().to_vec(), source: CoeffSource::Operator })
}
