//! Function encoder: trains a set of neural basis functions spanning the
//! control-policy space, and projects new tasks onto that span by
//! Tikhonov-regularized least squares over observed state-action samples.

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::linalg::{mat_solve_spd, DenseMatrix};
use crate::nn::{Activation, MlpParams};
use crate::optim::{adam_step, AdamState};
use crate::problems::{ProblemKind, TaskSpec};
use rand::{seq::index::sample as sample_indices, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One labeled observation: the control the expert applied at (x, t).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub time: f64,
    pub control: Vec<f64>,
}

/// All labeled samples for one task; the unit of training and LS inference.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub problem_kind: ProblemKind,
    pub task: TaskSpec,
    pub samples: Vec<Sample>,
    pub trajectory_objectives: Vec<f64>,
}

impl TaskDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffSource {
    Ls,
    Operator,
}

/// Task-specific coefficients over the trained basis set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
    pub source: CoeffSource,
}

/// A trained set of `p` basis functions (x, t) -> R^m sharing one trunk.
/// Inputs are standardized per dimension before the trunk; the statistics
/// are frozen at training time and travel with the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub params: MlpParams,
    pub problem_kind: ProblemKind,
    /// Per-dimension mean of the (x, t) training inputs.
    pub input_mean: Vec<f64>,
    /// Per-dimension standard deviation of the (x, t) training inputs,
    /// floored away from zero.
    pub input_std: Vec<f64>,
}

impl BasisSet {
    /// Basis with identity input normalization (mean 0, std 1).
    pub fn unnormalized(params: MlpParams, problem_kind: ProblemKind) -> Self {
        let d = params.input_dim();
        BasisSet { params, problem_kind, input_mean: vec![0.0; d], input_std: vec![1.0; d] }
    }

    pub fn basis_count(&self) -> usize {
        self.params.head_count
    }

    pub fn control_dim(&self) -> usize {
        self.params.head_dim
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    /// Evaluates all p basis functions at (x, t): row j is phi_j(x, t).
    pub fn eval(&self, state: &[f64], time: f64) -> Result<DenseMatrix> {
        let mut input = Vec::with_capacity(state.len() + 1);
        input.extend_from_slice(state);
        input.push(time);
        if input.len() != self.input_mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis input length {} vs normalization length {}",
                input.len(),
                self.input_mean.len()
            )));
        }
        for (i, v) in input.iter_mut().enumerate() {
            *v = (*v - self.input_mean[i]) / self.input_std[i];
        }
        self.params.forward(&input)
    }

    /// SHA-256 over architecture and parameters; operator checkpoints are
    /// bound to this value.
    pub fn checksum(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update([self.problem_kind.tag(), self.params.activation.tag()]);
        h.update((self.params.head_count as u64).to_le_bytes());
        h.update((self.params.head_dim as u64).to_le_bytes());
        for v in self.input_mean.iter().chain(&self.input_std) {
            h.update(v.to_le_bytes());
        }
        for layer in &self.params.layers {
            h.update((layer.weight.rows() as u64).to_le_bytes());
            h.update((layer.weight.cols() as u64).to_le_bytes());
            for v in layer.weight.data() {
                h.update(v.to_le_bytes());
            }
            for v in &layer.bias {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

#[derive(Debug, Clone)]
pub struct FeTrainConfig {
    pub basis_count: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Alg-style basis-norm regularizer weight; off by default.
    pub lambda_basis: f64,
    /// Tikhonov shift on the Gram matrix, shared between training and inference.
    pub lambda_tik: f64,
    pub learning_rate: f64,
    pub steps: usize,
    /// Samples per task per step; tasks with fewer samples use them all.
    pub batch: usize,
    pub seed: u64,
    /// When true, coefficients are treated as constants during the backward
    /// pass (ablation switch); default false routes gradients through the
    /// closed-form solve.
    pub detach_coefficients: bool,
}

impl Default for FeTrainConfig {
    fn default() -> Self {
        FeTrainConfig {
            basis_count: 64,
            hidden: vec![128, 128, 128],
            activation: Activation::Tanh,
            lambda_basis: 0.0,
            lambda_tik: 1e-3,
            learning_rate: 1e-3,
            steps: 10_000,
            batch: 256,
            seed: 0,
            detach_coefficients: false,
        }
    }
}

/// Empirical Gram matrix and right-hand side over the dataset:
/// G[j,k] = (1/M) sum_i <phi_j, phi_k>, r[j] = (1/M) sum_i <u_i, phi_j>.
pub fn gram_and_rhs(basis: &BasisSet, dataset: &TaskDataset) -> Result<(DenseMatrix, Vec<f64>)> {
    assert!(!dataset.is_empty(), "gram_and_rhs needs at least one sample");
    let p = basis.basis_count();
    let m = basis.control_dim();
    let big_m = dataset.len();
    // Phi is (M*m, p): row (i, d) column j holds phi_j(x_i, t_i)[d]
    let mut phi = DenseMatrix::zeros(big_m * m, p);
    let mut u_flat = vec![0.0; big_m * m];
    for (i, s) in dataset.samples.iter().enumerate() {
        let e = basis.eval(&s.state, s.time)?;
        for j in 0..p {
            for d in 0..m {
                phi.set(i * m + d, j, e.get(j, d));
            }
        }
        u_flat[i * m..(i + 1) * m].copy_from_slice(&s.control);
    }
    let mut gram = phi.transpose().matmul(&phi);
    for v in gram.data_mut() {
        *v /= big_m as f64;
    }
    let phit_u = phi.transpose().matmul(&DenseMatrix::column(u_flat));
    let rhs = phit_u.data().iter().map(|v| v / big_m as f64).collect();
    Ok((gram, rhs))
}

fn solve_regularized(gram: &DenseMatrix, rhs: &[f64], lambda_tik: f64) -> Result<Vec<f64>> {
    assert!(lambda_tik > 0.0, "Tikhonov shift must be positive");
    let mut lambda = lambda_tik;
    let b = DenseMatrix::column(rhs.to_vec());
    for attempt in 0..4 {
        let mut a = gram.clone();
        for i in 0..a.rows() {
            let v = a.get(i, i) + lambda;
            a.set(i, i, v);
        }
        match mat_solve_spd(&a, &b) {
            Ok(x) => return Ok(x.data().to_vec()),
            Err(Error::NotPositiveDefinite { .. }) if attempt < 3 => lambda *= 10.0,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// Zero-shot LS inference: c = (G + lambda I)^{-1} r, retrying with a 10x
/// larger shift whenever the factorization reports an indefinite matrix.
pub fn infer_coefficients_ls(
    basis: &BasisSet,
    dataset: &TaskDataset,
    lambda_tik: f64,
) -> Result<CoefficientVector> {
    let (gram, rhs) = gram_and_rhs(basis, dataset)?;
    let values = solve_regularized(&gram, &rhs, lambda_tik)?;
    Ok(CoefficientVector { values, source: CoeffSource::Ls })
}

/// Feedback policy evaluation: u(x, t) = sum_j c_j phi_j(x, t).
pub fn policy_eval(basis: &BasisSet, coeff: &CoefficientVector, state: &[f64], time: f64) -> Result<Vec<f64>> {
    if coeff.values.len() != basis.basis_count() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient length {} vs basis count {}",
            coeff.values.len(),
            basis.basis_count()
        )));
    }
    let e = basis.eval(state, time)?;
    let m = basis.control_dim();
    let mut u = vec![0.0; m];
    for (j, &c) in coeff.values.iter().enumerate() {
        for d in 0..m {
            u[d] += c * e.get(j, d);
        }
    }
    Ok(u)
}

fn input_matrix(samples: &[&Sample]) -> DenseMatrix {
    let n = samples[0].state.len();
    let data = samples
        .iter()
        .flat_map(|s| s.state.iter().copied().chain(std::iter::once(s.time)))
        .collect();
    DenseMatrix::from_vec(samples.len(), n + 1, data)
}

/// Trains the basis set by imitation across all task datasets: per step,
/// each task's coefficients come from the regularized LS solve on a sampled
/// mini-batch, the reconstruction error is accumulated, and the shared
/// parameters take one Adam step. Returns the basis plus the loss curve.
pub fn fe_train(datasets: &[TaskDataset], config: &FeTrainConfig) -> Result<(BasisSet, Vec<f64>)> {
    assert!(!datasets.is_empty(), "fe_train needs at least one task dataset");
    let problem_kind = datasets[0].problem_kind;
    let n = datasets[0].samples[0].state.len();
    let m = datasets[0].samples[0].control.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::init(
        n + 1,
        &config.hidden,
        config.basis_count,
        m,
        config.activation,
        &mut rng,
    );

    // population input statistics over every sample of every task, frozen
    // into the basis so inference sees the same normalization
    let d = n + 1;
    let mut input_mean = vec![0.0; d];
    let mut input_std = vec![0.0; d];
    let mut count = 0usize;
    for ds in datasets {
        for s in &ds.samples {
            for (i, v) in s.state.iter().chain(std::iter::once(&s.time)).enumerate() {
                input_mean[i] += v;
            }
            count += 1;
        }
    }
    for v in &mut input_mean {
        *v /= count as f64;
    }
    for ds in datasets {
        for s in &ds.samples {
            for (i, v) in s.state.iter().chain(std::iter::once(&s.time)).enumerate() {
                input_std[i] += (v - input_mean[i]) * (v - input_mean[i]);
            }
        }
    }
    for v in &mut input_std {
        *v = (*v / count as f64).sqrt().max(1e-8);
    }

    let mut adam = AdamState::new(params.param_count(), config.learning_rate);
    let mut losses = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let mut tape = Tape::new();
        let leaves = params.tape_leaves(&mut tape);
        let mut total = None;

        for dataset in datasets {
            let batch: Vec<&Sample> = if dataset.len() <= config.batch {
                dataset.samples.iter().collect()
            } else {
                sample_indices(&mut rng, dataset.len(), config.batch)
                    .iter()
                    .map(|i| &dataset.samples[i])
                    .collect()
            };
            let b = batch.len();
            let mut inputs = input_matrix(&batch);
            for r in 0..inputs.rows() {
                for c in 0..d {
                    let v = (inputs.get(r, c) - input_mean[c]) / input_std[c];
                    inputs.set(r, c, v);
                }
            }
            let x = tape.constant(inputs);
            let u_flat = DenseMatrix::column(
                batch.iter().flat_map(|s| s.control.iter().copied()).collect(),
            );
            let u = tape.constant(u_flat);

            let out = params.forward_with_leaves(&mut tape, x, &leaves);
            let phi = tape.split_heads(out, m); // (B*m, p)
            let phi_t = tape.transpose(phi);
            let gram_raw = tape.matmul(phi_t, phi);
            let gram = tape.scale(gram_raw, 1.0 / b as f64);
            let rhs_raw = tape.matmul(phi_t, u);
            let rhs = tape.scale(rhs_raw, 1.0 / b as f64);

            let coeff = if config.detach_coefficients {
                let c = solve_regularized(tape.value(gram), tape.value(rhs).data(), config.lambda_tik)?;
                tape.constant(DenseMatrix::column(c))
            } else {
                // escalate the shift only if the regularized Gram is not PD
                let mut lambda = config.lambda_tik;
                loop {
                    let a = tape.add_scaled_identity(gram, lambda);
                    match tape.spd_solve(a, rhs) {
                        Ok(c) => break c,
                        Err(Error::NotPositiveDefinite { .. }) if lambda < config.lambda_tik * 1e4 => {
                            lambda *= 10.0
                        }
                        Err(e) => return Err(e),
                    }
                }
            };

            let pred = tape.matmul(phi, coeff);
            let diff = tape.sub(u, pred);
            let sq = tape.sumsq(diff);
            let mut task_loss = tape.scale(sq, 1.0 / b as f64);
            if config.lambda_basis > 0.0 {
                let norms = tape.sumsq(phi);
                let reg = tape.scale(norms, config.lambda_basis / b as f64);
                task_loss = tape.add(task_loss, reg);
            }
            total = Some(match total {
                Some(t) => tape.add(t, task_loss),
                None => task_loss,
            });
        }

        let loss_node = total.expect("at least one task");
        let loss = tape.scalar(loss_node);
        if !loss.is_finite() {
            return Err(Error::DivergedTraining { step });
        }
        losses.push(loss);

        let grad = tape.grad_vector(loss_node, &leaves);
        let mut flat = params.flatten();
        adam_step(&mut flat, &grad, &mut adam);
        params.unflatten_into(&flat);
    }

    Ok((BasisSet { params, problem_kind, input_mean, input_std }, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Basis whose outputs are constant in the input: a single linear layer
    /// with zero weights, heads read straight off the bias.
    fn constant_basis(p: usize, m: usize, head_values: Vec<f64>) -> BasisSet {
        assert_eq!(head_values.len(), p * m);
        BasisSet::unnormalized(
            MlpParams {
                layers: vec![Layer {
                    weight: DenseMatrix::zeros(3, p * m),
                    bias: head_values,
                }],
                activation: Activation::Tanh,
                head_count: p,
                head_dim: m,
            },
            ProblemKind::PointMass2D,
        )
    }

    fn random_basis(p: usize, m: usize, n: usize, seed: u64) -> BasisSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BasisSet::unnormalized(
            MlpParams::init(n + 1, &[16], p, m, Activation::Tanh, &mut rng),
            ProblemKind::PointMass2D,
        )
    }

    fn dataset_from(basis: &BasisSet, coeffs: &[f64], n_samples: usize, seed: u64, noise: f64) -> TaskDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = basis.input_dim() - 1;
        let m = basis.control_dim();
        let samples = (0..n_samples)
            .map(|_| {
                let state: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let time = rng.gen_range(0.0..1.0);
                let e = basis.eval(&state, time).unwrap();
                let mut control = vec![0.0; m];
                for (j, &c) in coeffs.iter().enumerate() {
                    for d in 0..m {
                        control[d] += c * e.get(j, d);
                    }
                }
                for c in &mut control {
                    *c += noise * rng.gen_range(-1.0..1.0);
                }
                Sample { state, time, control }
            })
            .collect();
        TaskDataset {
            problem_kind: ProblemKind::PointMass2D,
            task: TaskSpec::point_mass_target([1.0, 1.0]),
            samples,
            trajectory_objectives: vec![],
        }
    }

    #[test]
    fn orthonormal_point_basis() {
        let basis = constant_basis(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let dataset = TaskDataset {
            problem_kind: ProblemKind::PointMass2D,
            task: TaskSpec::point_mass_target([1.0, 1.0]),
            samples: vec![Sample { state: vec![0.3, 0.4], time: 0.1, control: vec![3.0, -1.0] }],
            trajectory_objectives: vec![],
        };
        let (g, r) = gram_and_rhs(&basis, &dataset).unwrap();
        assert_eq!(g.data(), DenseMatrix::identity(2).data());
        assert_eq!(r, vec![3.0, -1.0]);
    }

    #[test]
    fn duplicating_samples_leaves_gram_unchanged() {
        let basis = random_basis(3, 2, 2, 5);
        let d1 = dataset_from(&basis, &[1.0, -0.5, 0.2], 10, 9, 0.0);
        let mut d2 = d1.clone();
        d2.samples.extend(d1.samples.clone());
        let (g1, r1) = gram_and_rhs(&basis, &d1).unwrap();
        let (g2, r2) = gram_and_rhs(&basis, &d2).unwrap();
        for (a, b) in g1.data().iter().zip(g2.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in r1.iter().zip(&r2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_matches_double_loop_oracle() {
        let basis = random_basis(4, 2, 2, 11);
        let dataset = dataset_from(&basis, &[0.5, 1.5, -1.0, 0.3], 50, 13, 0.1);
        let (g, r) = gram_and_rhs(&basis, &dataset).unwrap();
        let p = 4;
        let m = 2;
        let big_m = dataset.len() as f64;
        for j in 0..p {
            for k in 0..p {
                let mut s = 0.0;
                for smp in &dataset.samples {
                    let e = basis.eval(&smp.state, smp.time).unwrap();
                    for d in 0..m {
                        s += e.get(j, d) * e.get(k, d);
                    }
                }
                assert!((g.get(j, k) - s / big_m).abs() < 1e-12);
            }
            let mut s = 0.0;
            for smp in &dataset.samples {
                let e = basis.eval(&smp.state, smp.time).unwrap();
                for d in 0..m {
                    s += smp.control[d] * e.get(j, d);
                }
            }
            assert!((r[j] - s / big_m).abs() < 1e-12);
        }
    }

    #[test]
    fn in_span_recovery() {
        let basis = random_basis(4, 2, 2, 21);
        let dataset = dataset_from(&basis, &[1.0, 0.0, 0.0, 0.0], 200, 22, 0.0);
        let c = infer_coefficients_ls(&basis, &dataset, 1e-10).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-4, "{:?}", c.values);
        for &v in &c.values[1..] {
            assert!(v.abs() < 1e-4);
        }
    }

    #[test]
    fn linear_combination_recovery() {
        let basis = random_basis(4, 2, 2, 31);
        let dataset = dataset_from(&basis, &[2.0, -1.0, 0.0, 0.0], 200, 32, 0.0);
        let c = infer_coefficients_ls(&basis, &dataset, 1e-10).unwrap();
        let expected = [2.0, -1.0, 0.0, 0.0];
        for (v, e) in c.values.iter().zip(&expected) {
            assert!((v - e).abs() < 1e-4, "{:?}", c.values);
        }
    }

    /// 3x3 inverse via the adjugate, an independent route to the normal
    /// equations solution.
    fn adjugate_solve_3x3(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let g = |i: usize, j: usize| a.get(i, j);
        let cof = |i: usize, j: usize| {
            let (r1, r2) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c1, c2) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = g(r1, c1) * g(r2, c2) - g(r1, c2) * g(r2, c1);
            if (i + j) % 2 == 0 {
                minor
            } else {
                -minor
            }
        };
        let det = g(0, 0) * cof(0, 0) + g(0, 1) * cof(0, 1) + g(0, 2) * cof(0, 2);
        (0..3)
            .map(|i| (0..3).map(|j| cof(j, i) * b[j]).sum::<f64>() / det)
            .collect()
    }

    #[test]
    fn ls_matches_adjugate_oracle() {
        let basis = random_basis(3, 2, 2, 41);
        let dataset = dataset_from(&basis, &[0.7, -0.3, 1.1], 20, 42, 0.05);
        let lambda = 1e-3;
        let c = infer_coefficients_ls(&basis, &dataset, lambda).unwrap();
        let (mut g, r) = gram_and_rhs(&basis, &dataset).unwrap();
        for i in 0..3 {
            let v = g.get(i, i) + lambda;
            g.set(i, i, v);
        }
        let oracle = adjugate_solve_3x3(&g, &r);
        for (a, b) in c.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn policy_eval_zero_and_coordinate_selection() {
        let basis = random_basis(3, 2, 2, 51);
        let zero = CoefficientVector { values: vec![0.0; 3], source: CoeffSource::Ls };
        let u = policy_eval(&basis, &zero, &[0.5, -0.5], 0.3).unwrap();
        assert_eq!(u, vec![0.0, 0.0]);

        let e1 = CoefficientVector { values: vec![0.0, 1.0, 0.0], source: CoeffSource::Ls };
        let u = policy_eval(&basis, &e1, &[0.5, -0.5], 0.3).unwrap();
        let phi = basis.eval(&[0.5, -0.5], 0.3).unwrap();
        assert_eq!(u, vec![phi.get(1, 0), phi.get(1, 1)]);
    }

    #[test]
    fn policy_eval_is_linear_in_coefficients() {
        let basis = random_basis(4, 2, 2, 61);
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..10 {
            let c1: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c2: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let t = rng.gen_range(0.0..1.0);
            let mk = |v: Vec<f64>| CoefficientVector { values: v, source: CoeffSource::Ls };
            let u1 = policy_eval(&basis, &mk(c1), &x, t).unwrap();
            let u2 = policy_eval(&basis, &mk(c2), &x, t).unwrap();
            let us = policy_eval(&basis, &mk(sum), &x, t).unwrap();
            for d in 0..2 {
                assert!((u1[d] + u2[d] - us[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn teacher_basis_tasks_are_learnable() {
        // tasks are exact linear combinations of 4 frozen random bases
        let teacher = random_basis(4, 1, 2, 71);
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let datasets: Vec<TaskDataset> = (0..6)
            .map(|k| {
                let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                dataset_from(&teacher, &coeffs, 128, 100 + k, 0.0)
            })
            .collect();
        let config = FeTrainConfig {
            basis_count: 8,
            hidden: vec![32, 32],
            steps: 3000,
            batch: 64,
            seed: 7,
            ..Default::default()
        };
        let (_, losses) = fe_train(&datasets, &config).unwrap();
        let initial = losses[0];
        let final_loss = *losses.last().unwrap();
        assert!(
            final_loss < 0.01 * initial,
            "loss {final_loss} did not drop below 1% of initial {initial}"
        );
        // loss curve: tail mean below head mean
        let head = &losses[..losses.len() / 10];
        let tail = &losses[losses.len() - losses.len() / 10..];
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        assert!(mean(tail) <= mean(head));
    }
}
