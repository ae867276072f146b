//! On-disk formats: little-endian binary layouts for datasets and
//! checkpoints with SHA-256 trailers, plus CSV report emission and the
//! append-only run manifest. All loads fail closed.

use crate::encoder::{BasisSet, Sample, TaskDataset};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::linalg::DenseMatrix;
use crate::nn::{Activation, Layer, MlpParams};
use crate::operator::OperatorNet;
use crate::problems::{ControlProblem, Obstacle, ProblemKind, TaskKind, TaskSpec};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write as _;
use std::path::Path;

pub const DATASET_MAGIC: [u8; 4] = *b"FEDS";
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FECK";
pub const FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------- encoding

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: [u8; 4]) -> Self {
        let mut buf = Vec::with_capacity(4096);
        buf.extend_from_slice(&magic);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        Writer { buf }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u32(vs.len() as u32);
        for v in vs {
            self.f64(*v);
        }
    }

    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// Appends the SHA-256 of everything written so far and flushes to disk.
    fn finish(mut self, path: &Path) -> Result<()> {
        let digest: [u8; 32] = Sha256::digest(&self.buf).into();
        self.buf.extend_from_slice(&digest);
        let mut f = fs::File::create(path)?;
        f.write_all(&self.buf)?;
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> Reader<'a> {
    /// Verifies the trailer checksum up front, then exposes the payload.
    fn open(buf: &'a [u8], what: &'a str) -> Result<Self> {
        if buf.len() < 40 {
            return Err(Error::TruncatedFile(what.into()));
        }
        let (payload, trailer) = buf.split_at(buf.len() - 32);
        let digest: [u8; 32] = Sha256::digest(payload).into();
        if digest != trailer {
            return Err(Error::ChecksumFailure(what.into()));
        }
        Ok(Reader { buf: payload, pos: 0, what })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::TruncatedFile(self.what.into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }

    fn expect_header(&mut self, magic: [u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::FormatVersionMismatch(format!(
                "{}: bad magic {:?}",
                self.what, got
            )));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::FormatVersionMismatch(format!(
                "{}: version {} (supported {})",
                self.what, version, FORMAT_VERSION
            )));
        }
        Ok(())
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::FormatVersionMismatch(format!(
                "{}: {} trailing bytes",
                self.what,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn task_kind_tag(kind: TaskKind) -> u8 {
    match kind {
        TaskKind::Target => 0,
        TaskKind::SingleObstacle => 1,
        TaskKind::DoubleObstacle => 2,
    }
}

fn task_kind_from_tag(tag: u8) -> Option<TaskKind> {
    match tag {
        0 => Some(TaskKind::Target),
        1 => Some(TaskKind::SingleObstacle),
        2 => Some(TaskKind::DoubleObstacle),
        _ => None,
    }
}

fn write_task(w: &mut Writer, task: &TaskSpec) {
    w.u8(task_kind_tag(task.kind));
    w.f64s(&task.target);
    w.u32(task.obstacles.len() as u32);
    for o in &task.obstacles {
        w.f64(o.amplitude);
        w.f64(o.center[0]);
        w.f64(o.center[1]);
        w.f64(o.width);
    }
    w.f64(task.terminal_weight);
}

fn read_task(r: &mut Reader) -> Result<TaskSpec> {
    let kind = task_kind_from_tag(r.u8()?).ok_or_else(|| {
        Error::FormatVersionMismatch(format!("{}: unknown task kind", r.what))
    })?;
    let target = r.f64s()?;
    let n_obs = r.u32()? as usize;
    let obstacles = (0..n_obs)
        .map(|_| {
            Ok(Obstacle {
                amplitude: r.f64()?,
                center: [r.f64()?, r.f64()?],
                width: r.f64()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let terminal_weight = r.f64()?;
    Ok(TaskSpec { kind, target, obstacles, terminal_weight })
}

fn read_problem_kind(r: &mut Reader) -> Result<ProblemKind> {
    ProblemKind::from_tag(r.u8()?).ok_or_else(|| {
        Error::FormatVersionMismatch(format!("{}: unknown problem kind", r.what))
    })
}

// ----------------------------------------------------------------- dataset

/// Discretization and provenance stored alongside a dataset's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub horizon: f64,
    pub n_steps: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    pub seed: u64,
}

pub fn save_dataset(
    dataset: &TaskDataset,
    problem: &ControlProblem,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let mut w = Writer::new(DATASET_MAGIC);
    w.u8(dataset.problem_kind.tag());
    write_task(&mut w, &dataset.task);
    w.u64(seed);
    w.f64(problem.horizon);
    w.u32(problem.n_steps as u32);
    w.u32(problem.state_dim as u32);
    w.u32(problem.control_dim as u32);
    w.u32(dataset.samples.len() as u32);
    for s in &dataset.samples {
        for v in &s.state {
            w.f64(*v);
        }
        w.f64(s.time);
        for v in &s.control {
            w.f64(*v);
        }
    }
    w.f64s(&dataset.trajectory_objectives);
    w.finish(path)
}

pub fn load_dataset(path: &Path) -> Result<(TaskDataset, DatasetHeader)> {
    let what = path.display().to_string();
    let buf = fs::read(path)?;
    let mut r = Reader::open(&buf, &what)?;
    r.expect_header(DATASET_MAGIC)?;
    let problem_kind = read_problem_kind(&mut r)?;
    let task = read_task(&mut r)?;
    let seed = r.u64()?;
    let horizon = r.f64()?;
    let n_steps = r.u32()? as usize;
    let n = r.u32()? as usize;
    let m = r.u32()? as usize;

    // dimensions must agree with the named problem family
    let (want_n, want_m) = match problem_kind {
        ProblemKind::PointMass2D => (2, 2),
        ProblemKind::Quadcopter12D => (12, 4),
        ProblemKind::Bicycle4D => (4, 2),
    };
    if n != want_n || m != want_m {
        return Err(Error::FormatVersionMismatch(format!(
            "{what}: dims ({n}, {m}) do not match problem family ({want_n}, {want_m})"
        )));
    }

    let count = r.u32()? as usize;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let mut state = Vec::with_capacity(n);
        for _ in 0..n {
            state.push(r.f64()?);
        }
        let time = r.f64()?;
        let mut control = Vec::with_capacity(m);
        for _ in 0..m {
            control.push(r.f64()?);
        }
        samples.push(Sample { state, time, control });
    }
    let trajectory_objectives = r.f64s()?;
    r.done()?;
    Ok((
        TaskDataset { problem_kind, task, samples, trajectory_objectives },
        DatasetHeader { horizon, n_steps, state_dim: n, control_dim: m, seed },
    ))
}

// -------------------------------------------------------------- checkpoint

/// Training provenance: enough to replay the run that produced a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_hash: [u8; 32],
    pub seed: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointPayload {
    Basis(BasisSet),
    Operator { net: OperatorNet, problem_kind: ProblemKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub payload: CheckpointPayload,
    pub provenance: Provenance,
}

fn write_mlp(w: &mut Writer, params: &MlpParams) {
    w.u8(params.activation.tag());
    w.u32(params.head_count as u32);
    w.u32(params.head_dim as u32);
    w.u32(params.layers.len() as u32);
    for l in &params.layers {
        w.u32(l.weight.rows() as u32);
        w.u32(l.weight.cols() as u32);
    }
    let flat = params.flatten();
    w.u64(flat.len() as u64);
    for v in &flat {
        w.f64(*v);
    }
}

fn read_mlp(r: &mut Reader) -> Result<MlpParams> {
    let activation = Activation::from_tag(r.u8()?).ok_or_else(|| {
        Error::FormatVersionMismatch(format!("{}: unknown activation", r.what))
    })?;
    let head_count = r.u32()? as usize;
    let head_dim = r.u32()? as usize;
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        layers.push(Layer { weight: DenseMatrix::zeros(rows, cols), bias: vec![0.0; cols] });
    }
    let mut params = MlpParams { layers, activation, head_count, head_dim };
    let n_flat = r.u64()? as usize;
    if n_flat != params.param_count() {
        return Err(Error::FormatVersionMismatch(format!(
            "{}: parameter count {} does not match architecture ({})",
            r.what,
            n_flat,
            params.param_count()
        )));
    }
    let mut flat = Vec::with_capacity(n_flat);
    for _ in 0..n_flat {
        flat.push(r.f64()?);
    }
    params.unflatten_into(&flat);
    Ok(params)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut w = Writer::new(CHECKPOINT_MAGIC);
    match &ckpt.payload {
        CheckpointPayload::Basis(basis) => {
            w.u8(0);
            w.u8(basis.problem_kind.tag());
            write_mlp(&mut w, &basis.params);
            w.f64s(&basis.input_mean);
            w.f64s(&basis.input_std);
        }
        CheckpointPayload::Operator { net, problem_kind } => {
            w.u8(1);
            w.u8(problem_kind.tag());
            write_mlp(&mut w, &net.params);
            w.bytes(&net.basis_checksum);
            w.f64s(&net.eta_lo);
            w.f64s(&net.eta_hi);
        }
    }
    w.bytes(&ckpt.provenance.config_hash);
    w.u64(ckpt.provenance.seed);
    w.u64(ckpt.provenance.steps);
    w.finish(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let what = path.display().to_string();
    let buf = fs::read(path)?;
    let mut r = Reader::open(&buf, &what)?;
    r.expect_header(CHECKPOINT_MAGIC)?;
    let kind = r.u8()?;
    let problem_kind = read_problem_kind(&mut r)?;
    let payload = match kind {
        0 => {
            let params = read_mlp(&mut r)?;
            let input_mean = r.f64s()?;
            let input_std = r.f64s()?;
            if input_mean.len() != params.input_dim() || input_std.len() != params.input_dim() {
                return Err(Error::FormatVersionMismatch(format!(
                    "{what}: normalization length {} vs input dimension {}",
                    input_mean.len(),
                    params.input_dim()
                )));
            }
            CheckpointPayload::Basis(BasisSet { params, problem_kind, input_mean, input_std })
        }
        1 => {
            let params = read_mlp(&mut r)?;
            let basis_checksum: [u8; 32] = r.take(32)?.try_into().unwrap();
            let eta_lo = r.f64s()?;
            let eta_hi = r.f64s()?;
            CheckpointPayload::Operator {
                net: OperatorNet { params, eta_lo, eta_hi, basis_checksum },
                problem_kind,
            }
        }
        other => {
            return Err(Error::FormatVersionMismatch(format!(
                "{what}: unknown checkpoint kind {other}"
            )))
        }
    };
    let config_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
    let seed = r.u64()?;
    let steps = r.u64()?;
    r.done()?;
    Ok(Checkpoint { payload, provenance: Provenance { config_hash, seed, steps } })
}

// -------------------------------------------------------- report, manifest

pub fn write_report_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from(
        "task_id,tag,method,true_objective,predicted_objective,control_cost,obstacle_cost,terminal_cost,terminal_deviation,n_rollouts,diverged\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}\n",
            r.task_id,
            r.tag.label(),
            r.method.label(),
            r.true_objective,
            r.predicted_objective,
            r.control_cost,
            r.obstacle_cost,
            r.terminal_cost,
            r.terminal_deviation,
            r.n_rollouts,
            r.diverged,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Appends one line to the run manifest, creating it on first use.
pub fn append_manifest(out_dir: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out_dir.join("manifest.txt"))?;
    writeln!(f, "{line}")?;
    Ok(())
}
