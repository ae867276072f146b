//! Benchmark problem families: 2D point mass, 12D quadcopter, and a
//! kinematic bicycle, together with their cost structures, initial-state
//! distributions, and a fixed-step RK4 integrator.

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const BICYCLE_WHEELBASE: f64 = 0.5;
pub const QUAD_MASS: f64 = 1.0;
pub const GRAVITY: f64 = 9.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    PointMass2D,
    Quadcopter12D,
    Bicycle4D,
}

impl ProblemKind {
    pub fn tag(&self) -> u8 {
        match self {
            ProblemKind::PointMass2D => 0,
            ProblemKind::Quadcopter12D => 1,
            ProblemKind::Bicycle4D => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ProblemKind::PointMass2D),
            1 => Some(ProblemKind::Quadcopter12D),
            2 => Some(ProblemKind::Bicycle4D),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub kind: ProblemKind,
    pub state_dim: usize,
    pub control_dim: usize,
    pub horizon: f64,
    pub n_steps: usize,
    /// Point-mass benchmark only: whether the fixed Gaussian bump at the
    /// origin contributes to the running cost.
    pub fixed_obstacle: bool,
}

impl ControlProblem {
    pub fn point_mass_2d() -> Self {
        ControlProblem {
            kind: ProblemKind::PointMass2D,
            state_dim: 2,
            control_dim: 2,
            horizon: 1.0,
            n_steps: 20,
            fixed_obstacle: true,
        }
    }

    /// Point-mass variant with the obstacle bump removed; the remaining
    /// problem is linear-quadratic with a known closed-form optimum.
    pub fn point_mass_2d_free() -> Self {
        ControlProblem { fixed_obstacle: false, ..Self::point_mass_2d() }
    }

    pub fn quadcopter_12d() -> Self {
        ControlProblem {
            kind: ProblemKind::Quadcopter12D,
            state_dim: 12,
            control_dim: 4,
            horizon: 2.0,
            n_steps: 50,
            fixed_obstacle: false,
        }
    }

    pub fn bicycle_4d(n_steps: usize) -> Self {
        ControlProblem {
            kind: ProblemKind::Bicycle4D,
            state_dim: 4,
            control_dim: 2,
            horizon: 5.0,
            n_steps,
            fixed_obstacle: false,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Indices of the position components used for obstacle penalties and
    /// terminal-deviation metrics.
    pub fn position_dims(&self) -> usize {
        match self.kind {
            ProblemKind::PointMass2D | ProblemKind::Bicycle4D => 2,
            ProblemKind::Quadcopter12D => 3,
        }
    }

    pub fn terminal_weight(&self) -> f64 {
        match self.kind {
            ProblemKind::PointMass2D | ProblemKind::Bicycle4D => 50.0,
            ProblemKind::Quadcopter12D => 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Target,
    SingleObstacle,
    DoubleObstacle,
}

/// Isotropic Gaussian bump `A exp(-||pos - mu||^2 / (2 sigma^2))` acting on
/// the position components of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
}

impl Obstacle {
    pub fn cost(&self, pos: &[f64]) -> f64 {
        let d2: f64 = pos
            .iter()
            .zip(self.center.iter())
            .map(|(p, c)| (p - c) * (p - c))
            .sum();
        self.amplitude * (-d2 / (2.0 * self.width * self.width)).exp()
    }
}

/// The conditional variable distinguishing problem instances: a target
/// state plus (for the bicycle family) obstacle parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub target: Vec<f64>,
    pub obstacles: Vec<Obstacle>,
    pub terminal_weight: f64,
}

impl TaskSpec {
    pub fn point_mass_target(target: [f64; 2]) -> Self {
        TaskSpec {
            kind: TaskKind::Target,
            target: target.to_vec(),
            obstacles: vec![],
            terminal_weight: 50.0,
        }
    }

    /// Target at (y1, y2, y3) with all velocities and angles zero.
    pub fn quadcopter_target(target: [f64; 3]) -> Self {
        let mut full = vec![0.0; 12];
        full[..3].copy_from_slice(&target);
        TaskSpec {
            kind: TaskKind::Target,
            target: full,
            obstacles: vec![],
            terminal_weight: 500.0,
        }
    }

    /// Bicycle target is fixed at [5, 5, pi/4, 0]; the task varies through
    /// the obstacle field.
    pub fn bicycle_obstacles(obstacles: Vec<Obstacle>) -> Self {
        let kind = match obstacles.len() {
            1 => TaskKind::SingleObstacle,
            2 => TaskKind::DoubleObstacle,
            n => panic!("bicycle tasks carry 1 or 2 obstacles, got {n}"),
        };
        TaskSpec {
            kind,
            target: vec![5.0, 5.0, std::f64::consts::FRAC_PI_4, 0.0],
            obstacles,
            terminal_weight: 50.0,
        }
    }
}

fn check_dims(problem: &ControlProblem, x: &[f64], u: &[f64]) -> Result<()> {
    if x.len() != problem.state_dim || u.len() != problem.control_dim {
        return Err(Error::DimensionMismatch(format!(
            "state {} (want {}), control {} (want {})",
            x.len(),
            problem.state_dim,
            u.len(),
            problem.control_dim
        )));
    }
    Ok(())
}

/// State derivative f(x, u). All three families are time-invariant.
pub fn dynamics_eval(problem: &ControlProblem, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_dims(problem, x, u)?;
    Ok(match problem.kind {
        ProblemKind::PointMass2D => u.to_vec(),
        ProblemKind::Bicycle4D => {
            let (theta, v) = (x[2], x[3]);
            let (delta, a) = (u[0], u[1]);
            vec![
                v * theta.cos(),
                v * theta.sin(),
                v / BICYCLE_WHEELBASE * delta.tan(),
                a,
            ]
        }
        ProblemKind::Quadcopter12D => {
            let (psi, theta, phi) = (x[3], x[4], x[5]);
            let (thrust, tau_psi, tau_theta, tau_phi) = (u[0], u[1], u[2], u[3]);
            let um = thrust / QUAD_MASS;
            let ax = um * (psi.sin() * phi.sin() + psi.cos() * theta.sin() * phi.cos());
            let ay = um * (-psi.cos() * phi.sin() + psi.sin() * theta.sin() * phi.cos());
            let az = um * theta.cos() * phi.cos() - GRAVITY;
            vec![
                x[6], x[7], x[8], // position <- velocity
                x[9], x[10], x[11], // angles <- angular rates
                ax, ay, az, tau_psi, tau_theta, tau_phi,
            ]
        }
    })
}

pub fn running_cost(problem: &ControlProblem, task: &TaskSpec, x: &[f64], u: &[f64]) -> Result<f64> {
    check_dims(problem, x, u)?;
    let mut cost = 0.5 * u.iter().map(|v| v * v).sum::<f64>();
    cost += obstacle_cost(problem, task, x);
    Ok(cost)
}

/// State-penalty part of the running cost (fixed bump plus task obstacles).
pub fn obstacle_cost(problem: &ControlProblem, task: &TaskSpec, x: &[f64]) -> f64 {
    let mut cost = 0.0;
    if problem.fixed_obstacle {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        cost += 50.0 * (-1.25 * r2).exp();
    }
    let pos = &x[..problem.position_dims().min(2)];
    for obs in &task.obstacles {
        cost += obs.cost(pos);
    }
    cost
}

pub fn terminal_cost(problem: &ControlProblem, task: &TaskSpec, x_final: &[f64]) -> Result<f64> {
    if x_final.len() != problem.state_dim || task.target.len() != problem.state_dim {
        return Err(Error::DimensionMismatch(format!(
            "terminal state {} vs problem {}",
            x_final.len(),
            problem.state_dim
        )));
    }
    let d2: f64 = x_final
        .iter()
        .zip(&task.target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(task.terminal_weight * d2)
}

// ---- tape-recorded versions for the open-loop solver -------------------

/// Batched dynamics on the tape: x (B,n), u (B,m) -> dx (B,n).
pub fn dynamics_tape(tape: &mut Tape, problem: &ControlProblem, x: NodeId, u: NodeId) -> NodeId {
    match problem.kind {
        ProblemKind::PointMass2D => u,
        ProblemKind::Bicycle4D => {
            let theta = tape.slice_cols(x, 2, 3);
            let v = tape.slice_cols(x, 3, 4);
            let delta = tape.slice_cols(u, 0, 1);
            let a = tape.slice_cols(u, 1, 2);
            let ct = tape.cos(theta);
            let st = tape.sin(theta);
            let dx = tape.mul(v, ct);
            let dy = tape.mul(v, st);
            let td = tape.tan(delta);
            let vtd = tape.mul(v, td);
            let dtheta = tape.scale(vtd, 1.0 / BICYCLE_WHEELBASE);
            tape.concat_cols(&[dx, dy, dtheta, a])
        }
        ProblemKind::Quadcopter12D => {
            let vel = tape.slice_cols(x, 6, 9);
            let rates = tape.slice_cols(x, 9, 12);
            let psi = tape.slice_cols(x, 3, 4);
            let theta = tape.slice_cols(x, 4, 5);
            let phi = tape.slice_cols(x, 5, 6);
            let thrust = tape.slice_cols(u, 0, 1);
            let torques = tape.slice_cols(u, 1, 4);
            let um = tape.scale(thrust, 1.0 / QUAD_MASS);

            let (spsi, cpsi) = (tape.sin(psi), tape.cos(psi));
            let (sth, cth) = (tape.sin(theta), tape.cos(theta));
            let (sphi, cphi) = (tape.sin(phi), tape.cos(phi));

            // ax = u/m (sin psi sin phi + cos psi sin theta cos phi)
            let t1 = tape.mul(spsi, sphi);
            let t2a = tape.mul(cpsi, sth);
            let t2 = tape.mul(t2a, cphi);
            let sum_x = tape.add(t1, t2);
            let ax = tape.mul(um, sum_x);

            // ay = u/m (-cos psi sin phi + sin psi sin theta cos phi)
            let t3 = tape.mul(cpsi, sphi);
            let t3n = tape.scale(t3, -1.0);
            let t4a = tape.mul(spsi, sth);
            let t4 = tape.mul(t4a, cphi);
            let sum_y = tape.add(t3n, t4);
            let ay = tape.mul(um, sum_y);

            // az = u/m cos theta cos phi - g
            let cc = tape.mul(cth, cphi);
            let az0 = tape.mul(um, cc);
            let az = tape.add_scalar(az0, -GRAVITY);

            tape.concat_cols(&[vel, rates, ax, ay, az, torques])
        }
    }
}

/// Batched running cost on the tape: (B,1) per-row values.
pub fn running_cost_tape(
    tape: &mut Tape,
    problem: &ControlProblem,
    task: &TaskSpec,
    x: NodeId,
    u: NodeId,
) -> NodeId {
    let usq = tape.row_sumsq(u);
    let mut cost = tape.scale(usq, 0.5);
    if problem.fixed_obstacle {
        let xsq = tape.row_sumsq(x);
        let e = tape.scale(xsq, -1.25);
        let e = tape.exp(e);
        let bump = tape.scale(e, 50.0);
        cost = tape.add(cost, bump);
    }
    if !task.obstacles.is_empty() {
        let pos = tape.slice_cols(x, 0, 2);
        for obs in &task.obstacles {
            let neg_mu = crate::linalg::DenseMatrix::from_vec(
                1,
                2,
                vec![-obs.center[0], -obs.center[1]],
            );
            let mu = tape.constant(neg_mu);
            let d = tape.bias_add(pos, mu);
            let d2 = tape.row_sumsq(d);
            let e = tape.scale(d2, -1.0 / (2.0 * obs.width * obs.width));
            let e = tape.exp(e);
            let bump = tape.scale(e, obs.amplitude);
            cost = tape.add(cost, bump);
        }
    }
    cost
}

/// Batched terminal cost on the tape: (B,1) per-row values.
pub fn terminal_cost_tape(
    tape: &mut Tape,
    problem: &ControlProblem,
    task: &TaskSpec,
    x_final: NodeId,
) -> NodeId {
    let _ = problem;
    let neg_target = crate::linalg::DenseMatrix::from_vec(
        1,
        task.target.len(),
        task.target.iter().map(|v| -v).collect(),
    );
    let t = tape.constant(neg_target);
    let d = tape.bias_add(x_final, t);
    let d2 = tape.row_sumsq(d);
    tape.scale(d2, task.terminal_weight)
}

/// One classical RK4 step under a zero-order-hold control.
pub fn rk4_step<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let k1 = f(x);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(xi, ki)| xi + 0.5 * h * ki).collect();
    let k2 = f(&x2);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(xi, ki)| xi + 0.5 * h * ki).collect();
    let k3 = f(&x3);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(xi, ki)| xi + h * ki).collect();
    let k4 = f(&x4);
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Trajectory grid produced by forward integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
}

const STATE_OVERFLOW: f64 = 1e8;

/// Integrates the problem dynamics from `x0` with piecewise-constant
/// controls drawn from `control_fn(x_k, t_k)` at each step start.
pub fn rk4_rollout<F>(problem: &ControlProblem, x0: &[f64], control_fn: F) -> Result<Rollout>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    if x0.len() != problem.state_dim {
        return Err(Error::DimensionMismatch(format!(
            "x0 has {} entries, problem wants {}",
            x0.len(),
            problem.state_dim
        )));
    }
    let h = problem.step_size();
    let mut states = Vec::with_capacity(problem.n_steps + 1);
    let mut controls = Vec::with_capacity(problem.n_steps);
    let mut times = Vec::with_capacity(problem.n_steps + 1);
    let mut x = x0.to_vec();
    states.push(x.clone());
    times.push(0.0);
    for k in 0..problem.n_steps {
        let t = k as f64 * h;
        let u = control_fn(&x, t);
        x = rk4_step(
            |xs| dynamics_eval(problem, xs, &u).expect("dims checked at entry"),
            &x,
            h,
        );
        if !x.iter().all(|v| v.is_finite() && v.abs() < STATE_OVERFLOW) {
            return Err(Error::NonFiniteState { t: t + h });
        }
        controls.push(u);
        states.push(x.clone());
        times.push(t + h);
    }
    Ok(Rollout { times, states, controls })
}

/// Draws an initial state from the benchmark's stated distribution.
pub fn sample_initial_state<R: Rng>(problem: &ControlProblem, rng: &mut R) -> Vec<f64> {
    match problem.kind {
        ProblemKind::PointMass2D => {
            // N((-1.5, -1.5), 0.4 I)
            let n = Normal::new(0.0, 0.4f64.sqrt()).unwrap();
            vec![-1.5 + n.sample(rng), -1.5 + n.sample(rng)]
        }
        ProblemKind::Quadcopter12D => {
            let n = Normal::new(0.0, 0.5).unwrap();
            let mut x = vec![0.0; 12];
            for xi in x.iter_mut().take(3) {
                *xi = -2.0 + n.sample(rng);
            }
            x
        }
        ProblemKind::Bicycle4D => {
            let n = Normal::new(0.0, 0.35).unwrap();
            vec![
                n.sample(rng),
                n.sample(rng),
                std::f64::consts::FRAC_PI_4,
                0.0,
            ]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_dynamics_is_identity_on_control() {
        let p = ControlProblem::point_mass_2d();
        let dx = dynamics_eval(&p, &[0.3, -0.8], &[1.0, 2.0]).unwrap();
        assert_eq!(dx, vec![1.0, 2.0]);
    }

    #[test]
    fn bicycle_zero_velocity_kinematics() {
        let p = ControlProblem::bicycle_4d(50);
        let dx = dynamics_eval(&p, &[1.0, 2.0, 0.7, 0.0], &[0.3, 0.5]).unwrap();
        assert_eq!(dx, vec![0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn quadcopter_hover_equilibrium() {
        let p = ControlProblem::quadcopter_12d();
        let x = vec![0.0; 12];
        let dx = dynamics_eval(&p, &x, &[GRAVITY * QUAD_MASS, 0.0, 0.0, 0.0]).unwrap();
        assert!(dx.iter().all(|&v| v.abs() < 1e-15), "{dx:?}");
    }

    #[test]
    fn point_mass_obstacle_peak() {
        let p = ControlProblem::point_mass_2d();
        let task = TaskSpec::point_mass_target([1.5, 1.5]);
        let c = running_cost(&p, &task, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(c, 50.0);
    }

    #[test]
    fn quadcopter_running_cost_is_half_control_norm() {
        let p = ControlProblem::quadcopter_12d();
        let task = TaskSpec::quadcopter_target([1.0, 1.0, 1.0]);
        let c = running_cost(&p, &task, &vec![0.0; 12], &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(c, 2.0);
    }

    #[test]
    fn bicycle_obstacle_peak_value() {
        let p = ControlProblem::bicycle_4d(50);
        let task = TaskSpec::bicycle_obstacles(vec![Obstacle {
            amplitude: 30.0,
            center: [2.0, 2.0],
            width: 0.5,
        }]);
        let c = running_cost(&p, &task, &[2.0, 2.0, 0.1, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(c, 30.0);
    }

    #[test]
    fn terminal_cost_examples() {
        let p = ControlProblem::point_mass_2d();
        let task = TaskSpec::point_mass_target([1.0, 1.0]);
        assert_eq!(terminal_cost(&p, &task, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(terminal_cost(&p, &task, &[2.0, 1.0]).unwrap(), 50.0);

        let q = ControlProblem::quadcopter_12d();
        let qt = TaskSpec::quadcopter_target([1.0, 1.0, 1.0]);
        let mut x = qt.target.clone();
        x[0] += 0.1; // ||x - y||^2 = 0.01
        assert!((terminal_cost(&q, &qt, &x).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rollout_constant_control_point_mass() {
        let p = ControlProblem::point_mass_2d();
        let r = rk4_rollout(&p, &[0.0, 0.0], |_, _| vec![1.0, 0.0]).unwrap();
        let xf = r.states.last().unwrap();
        assert!((xf[0] - 1.0).abs() < 1e-14 && xf[1].abs() < 1e-14);
    }

    #[test]
    fn bicycle_straight_line_closed_form() {
        let p = ControlProblem::bicycle_4d(50);
        let th = std::f64::consts::FRAC_PI_4;
        let r = rk4_rollout(&p, &[0.0, 0.0, th, 1.0], |_, _| vec![0.0, 0.0]).unwrap();
        let xf = r.states.last().unwrap();
        let expect = p.horizon / 2.0f64.sqrt();
        assert!((xf[0] - expect).abs() < 1e-10);
        assert!((xf[1] - expect).abs() < 1e-10);
        assert!((xf[2] - th).abs() < 1e-14);
        assert!((xf[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rk4_exponential_oracle() {
        // x' = x, x(0) = 1, 20 steps over [0,1]
        let h = 1.0 / 20.0;
        let mut x = vec![1.0];
        for _ in 0..20 {
            x = rk4_step(|s| vec![s[0]], &x, h);
        }
        // per-step defect is h^5/120, compounding to ~1.35e-7 at h = 0.05
        assert!((x[0] - std::f64::consts::E).abs() < 2e-7);
    }

    #[test]
    fn rk4_order_four_convergence() {
        let err_for = |steps: usize| {
            let h = 1.0 / steps as f64;
            let mut x = vec![1.0];
            for _ in 0..steps {
                x = rk4_step(|s| vec![s[0]], &x, h);
            }
            (x[0] - std::f64::consts::E).abs()
        };
        let (e1, e2) = (err_for(10), err_for(20));
        let slope = (e1 / e2).log2();
        assert!(slope >= 3.8, "observed order {slope}");
    }

    #[test]
    fn quadcopter_hover_is_rollout_fixed_point() {
        let p = ControlProblem::quadcopter_12d();
        let x0 = vec![1.0, -2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let r = rk4_rollout(&p, &x0, |_, _| vec![QUAD_MASS * GRAVITY, 0.0, 0.0, 0.0]).unwrap();
        for s in &r.states {
            for (a, b) in s.iter().zip(&x0) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn initial_state_distributions() {
        let p = ControlProblem::point_mass_2d();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let s = sample_initial_state(&p, &mut rng);
            sx += s[0];
            sy += s[1];
        }
        assert!((sx / n as f64 + 1.5).abs() < 0.02);
        assert!((sy / n as f64 + 1.5).abs() < 0.02);

        let b = ControlProblem::bicycle_4d(50);
        let s = sample_initial_state(&b, &mut rng);
        assert_eq!(s[2], std::f64::consts::FRAC_PI_4);
        assert_eq!(s[3], 0.0);

        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_initial_state(&p, &mut r1), sample_initial_state(&p, &mut r2));
    }

    #[test]
    fn double_obstacle_with_zero_amplitude_matches_single() {
        let p = ControlProblem::bicycle_4d(50);
        let o1 = Obstacle { amplitude: 40.0, center: [2.0, 3.0], width: 0.5 };
        let o2 = Obstacle { amplitude: 0.0, center: [3.0, 1.0], width: 0.3 };
        let single = TaskSpec::bicycle_obstacles(vec![o1.clone()]);
        let double = TaskSpec::bicycle_obstacles(vec![o1, o2]);
        let x = [1.7, 2.4, 0.3, 1.2];
        let u = [0.1, -0.2];
        assert_eq!(
            running_cost(&p, &single, &x, &u).unwrap(),
            running_cost(&p, &double, &x, &u).unwrap()
        );
    }

    #[test]
    fn tape_dynamics_and_costs_match_plain() {
        use crate::linalg::DenseMatrix;
        for (problem, task) in [
            (
                ControlProblem::point_mass_2d(),
                TaskSpec::point_mass_target([1.2, 1.8]),
            ),
            (
                ControlProblem::bicycle_4d(50),
                TaskSpec::bicycle_obstacles(vec![Obstacle {
                    amplitude: 30.0,
                    center: [2.0, 2.0],
                    width: 0.5,
                }]),
            ),
            (
                ControlProblem::quadcopter_12d(),
                TaskSpec::quadcopter_target([1.0, 2.0, 3.0]),
            ),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let x: Vec<f64> = (0..problem.state_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..problem.control_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mut tape = Tape::new();
            let xn = tape.constant(DenseMatrix::from_vec(1, x.len(), x.clone()));
            let un = tape.constant(DenseMatrix::from_vec(1, u.len(), u.clone()));
            let dx = dynamics_tape(&mut tape, &problem, xn, un);
            let plain = dynamics_eval(&problem, &x, &u).unwrap();
            for (a, b) in tape.value(dx).data().iter().zip(&plain) {
                assert!((a - b).abs() < 1e-14);
            }

            let rc = running_cost_tape(&mut tape, &problem, &task, xn, un);
            assert!(
                (tape.value(rc).data()[0] - running_cost(&problem, &task, &x, &u).unwrap()).abs()
                    < 1e-13
            );
            let tc = terminal_cost_tape(&mut tape, &problem, &task, xn);
            assert!(
                (tape.value(tc).data()[0] - terminal_cost(&problem, &task, &x).unwrap()).abs()
                    < 1e-12
            );
        }
    }
}
