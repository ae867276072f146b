use fe_control::encoder::*;
use fe_control::eval::*;
use fe_control::io::*;
use fe_control::problems::*;
use fe_control::trajopt::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn grid144() -> Vec<TaskSpec> {
    let mut grid = Vec::new();
    for &a in &[30.0, 40.0, 50.0] {
        for cx in 1..=4 {
            for cy in 1..=4 {
                for &s in &[0.3, 0.5, 0.7] {
                    grid.push(TaskSpec::bicycle_obstacles(vec![Obstacle {
                        amplitude: a,
                        center: [cx as f64, cy as f64],
                        width: s,
                    }]));
                }
            }
        }
    }
    grid
}

fn solver() -> SolverOptions {
    SolverOptions {
        max_iters: 45_000,
        learning_rate: 0.02,
        lr_decay: 0.99985,
        grad_tol: 5e-2,
        ..Default::default()
    }
}

fn residual(basis: &BasisSet, ds: &TaskDataset, lambda: f64) -> (f64, CoefficientVector) {
    let c = infer_coefficients_ls(basis, ds, lambda).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for s in &ds.samples {
        let u = policy_eval(basis, &c, &s.state, s.time).unwrap();
        for (a, b) in u.iter().zip(&s.control) {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    (num / den, c)
}

fn main() {
    let steps: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(15_000);
    let problem = ControlProblem::bicycle_4d(50);
    let grid = grid144();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(7));

    let mut datasets = Vec::new();
    for (i, &gi) in order[..36].iter().enumerate() {
        let (ds, _) =
            generate_task_dataset(&problem, &grid[gi], 25, derive_seed(0, i as u64, 100), &solver())
                .expect("datagen");
        datasets.push(ds);
    }
    println!("datagen done");

    let basis_path = Path::new("/tmp/bike_basis.feck");
    let basis = if basis_path.exists() {
        match load_checkpoint(basis_path).unwrap().payload {
            CheckpointPayload::Basis(b) => b,
            _ => unreachable!(),
        }
    } else {
        let fe = FeTrainConfig {
            basis_count: 64,
            hidden: vec![64, 64],
            steps,
            ..FeTrainConfig::default()
        };
        let t = std::time::Instant::now();
        let (basis, losses) = fe_train(&datasets, &fe).expect("fe train");
        println!("fe train: {:?} final loss {:.4e}", t.elapsed(), losses.last().unwrap());
        save_checkpoint(
            &Checkpoint {
                payload: CheckpointPayload::Basis(basis.clone()),
                provenance: Provenance { config_hash: [0; 32], seed: 0, steps: steps as u64 },
            },
            basis_path,
        )
        .unwrap();
        basis
    };

    // per-train-task fit residual on the full training dataset
    for (i, ds) in datasets.iter().enumerate() {
        let (r, _) = residual(&basis, ds, 1e-3);
        println!("train {i:2} grid {:3}: residual {r:.4e}", order[i]);
    }

    // hard tasks: LS on a fresh 25-demo budget at several lambdas, then
    // closed-loop rollouts with excursion anatomy
    for (pos, gi) in [(5usize, order[41]), (6, order[42]), (31, order[31])] {
        let (budget, _) = generate_task_dataset(
            &problem,
            &grid[gi],
            25,
            derive_seed(0, pos as u64, 1),
            &solver(),
        )
        .expect("budget datagen");
        for lambda in [1e-3, 1e-2, 1e-1] {
            let (r, c) = residual(&basis, &budget, lambda);
            // closed-loop from fresh x0s
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0, pos as u64, 2));
            let x0s: Vec<Vec<f64>> =
                (0..10).map(|_| sample_initial_state(&problem, &mut rng)).collect();
            let mut objs = Vec::new();
            let mut worst_xy = (0.0f64, [0.0; 2]);
            for x0 in &x0s {
                let pr = rollout_policy(&basis, &c, &problem, &grid[gi], x0).unwrap();
                objs.push(pr.objective);
                for st in &pr.rollout.states {
                    let d2 = st[0] * st[0] + st[1] * st[1];
                    if d2 > worst_xy.0 {
                        worst_xy = (d2, [st[0], st[1]]);
                    }
                }
            }
            objs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            println!(
                "task grid {gi:3} lambda {lambda:.0e}: demo residual {r:.4e} objs {:?} farthest xy [{:.1},{:.1}]",
                objs.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
                worst_xy.1[0],
                worst_xy.1[1]
            );
        }
    }
}
