//! SMO against exhaustive QP solutions and synthetic classification tasks.

mod common;

use common::{kkt_residual, qp_oracle};
use faultzone::casegen::Zone;
use faultzone::svm::{
    grid_search, smo_solve, Decoder, Gram, GridSpec, Kernel, SmoParams, Strategy, VotingTable, ZoneClassifier,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>, f64, f64) {
    let n = rng.random_range(2..=6);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let c = [0.1, 1.0, 10.0, 1e3][rng.random_range(0..4)];
    let g = rng.random_range(0.2..5.0);
    (x, y, c, g)
}

#[test]
fn smo_matches_exhaustive_qp() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (x, y, c, g) = random_problem(&mut rng);
        let gram = Gram::new(&Kernel::Rbf { g }, &x);
        let sol = smo_solve(&gram, &y, &SmoParams { tol: 1e-10, ..SmoParams::new(c) }).unwrap();
        let oracle = qp_oracle(&gram, &y, c);
        assert!((sol.objective - oracle).abs() < 1e-6, "smo {} oracle {oracle}", sol.objective);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trained_multipliers_are_feasible(seed in 0u64..10_000, n in 4usize..40, c in 0.1f64..1e4, g in 0.05f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let gram = Gram::new(&Kernel::Rbf { g }, &x);
        let params = SmoParams { trace: true, ..SmoParams::new(c) };
        let sol = smo_solve(&gram, &y, &params).unwrap();
        prop_assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!(balance.abs() <= 1e-8 * c.max(1.0));
        prop_assert!(sol.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0)));
        prop_assert!(kkt_residual(&gram, &y, &sol.alpha, sol.bias, c) <= params.tol * (1.0 + 1e-9));
    }
}

fn clusters(per: usize, spread: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Zone>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (k, c) in centres.iter().enumerate() {
        for _ in 0..per {
            x.push(vec![c[0] + rng.random_range(-spread..spread), c[1] + rng.random_range(-spread..spread)]);
            z.push(Zone::new(k as u8 + 1).unwrap());
        }
    }
    (x, z)
}

#[test]
fn separated_clusters_are_learned_by_both_strategies() {
    let (x, z) = clusters(20, 0.8, 3);
    for decoder in [Decoder::ArgMax, Decoder::Vote(VotingTable::V), Decoder::Vote(VotingTable::IX)] {
        let clf = ZoneClassifier::train(&x, &z, Kernel::Rbf { g: 0.5 }, decoder, &SmoParams::new(10.0)).unwrap();
        for (row, zone) in x.iter().zip(&z) {
            assert_eq!(clf.classify(row), Some(*zone));
        }
        assert_eq!(clf.classify(&[3.0, 0.1]).unwrap().get(), 2);
        assert_eq!(clf.classify(&[0.0, 0.1]), clf.classify(&[0.0, 0.1]));
    }
}

#[test]
fn missing_zone_is_rejected() {
    let (x, z) = clusters(5, 0.5, 1);
    let err = ZoneClassifier::train(&x[..10], &z[..10], Kernel::Rbf { g: 1.0 }, Decoder::ArgMax, &SmoParams::new(1.0));
    assert!(err.is_err());
}

#[test]
fn row_order_does_not_change_the_optimum() {
    let (x, z) = clusters(25, 2.0, 9);
    let y: Vec<f64> = z.iter().map(|z| if z.get() == 2 { 1.0 } else { -1.0 }).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let k = Kernel::Rbf { g: 1.0 };
    let params = SmoParams::new(5.0);
    let a = smo_solve(&Gram::new(&k, &x), &y, &params).unwrap();
    let b = smo_solve(&Gram::new(&k, &xp), &yp, &params).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-4 * a.objective.abs().max(1.0));

    let ma = faultzone::svm::BinarySvmModel::from_solution(k, 5.0, &x, &y, &a);
    let mb = faultzone::svm::BinarySvmModel::from_solution(k, 5.0, &xp, &yp, &b);
    let probe: Vec<[f64; 2]> = (0..400).map(|i| [(i % 20) as f64 * 0.25 - 1.0, (i / 20) as f64 * 0.25 - 1.0]).collect();
    let agree = probe.iter().filter(|p| (ma.decision(&p[..]) >= 0.0) == (mb.decision(&p[..]) >= 0.0)).count();
    assert!(agree as f64 >= 0.99 * probe.len() as f64);
}

#[test]
fn grid_search_picks_a_working_cell_and_matches_direct_training() {
    let (x, z) = clusters(15, 1.5, 5);
    let (xe, ze) = clusters(10, 1.5, 6);
    let grid = GridSpec { c: vec![1.0, 100.0], g: vec![0.3, 3.0] };
    for decoder in [Decoder::ArgMax, Decoder::Vote(VotingTable::VI)] {
        let out = grid_search(&x, &z, &xe, &ze, &grid, decoder, 1e-3).unwrap();
        assert_eq!(out.cells.len(), 4);
        for cell in &out.cells {
            let clf =
                ZoneClassifier::train(&x, &z, Kernel::Rbf { g: cell.g }, decoder, &SmoParams::new(cell.c)).unwrap();
            let direct = xe.iter().zip(&ze).filter(|(r, zz)| clf.classify(r) == Some(**zz)).count();
            assert_eq!(direct, cell.correct, "C={} g={}", cell.c, cell.g);
        }
        let single = GridSpec { c: vec![7.0], g: vec![0.9] };
        let one = grid_search(&x, &z, &xe, &ze, &single, decoder, 1e-3).unwrap();
        assert_eq!((one.best_cell().c, one.best_cell().g), (7.0, 0.9));
    }
    assert_eq!(Decoder::ArgMax.strategy(), Strategy::Oaa);
}

#[test]
fn model_file_round_trip_preserves_predictions() {
    let (x, z) = clusters(10, 1.2, 8);
    let clf =
        ZoneClassifier::train(&x, &z, Kernel::Rbf { g: 0.7 }, Decoder::Vote(VotingTable::VI), &SmoParams::new(3.0))
            .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    clf.save(&path).unwrap();
    let back = ZoneClassifier::load(&path).unwrap();
    assert_eq!(back, clf);
    for r in &x {
        assert_eq!(back.decision_values(r), clf.decision_values(r));
    }
}
