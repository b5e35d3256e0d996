mod common;

use common::*;
use gasmor::gramians::*;
use gasmor::store::GramianCache;
use nalgebra::DMatrix;

/// Linear oracles for the zero-anchored linearized pipe: (M, Bm, C) with M = E⁻¹A, Bm = E⁻¹B.
fn oracle_parts() -> (Anchor<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let a = linear_pipe_anchor();
    let (e, am, b, c) = dense_lti(&a.model, &a.gas);
    let einv = e.try_inverse().unwrap();
    let m = &einv * am;
    let bm = &einv * b;
    (a, m, bm, c)
}

fn assert_blocks(g: &GramianPair<f64>, w: &DMatrix<f64>, np: usize, nq: usize, tol: f64, what: &str) {
    let ep = rel_fro(&g.wp, &block(w, 0, np));
    let eq = rel_fro(&g.wq, &block(w, np, nq));
    assert!(ep <= tol && eq <= tol, "{what}: relative errors {ep:.3e} {eq:.3e}");
}

#[test]
fn empirical_gramians_match_lyapunov_and_sylvester_oracles() {
    let (a, m, bm, c) = oracle_parts();
    let (np, nq) = (a.model.np, a.model.nq);
    let wr = sylvester(&m, &m.transpose(), &(&bm * bm.transpose()));
    let wo = sylvester(&m.transpose(), &m, &(c.transpose() * &c));
    let wx = sylvester(&m, &m, &(&bm * &c));
    let ones_in = DMatrix::from_element(bm.ncols(), 1, 1.0);
    let ones_out = DMatrix::from_element(1, c.nrows(), 1.0);
    let wz = sylvester(&m, &m, &(&bm * ones_in * ones_out * &c));

    let bank = TrajectoryBank::new(vec![a], impulse_setup(0.05, 600.0)).unwrap();
    assert_blocks(&empirical_wr(&bank).unwrap(), &wr, np, nq, 0.05, "WR");
    assert_blocks(&empirical_wo(&bank, false).unwrap(), &wo, np, nq, 0.05, "WO");
    assert_blocks(&empirical_wo(&bank, true).unwrap(), &wo, np, nq, 0.05, "WO dual");
    assert_blocks(&empirical_wx(&bank, false).unwrap(), &wx, np, nq, 0.05, "WX");
    assert_blocks(&empirical_wx(&bank, true).unwrap(), &wx, np, nq, 0.05, "WX dual");
    assert_blocks(&empirical_wz(&bank, false).unwrap(), &wz, np, nq, 0.05, "WZ");
    assert_blocks(&empirical_wz(&bank, true).unwrap(), &wz, np, nq, 0.05, "WZ dual");

    // the dual route and the primal route agree with each other more tightly than with the oracle
    let p = empirical_wo(&bank, false).unwrap();
    let d = empirical_wo(&bank, true).unwrap();
    assert!(rel_fro(&d.wp, &p.wp) < 0.03 && rel_fro(&d.wq, &p.wq) < 0.03);

    let s = bank.stats();
    let ports = bank.n_ports();
    assert_eq!(s.input_runs, ports);
    assert_eq!(s.state_runs, np + nq);
    assert_eq!(s.dual_runs, ports);
}

#[test]
fn gramians_are_symmetric_and_semidefinite() {
    let a = linear_pipe_anchor();
    let bank = TrajectoryBank::new(vec![a], impulse_setup(1.0, 200.0)).unwrap();
    for g in [empirical_wr(&bank).unwrap(), empirical_wo(&bank, false).unwrap(), empirical_wo(&bank, true).unwrap()] {
        for w in [&g.wp, &g.wq] {
            let asym = (w - w.transpose()).norm() / w.norm();
            assert!(asym < 1e-12, "{:?} asymmetry {asym:e}", g.kind);
            let ev = w.clone().symmetric_eigenvalues();
            let floor = -1e-12 * ev.amax();
            assert!(ev.iter().all(|l| *l >= floor), "{:?} eigenvalues {ev}", g.kind);
        }
    }
}

#[test]
fn zero_scale_gives_zero_gramians() {
    let a = linear_pipe_anchor();
    let mut setup = impulse_setup(1.0, 50.0);
    setup.scaling = Scaling::Absolute(0.0);
    let bank = TrajectoryBank::new(vec![a], setup).unwrap();
    for kind in [GramianKind::WR, GramianKind::WO, GramianKind::WX, GramianKind::WZ] {
        let g = bank.gramian(kind, false).unwrap();
        assert_eq!(g.wp.norm() + g.wq.norm(), 0.0, "{kind:?}");
    }
}

#[test]
fn gramians_sum_over_samples_and_scale_quadratically() {
    let a = linear_pipe_anchor();
    let one = TrajectoryBank::new(vec![a.clone()], impulse_setup(1.0, 100.0)).unwrap();
    let two = TrajectoryBank::new(vec![a.clone(), a.clone()], impulse_setup(1.0, 100.0)).unwrap();
    let mut setup = impulse_setup(1.0, 100.0);
    setup.scaling = Scaling::Absolute(3.0);
    let scaled = TrajectoryBank::new(vec![a], setup).unwrap();
    let w1 = empirical_wr(&one).unwrap();
    let w2 = empirical_wr(&two).unwrap();
    let w3 = empirical_wr(&scaled).unwrap();
    assert!(rel_fro(&w2.wp, &(&w1.wp * 2.0)) < 1e-13);
    assert!(rel_fro(&w2.wq, &(&w1.wq * 2.0)) < 1e-13);
    // linear model: the perturbation magnitude enters squared
    assert!(rel_fro(&w3.wp, &(&w1.wp * 9.0)) < 1e-10);
    assert!(rel_fro(&w3.wq, &(&w1.wq * 9.0)) < 1e-10);
    let s = two.stats();
    assert_eq!(s.input_runs, 2 * two.n_ports());
    assert_eq!(s.state_runs, 0);
}

#[test]
fn memory_and_disk_caches_serve_repeated_requests() {
    let dir = tempfile::tempdir().unwrap();
    let a = linear_pipe_anchor();
    let setup = impulse_setup(1.0, 50.0);
    let first = TrajectoryBank::new(vec![a.clone()], setup.clone()).unwrap().with_disk_cache(GramianCache::new(dir.path()).unwrap());
    let g = first.gramian(GramianKind::WX, false).unwrap();
    let solves = first.stats().solves;
    assert!(solves > 0);
    first.gramian(GramianKind::WX, false).unwrap();
    assert_eq!(first.stats().cache_hits, 1);
    assert_eq!(first.stats().solves, solves);
    // a dual reachability request is the primal one
    first.gramian(GramianKind::WR, false).unwrap();
    first.gramian(GramianKind::WR, true).unwrap();
    assert_eq!(first.stats().cache_hits, 2);

    let second = TrajectoryBank::new(vec![a], setup).unwrap().with_disk_cache(GramianCache::new(dir.path()).unwrap());
    let h = second.gramian(GramianKind::WX, false).unwrap();
    assert_eq!(second.stats().solves, 0);
    assert_eq!(second.stats().cache_hits, 1);
    assert_eq!(g.wp, h.wp);
    assert_eq!(g.wq, h.wq);
}

#[test]
fn empty_bank_and_bad_setup_are_rejected() {
    assert!(TrajectoryBank::<f64>::new(vec![], impulse_setup(1.0, 10.0)).is_err());
    assert!(TrajectoryBank::new(vec![linear_pipe_anchor()], impulse_setup(0.0, 10.0)).is_err());
}

#[test]
fn theta_grid_has_corners_and_center() {
    let g = theta_grid::<f64>((273.15, 293.15), (500.0, 560.0));
    assert_eq!(g.len(), 5);
    assert!(g.iter().any(|p| p.t0 == 283.15 && p.rs == 530.0));
    assert!(g.iter().any(|p| p.t0 == 273.15 && p.rs == 560.0));
}
