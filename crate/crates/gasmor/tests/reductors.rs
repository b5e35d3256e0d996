mod common;

use common::*;
use gasmor::gasmodel::Discretization;
use gasmor::reductors::*;
use gasmor::Error;
use nalgebra::{DMatrix, DVector};

fn projector(u: &DMatrix<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

#[test]
fn every_method_is_biorthogonal_at_every_order() {
    let bank = pipe_bank(Discretization::Endpoint);
    for method in Method::all().into_iter().chain(Method::all_dual()) {
        let s = reduce(method, &bank, 20).unwrap();
        assert!(s.rank_p() > 0 && s.rank_q() > 0, "{method}");
        for r in 1..=s.rank_p().max(s.rank_q()) {
            let err = s.biorthogonality_error(r.min(s.rank_p()), r.min(s.rank_q()));
            assert!(err <= 1e-8, "{method} order {r}: {err:e}");
        }
        if method.galerkin() {
            assert_eq!(s.up, s.vp, "{method}");
            assert_eq!(s.uq, s.vq, "{method}");
            let g = s.up.transpose() * &s.up;
            assert!((g - DMatrix::identity(s.rank_p(), s.rank_p())).amax() <= 1e-12);
        }
        assert_eq!(s.method, method.id());
        assert_eq!(s.wp.len(), s.rank_p());
    }
    assert!(bank.stats().cache_hits >= 12);
}

#[test]
fn dual_methods_need_the_endpoint_model() {
    let bank = pipe_bank(Discretization::Midpoint);
    let m: Method = "eds_ro_l".parse().unwrap();
    assert!(matches!(reduce(m, &bank, 5), Err(Error::Unsupported(_))));
    assert!(reduce("eds_ro".parse().unwrap(), &bank, 5).is_ok());
}

#[test]
fn method_ids_round_trip() {
    let all: Vec<Method> = Method::all().into_iter().chain(Method::all_dual()).collect();
    assert_eq!(Method::all().len(), 13);
    assert_eq!(Method::all_dual().len(), 10);
    for m in &all {
        assert_eq!(m.id().parse::<Method>().unwrap(), *m);
    }
    assert_eq!("ebg_wz_l".parse::<Method>().unwrap().galerkin(), false);
    assert!("pod_r_l".parse::<Method>().is_err());
    assert!("nope".parse::<Method>().is_err());
}

#[test]
fn pod_examples() {
    let v = DVector::from_vec(vec![1.0f64, 2.0, 2.0]);
    let b = pod_block(&(&v * v.transpose()), 3);
    assert_eq!(b.u.ncols(), 1);
    assert!((b.u.column(0).dot(&v).abs() - 3.0).abs() < 1e-12);
    assert!((b.w[0] - 3.0).abs() < 1e-12);
    let id = pod_block(&DMatrix::<f64>::identity(4, 4), 4);
    assert!(id.w.iter().all(|w| (w - 1.0).abs() < 1e-14));
    assert!((projector(&id.u) - DMatrix::identity(4, 4)).amax() < 1e-12);
}

#[test]
fn eds_reduces_to_pod_in_degenerate_cases() {
    let wr = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 0.01]);
    let pod = pod_block(&wr, 2);
    let zero = eds_ro_block(&wr, &DMatrix::zeros(3, 3), 2).unwrap();
    let same = eds_ro_block(&wr, &wr, 2).unwrap();
    assert!((projector(&zero.u) - projector(&pod.u)).amax() < 1e-10);
    assert!((projector(&same.u) - projector(&pod.u)).amax() < 1e-10);
    assert!(eds_ro_block(&DMatrix::<f64>::zeros(3, 3), &DMatrix::zeros(3, 3), 2).is_err());
}

#[test]
fn one_state_balancing_yields_hankel_value_half() {
    // ẋ = −x + u, y = x: W_R = W_O = W_X = 1/2
    let w = DMatrix::from_element(1, 1, 0.5f64);
    for b in [ebt_ro_block(&w, &w, 1).unwrap(), bpod_block(&w, &w, 1).unwrap(), ebt_cross_block(&w, 1).unwrap()] {
        assert!((b.w[0] - 0.5).abs() <= 1e-6);
        assert!((b.v[(0, 0)] * b.u[(0, 0)] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn balancing_of_diagonal_gramians() {
    let wr = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 0.25]));
    let wo = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0]));
    let b = ebt_ro_block(&wr, &wo, 3).unwrap();
    let hsv: Vec<f64> = [4.0f64, 1.0, 0.25].iter().map(|v| v.sqrt()).collect();
    for k in 0..3 {
        assert!((b.w[k] - hsv[k]).abs() < 1e-12);
    }
    // balanced coordinates: Vᵀ W_R V = Uᵀ W_O U = Σ
    let r = b.v.transpose() * &wr * &b.v;
    let o = b.u.transpose() * &wo * &b.u;
    for k in 0..3 {
        assert!((r[(k, k)] - hsv[k]).abs() < 1e-10 && (o[(k, k)] - hsv[k]).abs() < 1e-10, "{r} {o} {} {}", b.u, b.v);
    }
}

#[test]
fn balanced_gains_ordering_matches_brute_force() {
    let s = Surrogate { a: [1.0, 2.0, 0.5], b: [1.0, 3.0, 0.5], c: [2.0, 1.0, 1.0] };
    let bal = ebt_ro_block(&s.wr(), &s.wo(), 3).unwrap();
    // Hankel order is channel 0, 1, 2
    let hankel: Vec<usize> = (0..3).map(|k| axis(bal.u.column(k))).collect();
    assert_eq!(hankel, vec![0, 1, 2]);
    let sorted = sort_balanced_gains(&bal, &s.c());
    let got: Vec<usize> = (0..3).map(|k| axis(sorted.u.column(k))).collect();
    let expect = brute_force_ranking(|k| s.channel_energy(k));
    assert_eq!(expect, vec![1, 0, 2]);
    assert_eq!(got, expect);
}

#[test]
fn goal_oriented_ordering_matches_brute_force() {
    let s = Surrogate { a: [0.5, 0.5, 0.5], b: [2.0, 1.0, 3.0], c: [1.0, 3.0, 0.5] };
    let pod = pod_block(&s.wr(), 3);
    let pod_order: Vec<usize> = (0..3).map(|k| axis(pod.u.column(k))).collect();
    assert_eq!(pod_order, vec![2, 0, 1]);
    let sorted = goal_oriented_sort(&pod, &s.c());
    let got: Vec<usize> = (0..3).map(|k| axis(sorted.u.column(k))).collect();
    // d_k = c_k² · √(W_R)_kk
    let wr = s.wr();
    let expect = brute_force_ranking(|k| s.c[k].powi(2) * wr[(k, k)].sqrt());
    assert_eq!(expect, vec![1, 0, 2]);
    assert_eq!(got, expect);
}

#[test]
fn dmd_recovers_geometric_ratio() {
    let a = 0.83f64;
    let x: Vec<f64> = (0..12).map(|k| 1.7 * a.powi(k)).collect();
    let xm = DMatrix::from_row_slice(1, 11, &x[..11]);
    let xp = DMatrix::from_row_slice(1, 11, &x[1..]);
    let ahat = dmd_operator(&[(xm, xp)]).unwrap();
    assert!((ahat[(0, 0)] - a).abs() <= 1e-10);
}

#[test]
fn dmd_recovers_linear_transition() {
    let m = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.0, -0.2, 0.8, 0.05, 0.0, 0.3, 0.7]);
    let mut cols = vec![DVector::from_vec(vec![1.0, 0.5, -0.3])];
    for k in 0..8 {
        let next = &m * &cols[k];
        cols.push(next);
    }
    let x = DMatrix::from_columns(&cols);
    let pairs = [(x.columns(0, 8).into_owned(), x.columns(1, 8).into_owned())];
    let ahat = dmd_operator(&pairs).unwrap();
    assert!((&ahat - &m).amax() <= 1e-10);
    let (b, _) = dmd_block(&pairs, 2).unwrap();
    assert_eq!(b.u.ncols(), 2);
    assert!(dmd_operator::<f64>(&[]).is_err());
}

#[test]
fn identity_series_is_exact() {
    let s = ProjectorSeries::<f64>::identity(3, 4);
    assert_eq!(s.biorthogonality_error(3, 4), 0.0);
    assert_eq!((s.rank_p(), s.rank_q()), (3, 4));
}
