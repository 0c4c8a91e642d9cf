use mmseg_core::datamodel::{FeatureSequence, Modality};
use mmseg_core::dcca::linear_cca_fit;
use mmseg_core::ot::{
    entropic_gw, sinkhorn_wd, squared_euclidean_costs, temporal_signals, Epsilon, OtConfig,
    PointCloud,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const PERMS3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn random_points(rng: &mut ChaCha8Rng, m: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, d, |_, _| rng.sample(StandardNormal))
}

fn distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.nrows();
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            (x.row(i) - x.row(j)).norm()
        }
    })
}

/// Exact OT between uniform 3-point clouds: some permutation is optimal.
fn permutation_ot(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let c = squared_euclidean_costs(p, q);
    PERMS3
        .iter()
        .map(|s| (0..3).map(|i| c[(i, s[i])]).sum::<f64>() / 3.0)
        .fold(f64::INFINITY, f64::min)
}

fn sharp() -> OtConfig {
    OtConfig {
        epsilon: Epsilon::Relative(0.005),
        max_iter: 20_000,
        tol: 1e-9,
        ..OtConfig::default()
    }
}

#[test]
fn self_transport_is_nearly_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_points(&mut rng, 6, 3);
    let cloud = PointCloud::uniform(p.clone()).unwrap();
    let r = sinkhorn_wd(&cloud, &cloud, &sharp()).unwrap();
    let c = squared_euclidean_costs(&p, &p);
    let mean_off = c.iter().sum::<f64>() / (36 - 6) as f64;
    assert!(r.cost <= 1e-6 * mean_off, "{} vs {}", r.cost, mean_off);
    for i in 0..6 {
        assert!(r.transport.plan[(i, i)] > 0.99 / 6.0);
    }
}

#[test]
fn single_points_cost_their_squared_distance() {
    let p = PointCloud::uniform(DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5])).unwrap();
    let q = PointCloud::uniform(DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.5])).unwrap();
    let r = sinkhorn_wd(&p, &q, &OtConfig::default()).unwrap();
    assert_eq!(r.cost, 1.0 + 9.0 + 4.0);
}

#[test]
fn three_points_within_two_percent_of_permutation_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let p = random_points(&mut rng, 3, 2);
        let q = random_points(&mut rng, 3, 2);
        let exact = permutation_ot(&p, &q);
        let r = sinkhorn_wd(
            &PointCloud::uniform(p).unwrap(),
            &PointCloud::uniform(q).unwrap(),
            &sharp(),
        )
        .unwrap();
        assert!(
            (r.cost - exact).abs() <= 0.02 * exact,
            "sinkhorn {} exact {}",
            r.cost,
            exact
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_and_translation_invariant(seed in any::<u64>(), shift in prop::collection::vec(-5.0f64..5.0, 3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_points(&mut rng, 5, 3);
        let q = random_points(&mut rng, 4, 3);
        let cfg = OtConfig::default();
        let pq = sinkhorn_wd(&PointCloud::uniform(p.clone()).unwrap(), &PointCloud::uniform(q.clone()).unwrap(), &cfg).unwrap();
        let qp = sinkhorn_wd(&PointCloud::uniform(q.clone()).unwrap(), &PointCloud::uniform(p.clone()).unwrap(), &cfg).unwrap();
        prop_assert!((pq.cost - qp.cost).abs() <= 1e-4 * pq.cost.max(1.0));

        let v = nalgebra::RowDVector::from_vec(shift);
        let shift_rows = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), 3, |i, j| m[(i, j)] + v[j]);
        let moved = sinkhorn_wd(&PointCloud::uniform(shift_rows(&p)).unwrap(), &PointCloud::uniform(shift_rows(&q)).unwrap(), &cfg).unwrap();
        prop_assert!((pq.cost - moved.cost).abs() <= 1e-6 * pq.cost.max(1.0));
        if pq.converged {
            prop_assert!(pq.transport.row_residual < cfg.tol && pq.transport.col_residual < cfg.tol);
        }
    }

    #[test]
    fn gw_is_invariant_to_isometries_and_relabeling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_points(&mut rng, 5, 2);
        let y = random_points(&mut rng, 5, 2);
        let (cx, cy) = (distances(&x), distances(&y));
        let w = vec![0.2; 5];
        let cfg = OtConfig::default();
        let base = entropic_gw(&cx, &cy, &w, &w, &cfg).unwrap();

        // rotating the points behind Cy leaves Cy, hence the cost, unchanged
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let cy_rot = distances(&(&y * rot));
        let rotated = entropic_gw(&cx, &cy_rot, &w, &w, &cfg).unwrap();
        prop_assert!((rotated.cost - base.cost).abs() <= 1e-6 * base.cost.max(1e-3));

        let perm = [3, 0, 4, 1, 2];
        let cy_perm = DMatrix::from_fn(5, 5, |i, j| cy[(perm[i], perm[j])]);
        let relabeled = entropic_gw(&cx, &cy_perm, &w, &w, &cfg).unwrap();
        prop_assert!((relabeled.cost - base.cost).abs() <= 1e-6 * base.cost.max(1e-3), "{} vs {}", relabeled.cost, base.cost);
    }
}

#[test]
fn gw_of_isometric_spaces_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cx = distances(&random_points(&mut rng, 6, 3));
    let w = vec![1.0 / 6.0; 6];
    let cfg = OtConfig {
        epsilon: Epsilon::Relative(0.001),
        max_iter: 20_000,
        ..OtConfig::default()
    };
    let r = entropic_gw(&cx, &cx, &w, &w, &cfg).unwrap();
    assert!(r.cost <= 1e-6 * cx.norm_squared(), "{}", r.cost);
}

#[test]
fn gw_three_points_close_to_best_permutation() {
    let cx: DMatrix<f64> =
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]);
    let cy: DMatrix<f64> =
        DMatrix::from_row_slice(3, 3, &[0.0, 1.4, 1.1, 1.4, 0.0, 2.1, 1.1, 2.1, 0.0]);
    let gw_cost = |t: &DMatrix<f64>| {
        let mut s = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += (cx[(i, k)] - cy[(j, l)]).powi(2) * t[(i, j)] * t[(k, l)];
                    }
                }
            }
        }
        s
    };
    let best = PERMS3
        .iter()
        .map(|p| {
            gw_cost(&DMatrix::from_fn(3, 3, |i, j| {
                if p[i] == j {
                    1.0 / 3.0
                } else {
                    0.0
                }
            }))
        })
        .fold(f64::INFINITY, f64::min);
    let w = vec![1.0 / 3.0; 3];
    let cfg = OtConfig {
        epsilon: Epsilon::Relative(0.005),
        max_iter: 20_000,
        ..OtConfig::default()
    };
    let r = entropic_gw(&cx, &cy, &w, &w, &cfg).unwrap();
    // the reported cost is the plain objective of the returned coupling
    assert!((r.cost - gw_cost(&r.coupling)).abs() < 1e-9);
    assert!(
        (r.cost - best).abs() <= 0.05 * best,
        "gw {} best permutation {}",
        r.cost,
        best
    );
}

fn seq(m: DMatrix<f64>, modality: Modality) -> FeatureSequence {
    FeatureSequence::new(m, modality).unwrap()
}

#[test]
fn window_signal_peaks_at_a_jump() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let jump = 37;
    let v = DMatrix::from_fn(
        80,
        3,
        |t, _| if t < jump { 0.0 } else { 4.0 } + 0.05 * rng.sample::<f64, _>(StandardNormal),
    );
    let l = DMatrix::from_fn(80, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (v, l) = (seq(v, Modality::Visual), seq(l, Modality::Language));
    let cca = linear_cca_fit(v.data(), l.data(), 2, 1e-4).unwrap();
    let s = temporal_signals(&v, &l, &cca, 6, &OtConfig::default()).unwrap();
    let argmax = (0..80)
        .max_by(|&a, &b| s.wd_v[a].total_cmp(&s.wd_v[b]))
        .unwrap();
    // frame t compares t-w+1..=t with t+1..=t+w
    assert_eq!(argmax, jump - 1);
    assert!(s
        .wd_v
        .iter()
        .chain(&s.wd_l)
        .chain(&s.gwd)
        .all(|x| x.is_finite() && *x >= 0.0));
    assert!(s.cca.iter().all(|c| (-1.0..=1.0).contains(c)));
}

#[test]
fn unit_window_is_the_squared_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = seq(random_points(&mut rng, 12, 3), Modality::Visual);
    let l = seq(random_points(&mut rng, 12, 2), Modality::Language);
    let cca = linear_cca_fit(v.data(), l.data(), 2, 1e-4).unwrap();
    let s = temporal_signals(&v, &l, &cca, 1, &OtConfig::default()).unwrap();
    for t in 0..11 {
        let step = (v.data().row(t) - v.data().row(t + 1)).norm_squared();
        assert!((s.wd_v[t] - step).abs() <= 1e-12 * step.max(1.0), "t={t}");
    }
    let constant = seq(DMatrix::from_element(12, 3, 1.5), Modality::Visual);
    let s = temporal_signals(&constant, &l, &cca, 3, &OtConfig::default()).unwrap();
    assert!(s.wd_v.iter().all(|&x| x == 0.0));
}
