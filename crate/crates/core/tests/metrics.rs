use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swab_core::capability::rank_descending;
use swab_core::eval::{borda_ensemble, kendall_tau_b, kendall_tau_top5, top5_recall, RankVector};
use swab_oracle::{ranks_by_counting, recall_by_sets, tau_b_by_signs, tau_top5_by_signs};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i}")).collect()
}

/// Scores drawn from a small grid so ties are common.
fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..8) as f64 / 4.0).collect()
}

#[test]
fn metrics_match_oracles_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let n = rng.random_range(5..=12);
        let a = random_scores(&mut rng, n);
        let b = random_scores(&mut rng, n);
        let pred = RankVector::from_scores_desc(ids(n), &a).unwrap();
        let truth = RankVector::from_scores_desc(ids(n), &b).unwrap();
        assert_eq!(pred.ranks, ranks_by_counting(&a));

        let r5 = top5_recall(&pred, &truth).unwrap();
        assert!((r5 - recall_by_sets(&pred.ranks, &truth.ranks)).abs() <= 1e-12);
        let tau = kendall_tau_top5(&pred, &truth).unwrap();
        assert!((tau.tau - tau_top5_by_signs(&pred.ranks, &truth.ranks)).abs() <= 1e-12);
        assert!((kendall_tau_b(&a, &b) - tau_b_by_signs(&a, &b)).abs() <= 1e-12);
    }
}

#[test]
fn recall_takes_grid_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(5..=12);
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r5 = top5_recall(
            &RankVector::from_scores_desc(ids(n), &a).unwrap(),
            &RankVector::from_scores_desc(ids(n), &b).unwrap(),
        )
        .unwrap();
        assert!((0..=5).any(|k| (r5 - k as f64 / 5.0).abs() < 1e-12));
    }
}

#[test]
fn known_values() {
    let truth = RankVector::<f64>::from_scores_desc(ids(6), &[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
    let pred = RankVector::from_scores_desc(ids(6), &[5.0, 6.0, 4.0, 3.0, 1.0, 2.0]).unwrap();
    assert_eq!(top5_recall(&pred, &truth).unwrap(), 0.8);
    let t = kendall_tau_top5(&pred, &truth).unwrap();
    assert_eq!(t.intersection, 4);
    // One discordant pair out of six.
    assert!((t.tau - 4.0 / 6.0).abs() < 1e-12);
    assert_eq!(kendall_tau_top5(&truth, &truth).unwrap().tau, 1.0);
}

#[test]
fn borda_endpoints_return_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r1 = RankVector::from_scores_desc(ids(n), &a).unwrap();
        let r2 = RankVector::from_scores_desc(ids(n), &b).unwrap();
        assert_eq!(borda_ensemble(&r1, &r2, 1.0).unwrap().ranks, r1.ranks);
        assert_eq!(borda_ensemble(&r1, &r2, 0.0).unwrap().ranks, r2.ranks);
        let mid = borda_ensemble(&r1, &r2, 0.5).unwrap();
        let oracle: Vec<f64> = r1.ranks.iter().zip(&r2.ranks).map(|(x, y)| -(x + y)).collect();
        assert_eq!(mid.ranks, ranks_by_counting(&oracle));
    }
}

#[test]
fn mismatched_models_are_rejected() {
    let a = RankVector::<f64>::from_scores_desc(ids(5), &[1.0; 5]).unwrap();
    let mut b = a.clone();
    b.model_ids[0] = "other".into();
    assert!(top5_recall(&a, &b).is_err());
    let small = RankVector::<f64>::from_scores_desc(ids(4), &[1.0; 4]).unwrap();
    assert!(top5_recall(&small, &small).is_err());
}

proptest! {
    #[test]
    fn ranks_sum_and_tau_bounds(values in prop::collection::vec(0u8..6, 5..15), other in prop::collection::vec(0u8..6, 15)) {
        let a: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = other[..a.len()].iter().map(|&v| v as f64).collect();
        let r = rank_descending(&a).unwrap();
        let n = a.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        let t = kendall_tau_b(&a, &b);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t));
        prop_assert!((t - kendall_tau_b(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn tau_is_invariant_to_monotone_maps(values in prop::collection::vec(-5.0f64..5.0, 2..12), other in prop::collection::vec(-5.0f64..5.0, 12)) {
        let b = &other[..values.len()];
        let mapped: Vec<f64> = values.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
        prop_assert!((kendall_tau_b(&values, b) - kendall_tau_b(&mapped, b)).abs() < 1e-12);
        let neg: Vec<f64> = values.iter().map(|x| -x).collect();
        prop_assert!((kendall_tau_b(&values, b) + kendall_tau_b(&neg, b)).abs() < 1e-12);
    }
}
