mod common;

use proptest::prelude::*;
use rand::Rng;
use slrr::eval::{align_labels, clustering_error};
use slrr::LabelVector;

use common::*;

fn lv(v: Vec<usize>) -> LabelVector {
    LabelVector::new(v).unwrap()
}

#[test]
fn assignment_matches_brute_force() {
    let mut r = rng(2024);
    for _ in 0..1000 {
        let k = r.random_range(1..=6);
        let n = r.random_range(1..40);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(1..=k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(1..=k)).collect();
        let got = clustering_error(&lv(pred.clone()), &lv(truth.clone())).unwrap();
        assert_eq!(got, brute_force_error(&pred, &truth, k));
    }
}

proptest! {
    #[test]
    fn relabeling_either_side_is_free(
        labels in prop::collection::vec((1usize..=4, 1usize..=4), 1..30),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let (pred, truth): (Vec<_>, Vec<_>) = labels.into_iter().unzip();
        let base = clustering_error(&lv(pred.clone()), &lv(truth.clone())).unwrap();
        let renamed: Vec<usize> = pred.iter().map(|&p| perm[p - 1] + 1).collect();
        prop_assert_eq!(base, clustering_error(&lv(renamed), &lv(truth.clone())).unwrap());
        let renamed_truth: Vec<usize> = truth.iter().map(|&t| perm[t - 1] + 1).collect();
        prop_assert_eq!(base, clustering_error(&lv(pred.clone()), &lv(renamed_truth)).unwrap());
        prop_assert!((0.0..=1.0).contains(&base));
        let a = align_labels(&lv(pred), &lv(truth)).unwrap();
        prop_assert_eq!(a.error, base);
    }
}
