use andt::evaluation::{delta_s, pca_project, roc_auc, threshold_metrics};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Scores on a coarse grid (to force ties) with at least one label of each class.
fn labelled(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..=max_len)
        .prop_flat_map(|n| (prop::collection::vec(0u8..9, n), prop::collection::vec(0u8..2, n)))
        .prop_map(|(s, mut l)| {
            l[0] = 0;
            l[1] = 1;
            (s.into_iter().map(|v| v as f64 / 8.0).collect(), l)
        })
}

fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut ties, mut pairs) = (0u64, 0u64, 0u64);
    for (sp, _) in scores.iter().zip(labels).filter(|(_, &l)| l == 1) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, &l)| l == 0) {
            pairs += 1;
            match sp.partial_cmp(sn).unwrap() {
                std::cmp::Ordering::Greater => wins += 1,
                std::cmp::Ordering::Equal => ties += 1,
                std::cmp::Ordering::Less => {}
            }
        }
    }
    (2 * wins + ties) as f64 / (2 * pairs) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auc_equals_pair_counting((scores, labels) in labelled(200)) {
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap().auc, pair_count_auc(&scores, &labels));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_ignores_increasing_transforms((scores, labels) in labelled(60), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let base = roc_auc(&scores, &labels).unwrap().auc;
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        prop_assert_eq!(roc_auc(&exp, &labels).unwrap().auc, base);
        prop_assert_eq!(roc_auc(&affine, &labels).unwrap().auc, base);
    }

    #[test]
    fn roc_points_are_monotone_and_anchored((scores, labels) in labelled(60)) {
        let curve = roc_auc(&scores, &labels).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        prop_assert!((0.0..=1.0).contains(&curve.auc));
    }

    #[test]
    fn confusion_counts_cover_every_frame((scores, labels) in labelled(80), thr in -0.2f64..1.2) {
        let m = threshold_metrics(&scores, &labels, thr).unwrap();
        let c = m.counts;
        prop_assert_eq!(c.tp + c.fp + c.tn + c.fn_, scores.len());
        prop_assert_eq!(c.tp + c.fn_, labels.iter().filter(|&&l| l == 1).count());
        // strict comparison: a score equal to the threshold is normal
        let flagged = scores.iter().filter(|&&s| s > thr).count();
        prop_assert_eq!(c.tp + c.fp, flagged);
        prop_assert!((m.oa - (c.tp + c.tn) as f64 / scores.len() as f64).abs() < 1e-15);
        if m.recall > 0.0 && m.precision > 0.0 {
            let h = 2.0 * m.recall * m.precision / (m.recall + m.precision);
            prop_assert!((m.f1 - h).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_s_is_affine_equivariant((scores, labels) in labelled(80), a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let mapped: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let lhs = delta_s(&mapped, &labels).unwrap();
        let rhs = a * delta_s(&scores, &labels).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn pca_with_all_components_is_lossless(
        (n, k, data) in (2usize..20, 1usize..6).prop_flat_map(|(n, k)| (Just(n), Just(k), prop::collection::vec(-3.0f64..3.0, n * k)))
    ) {
        let x = DMatrix::from_row_slice(n, k, &data);
        let p = pca_project(&x, k).unwrap();
        let mean = nalgebra::RowDVector::from_vec(p.mean.clone());
        let centered = DMatrix::from_fn(n, k, |i, j| x[(i, j)] - mean[j]);
        let back = &p.projected * p.components.transpose();
        prop_assert!((back - centered).abs().max() < 1e-8);
        let gram = p.components.transpose() * &p.components;
        prop_assert!((gram - DMatrix::<f64>::identity(k, k)).abs().max() < 1e-9);
        for w in p.explained_ratio.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
