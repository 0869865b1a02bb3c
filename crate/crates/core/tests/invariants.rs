use expertise_core::corpus::Class;
use expertise_core::eval::{stratified_folds, ConfusionMatrix};
use expertise_core::forest::{train_forest, ForestConfig};
use expertise_core::prep::{fit_conditioner, spread_subsample, CfsEvaluator, Dataset};
use proptest::prelude::*;

fn class_of(b: bool) -> Class {
    if b {
        Class::Expert
    } else {
        Class::Novice
    }
}

fn dataset(rows: Vec<Vec<Option<f64>>>, labels: Vec<bool>) -> Dataset {
    let m = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    Dataset::new(
        (0..m).map(|j| format!("f{j}")).collect(),
        rows,
        labels.into_iter().map(class_of).collect(),
        (0..n).map(|i| format!("s{i}")).collect(),
    )
    .unwrap()
}

/// Rows of `m` values, a few of them missing, plus labels with both classes.
fn labeled_rows(m: usize) -> impl Strategy<Value = (Vec<Vec<Option<f64>>>, Vec<bool>)> {
    (6usize..40).prop_flat_map(move |n| {
        let cell = prop_oneof![9 => (-50.0f64..50.0).prop_map(Some), 1 => Just(None)];
        (
            prop::collection::vec(prop::collection::vec(cell, m), n),
            prop::collection::vec(any::<bool>(), n).prop_filter("both classes", |l| {
                l.iter().any(|&b| b) && l.iter().any(|&b| !b)
            }),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kappa_is_symmetric_under_label_swap(a in 0u64..60, b in 0u64..60, c in 0u64..60, d in 0u64..60) {
        prop_assume!(a + b + c + d > 0);
        let cm = ConfusionMatrix::new([[a, b], [c, d]]);
        let swapped = ConfusionMatrix::new([[d, c], [b, a]]);
        match (cm.kappa(), swapped.kappa()) {
            (Ok(k1), Ok(k2)) => {
                prop_assert!((k1 - k2).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&k1));
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "asymmetric result {other:?}"),
        }
        prop_assert_eq!(cm.accuracy().unwrap(), swapped.accuracy().unwrap());
    }

    #[test]
    fn conditioner_maps_training_rows_into_unit_interval((rows, labels) in labeled_rows(3)) {
        let d = dataset(rows, labels);
        let Ok(cond) = fit_conditioner(&d) else { return Ok(()) };
        for row in &d.rows {
            for v in cond.transform_row(row).unwrap() {
                prop_assert!(v.is_finite() && (0.0..=1.0).contains(&v), "value {v}");
            }
        }
    }

    #[test]
    fn spread_subsample_equalises_classes((rows, labels) in labeled_rows(2), seed in any::<u64>()) {
        let d = dataset(rows, labels);
        let [n, e] = d.class_counts();
        let b = spread_subsample(&d, seed).unwrap();
        prop_assert_eq!(b.class_counts(), [n.min(e), n.min(e)]);
        prop_assert!(b.ids.iter().all(|id| d.ids.contains(id)));
        prop_assert_eq!(b.ids.clone(), spread_subsample(&d, seed).unwrap().ids);
    }

    #[test]
    fn fold_sizes_stay_within_one(labels in prop::collection::vec(any::<bool>(), 20..80), k in 2usize..8, seed in any::<u64>()) {
        let classes: Vec<Class> = labels.into_iter().map(class_of).collect();
        let Ok(folds) = stratified_folds(&classes, k, seed) else { return Ok(()) };
        for class in Class::ORDER {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| (0..classes.len()).filter(|&i| folds.fold_of[i] == f && classes[i] == class).count())
                .collect();
            prop_assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn cfs_merit_ignores_subset_order((rows, labels) in labeled_rows(4)) {
        let d = dataset(rows, labels);
        let eval = CfsEvaluator::new(&d);
        let forward = eval.merit(&[0, 1, 3]);
        let backward = eval.merit(&[3, 1, 0]);
        prop_assert!((forward - backward).abs() < 1e-12);
    }

    #[test]
    fn forest_is_invariant_under_monotone_transforms((rows, labels) in labeled_rows(3), seed in any::<u64>()) {
        let d = dataset(rows.clone(), labels.clone());
        let warped: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.map(|x| (x / 10.0).exp() * 3.0 - 7.0)).collect())
            .collect();
        let w = dataset(warped.clone(), labels);
        let cfg = ForestConfig { n_trees: 15, master_seed: seed, ..ForestConfig::default() };
        let (m1, m2) = (train_forest(&d, &cfg).unwrap(), train_forest(&w, &cfg).unwrap());
        for (r1, r2) in rows.iter().zip(&warped) {
            prop_assert_eq!(m1.predict(r1).unwrap(), m2.predict(r2).unwrap());
        }
    }
}
