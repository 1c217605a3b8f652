use proptest::prelude::*;
use pyrosort::metrics::published::*;
use pyrosort::metrics::*;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

fn labels(k: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::vec((0..k, 0..k), 1..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_pairwise_counting(pairs in labels(4)) {
        let classes = names(4);
        let (actual, predicted): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let cm = ConfusionMatrix::from_indices(&actual, &predicted, &classes).unwrap();
        for (c, name) in classes.iter().enumerate() {
            let tp = pairs.iter().filter(|&&(a, p)| a == c && p == c).count() as f64;
            let said = pairs.iter().filter(|&&(_, p)| p == c).count() as f64;
            let truly = pairs.iter().filter(|&&(a, _)| a == c).count() as f64;
            prop_assert_eq!(cm.precision(name).unwrap(), (said > 0.0).then(|| tp / said));
            prop_assert_eq!(cm.recall(name).unwrap(), (truly > 0.0).then(|| tp / truly));
        }
        let hits = pairs.iter().filter(|(a, p)| a == p).count() as f64;
        prop_assert!((cm.accuracy().unwrap() - hits / pairs.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn accuracy_is_support_weighted_recall(pairs in labels(5)) {
        let classes = names(5);
        let (actual, predicted): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let cm = ConfusionMatrix::from_indices(&actual, &predicted, &classes).unwrap();
        let n = cm.total() as f64;
        let weighted: f64 = classes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| cm.recall(c).unwrap().map(|r| r * cm.actual_total(i) as f64 / n))
            .sum();
        prop_assert!((weighted - cm.accuracy().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn class_order_is_irrelevant(pairs in labels(4), perm in Just(vec![2usize, 0, 3, 1]).prop_shuffle()) {
        let classes = names(4);
        let (actual, predicted): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let cm = ConfusionMatrix::from_indices(&actual, &predicted, &classes).unwrap();
        let order: Vec<String> = perm.iter().map(|&i| classes[i].clone()).collect();
        let re = cm.reorder(&order).unwrap();
        let (a, b) = (EvaluationReport::from_confusion(&cm).unwrap(), EvaluationReport::from_confusion(&re).unwrap());
        prop_assert_eq!(a.accuracy, b.accuracy);
        prop_assert!((a.macro_precision - b.macro_precision).abs() < 1e-12);
        prop_assert!((a.macro_recall - b.macro_recall).abs() < 1e-12);
        for c in &classes {
            prop_assert_eq!(a.class_metrics(c), b.class_metrics(c));
        }
    }

    #[test]
    fn collapse_preserves_total(pairs in labels(4)) {
        let classes = names(4);
        let (actual, predicted): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let cm = ConfusionMatrix::from_indices(&actual, &predicted, &classes).unwrap();
        let mapping = classes.iter().map(|c| (c.clone(), if c == "c1" { "c1".into() } else { "rest".to_string() })).collect();
        let small = cm.collapse(&mapping, &["c1".to_string(), "rest".to_string()]).unwrap();
        prop_assert_eq!(small.total(), cm.total());
        prop_assert_eq!(small.recall("c1").unwrap(), cm.recall("c1").unwrap());
    }
}

#[test]
fn empty_matrix_has_no_accuracy() {
    let cm = ConfusionMatrix::zeros(names(3)).unwrap();
    assert!(matches!(cm.accuracy(), Err(pyrosort::Error::UndefinedMetric(_))));
}

#[test]
fn published_matrices_have_111_items() {
    for p in [four_class_pretrained(), four_class_scratch(), binary_pretrained()] {
        assert_eq!(p.matrix.total(), 111, "{}", p.name);
    }
}

#[test]
fn binary_delta_uses_collapse() {
    let four = EvaluationReport::from_confusion(&four_class_pretrained().matrix).unwrap();
    let two = EvaluationReport::from_confusion(&binary_pretrained().matrix).unwrap();
    let mapping = pyrosort::labels::LabelScheme::BatteryVsOther.mapping();
    let d = compare_reports(&four, &two, Some(&mapping)).unwrap();
    assert_eq!(d.classes, ["battery", "other"]);
    assert!(compare_reports(&four, &two, None).is_err());
    let b = d.class("battery").unwrap();
    // collapsed four-class battery precision is 28/31, binary 26/26
    assert!((b.precision.unwrap() - (1.0 - 28.0 / 31.0)).abs() < 1e-12);
}
