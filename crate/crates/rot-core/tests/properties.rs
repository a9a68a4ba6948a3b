//! Property tests for the structural invariants that hold for arbitrary
//! inputs.

use proptest::prelude::*;

use rot_core::eval::{extract_answer, robustness_score, ExtractionTemplate, TaskKind};
use rot_core::linalg::{cosine, dot, principal_component, SampleMatrix, Vector};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

proptest! {
    #[test]
    fn cosine_is_scale_invariant(
        raw_a in finite_vec(6),
        raw_b in finite_vec(6),
        lambda in 0.001..1e3f64,
        mu in 0.001..1e3f64,
    ) {
        let a = Vector::new(raw_a).unwrap();
        let b = Vector::new(raw_b).unwrap();
        prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
        let base = cosine(&a, &b).unwrap();
        let scaled = cosine(&a.scaled(lambda), &b.scaled(mu)).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&base));
    }

    #[test]
    fn dot_is_deterministic_and_symmetric_in_zeros(raw in finite_vec(8)) {
        let a = Vector::new(raw.clone()).unwrap();
        let b = Vector::new(raw).unwrap();
        let d1 = dot(&a, &b).unwrap();
        let d2 = dot(&a, &b).unwrap();
        prop_assert_eq!(d1, d2);
        prop_assert!(d1 >= 0.0, "self dot is a sum of squares");
    }

    #[test]
    fn pca_is_scale_invariant_up_to_sign(
        rows in prop::collection::vec(finite_vec(4), 3..10),
        lambda in 0.01..100.0f64,
    ) {
        let m = SampleMatrix::from_raw(rows.clone()).unwrap();
        let scaled = SampleMatrix::from_raw(
            rows.iter().map(|r| r.iter().map(|v| v * lambda).collect()).collect(),
        ).unwrap();
        let a = principal_component(&m, true);
        let b = principal_component(&scaled, true);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let c = cosine(&a, &b).unwrap().abs();
                prop_assert!(c >= 1.0 - 1e-8, "cosine {}", c);
            }
            // Degenerate in one scaling means degenerate in the other.
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "mismatched results {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn robustness_is_permutation_invariant_and_nonnegative(
        mut accs in prop::collection::vec(0.0..100.0f64, 2..6),
        swap_a in 0usize..6,
        swap_b in 0usize..6,
    ) {
        let base = robustness_score(&accs).unwrap();
        prop_assert!(base >= 0.0);
        let (i, j) = (swap_a % accs.len(), swap_b % accs.len());
        accs.swap(i, j);
        let swapped = robustness_score(&accs).unwrap();
        prop_assert!((base - swapped).abs() < 1e-9);
    }

    #[test]
    fn robustness_zero_iff_all_equal(acc in 0.0..100.0f64, n in 2usize..6) {
        let accs = vec![acc; n];
        prop_assert_eq!(robustness_score(&accs).unwrap(), 0.0);
    }

    #[test]
    fn robustness_of_two_is_absolute_difference(a in 0.0..100.0f64, b in 0.0..100.0f64) {
        prop_assert!((robustness_score(&[a, b]).unwrap() - (a - b).abs()).abs() < 1e-12);
    }

    #[test]
    fn number_extraction_never_panics_and_parses(text in ".{0,60}") {
        let template = ExtractionTemplate::builtin(TaskKind::Number);
        if let Some(extracted) = extract_answer(&text, &template) {
            prop_assert!(extracted.parse::<f64>().is_ok(), "unparseable {extracted:?}");
        }
    }

    #[test]
    fn yes_no_extraction_is_normalized(text in ".{0,60}") {
        let template = ExtractionTemplate::builtin(TaskKind::YesNo);
        if let Some(extracted) = extract_answer(&text, &template) {
            prop_assert!(extracted == "yes" || extracted == "no");
        }
    }
}
