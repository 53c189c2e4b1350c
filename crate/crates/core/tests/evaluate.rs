use democirc_core::data::{Output, TargetTriple};
use democirc_core::evaluate::{
    compute_metrics, compute_series, copeland_rank, copeland_table, load_metric_table, ComparisonMatrix, Metric,
    MetricError, MetricReport, Scope,
};
use proptest::prelude::*;

const TABLE5: &str = include_str!("../fixtures/table5_testing.csv");
const TABLE4: &str = include_str!("../fixtures/table4_training.csv");

fn one(d: &[f64], p: &[f64]) -> MetricReport {
    compute_series(d, p, Scope::PerOutput(Output::Recycle)).unwrap()
}

fn close(a: f64, b: f64) {
    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
}

/// Hand-computed expectations: rmse, mae, mape, si, u95, r2, nse.
fn check(r: &MetricReport, expected: [f64; 7]) {
    let got = [r.rmse, r.mae, r.mape, r.si, r.u95, r.r2, r.nse];
    for (g, e) in got.iter().zip(expected) {
        if e.is_nan() {
            assert!(g.is_nan(), "expected NaN, got {g}");
        } else {
            close(*g, e);
        }
    }
}

#[test]
fn perfect_fit() {
    let r = one(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
    check(&r, [0.0, 0.0, 0.0, 0.0, 1.96 * (2.0f64 / 3.0).sqrt(), 1.0, 1.0]);
    assert!(r.issues.is_empty());
}

#[test]
fn flat_prediction_of_a_ramp() {
    let r = one(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]);
    let rmse = (2.0f64 / 3.0).sqrt();
    assert_eq!(r.mae, 2.0 / 3.0);
    close(r.rmse, rmse);
    close(r.r2, 1.0 - 2.0 / 14.0);
    close(r.nse, 0.0);
    close(r.si, rmse / 2.0);
    close(r.mape, 4.0 / 9.0);
    assert!(r.u95.abs() < 1e-6);
}

#[test]
fn constant_prediction_at_the_mean() {
    let r = one(&[2.0, 4.0, 6.0, 8.0], &[5.0; 4]);
    check(&r, [5f64.sqrt(), 2.0, 55.0 / 96.0, 5f64.sqrt() / 5.0, 0.0, 5.0 / 6.0, 0.0]);
}

#[test]
fn all_zero_actuals() {
    let r = one(&[0.0, 0.0], &[3.0, 4.0]);
    check(&r, [12.5f64.sqrt(), 3.5, f64::NAN, f64::NAN, 0.0, f64::NAN, f64::NAN]);
    assert_eq!(r.mape_excluded, 2);
    for issue in [
        MetricError::AllRowsExcludedFromMape,
        MetricError::ZeroMeanForSi,
        MetricError::ZeroVarianceForNse,
        MetricError::ZeroSumOfSquaresForR2,
    ] {
        assert!(r.issues.contains(&issue), "{issue:?}");
    }
    assert_eq!(r.strict().unwrap_err(), r.issues[0]);
}

#[test]
fn zero_actual_rows_are_left_out_of_mape() {
    let r = one(&[0.0, 2.0, 4.0], &[1.0, 2.0, 3.0]);
    let rmse = (2.0f64 / 3.0).sqrt();
    check(&r, [rmse, 2.0 / 3.0, 0.125, rmse / 2.0, 1.96 * 2f64.sqrt(), 0.9, 0.75]);
    assert_eq!(r.mape_excluded, 1);
    assert!(r.issues.is_empty());
}

#[test]
fn u95_clamps_when_error_exceeds_spread() {
    let r = one(&[1.0, 3.0], &[5.0, -1.0]);
    check(&r, [4.0, 4.0, 8.0 / 3.0, 2.0, 0.0, -2.2, -15.0]);
    assert!(r.u95_clamped);
    close(r.u95_standard, 1.96 * 17f64.sqrt());
}

#[test]
fn negative_mean_series() {
    let r = one(&[-2.0, -4.0], &[-3.0, -3.0]);
    check(&r, [1.0, 1.0, 0.375, -1.0 / 3.0, 0.0, 0.9, 0.0]);
}

#[test]
fn single_row() {
    let r = one(&[5.0], &[4.0]);
    check(&r, [1.0, 1.0, 0.2, 0.2, 0.0, 0.96, f64::NAN]);
    assert_eq!(r.issues, vec![MetricError::ZeroVarianceForNse]);
}

#[test]
fn scaled_prediction_keeps_pearson_at_one() {
    let r = one(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
    let rmse = (14.0f64 / 3.0).sqrt();
    check(&r, [rmse, 2.0, 1.0, rmse / 2.0, 0.0, 0.0, -6.0]);
    close(r.r2_pearson, 1.0);
    assert!(r.u95_clamped);
}

#[test]
fn aggregate_scope_averages_the_three_materials() {
    let actual = [TargetTriple::new(3.0, 6.0, 9.0), TargetTriple::new(1.0, 2.0, 3.0)];
    let predicted = [TargetTriple::new(6.0, 6.0, 6.0), TargetTriple::new(0.0, 0.0, 0.0)];
    let r = compute_metrics(&actual, &predicted, Scope::Aggregate).unwrap();
    check(&r, [2f64.sqrt(), 1.0, 0.5, 2f64.sqrt() / 4.0, 1.96 * 2f64.sqrt(), 0.9, 0.5]);
    assert_eq!(r.scope, Scope::Aggregate);
    // reuse column: D = [6, 2], P = [6, 0], the same series
    let reuse = compute_metrics(&actual, &predicted, Scope::PerOutput(Output::Reuse)).unwrap();
    close(reuse.rmse, 2f64.sqrt());
    // landfill column: D = [9, 3], P = [6, 0]
    let landfill = compute_metrics(&actual, &predicted, Scope::PerOutput(Output::Landfill)).unwrap();
    close(landfill.mae, 3.0);
}

#[test]
fn shape_errors() {
    assert_eq!(
        compute_series(&[1.0, 2.0], &[1.0], Scope::Aggregate),
        Err(MetricError::LengthMismatch { actual: 2, predicted: 1 })
    );
    assert_eq!(compute_metrics(&[], &[], Scope::Aggregate), Err(MetricError::EmptyInput));
}

fn assert_table6(matrix: &ComparisonMatrix) {
    let result = copeland_rank(matrix).unwrap();
    let expect = [
        ("XGBoost", 22, 4, 0, 1),
        ("RF", 9, 3, 1, 2),
        ("DT", 9, 2, 2, 3),
        ("LightGBM", -14, 1, 3, 4),
        ("KNN", -26, 0, 4, 5),
    ];
    for (name, score, wins, losses, rank) in expect {
        let e = result.get(name).unwrap();
        assert_eq!((e.score, e.wins, e.losses, e.rank), (score, wins, losses, rank), "{name}");
    }
    assert!(result.get("RF").unwrap().tied && result.get("DT").unwrap().tied);
    assert!(!result.get("XGBoost").unwrap().tied);
    let ranked: Vec<&str> = result.ranked().iter().map(|e| e.name.as_str()).collect();
    assert_eq!(ranked, ["XGBoost", "RF", "DT", "LightGBM", "KNN"]);
}

#[test]
fn copeland_reproduces_the_published_ranking() {
    let matrix = load_metric_table(TABLE5.as_bytes()).unwrap();
    assert_eq!(matrix.metrics, Metric::ALL.to_vec());
    assert_table6(&matrix);
    let text = copeland_table(&copeland_rank(&matrix).unwrap());
    assert!(text.lines().any(|l| l.starts_with("XGBoost") && l.contains("22")));
}

#[test]
fn no_six_metric_subset_gives_the_published_scores() {
    let matrix = load_metric_table(TABLE5.as_bytes()).unwrap();
    let published = [("XGBoost", 22), ("RF", 9), ("DT", 9), ("LightGBM", -14), ("KNN", -26)];
    for dropped in Metric::ALL {
        let metrics = Metric::ALL.into_iter().filter(|m| *m != dropped).collect();
        let r = copeland_rank(&matrix.clone().with_metrics(metrics)).unwrap();
        assert!(
            published.iter().any(|(name, score)| r.get(name).unwrap().score != *score),
            "dropping {dropped:?}"
        );
    }
}

#[test]
fn training_table_ranks_cleanly() {
    let matrix = load_metric_table(TABLE4.as_bytes()).unwrap();
    let r = copeland_rank(&matrix).unwrap();
    assert_eq!(r.entries.iter().map(|e| e.score).sum::<i64>(), 0);
}

fn arb_series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..50).prop_flat_map(|n| {
        (
            prop::collection::vec(-1e3f64..1e3, n),
            prop::collection::vec(-1e3f64..1e3, n),
        )
    })
}

fn arb_reports(n_models: usize) -> impl Strategy<Value = Vec<MetricReport>> {
    prop::collection::vec(
        prop::array::uniform7(prop::sample::select(vec![0.1, 0.5, 0.9, 1.0, 2.0, 5.0])),
        n_models,
    )
    .prop_map(|v| v.into_iter().map(MetricReport::from_values).collect())
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rmse_bounds_mae_and_r2_bounds_nse((d, p) in arb_series()) {
        let r = one(&d, &p);
        prop_assert!(r.rmse >= r.mae * (1.0 - 1e-12));
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        if mean != 0.0 && r.nse.is_finite() {
            prop_assert!(r.r2 >= r.nse - 1e-12 * r.nse.abs().max(1.0));
        }
    }

    #[test]
    fn copeland_scores_sum_to_zero(reports in (2usize..7).prop_flat_map(arb_reports)) {
        let r = copeland_rank(&ComparisonMatrix::new(names(reports.len()), reports)).unwrap();
        prop_assert_eq!(r.entries.iter().map(|e| e.score).sum::<i64>(), 0);
        for e in &r.entries {
            prop_assert!(e.wins + e.losses < r.entries.len());
            prop_assert!(e.rank >= 1 && e.rank <= r.entries.len());
        }
    }

    #[test]
    fn improving_a_metric_never_lowers_the_score(reports in (2usize..6).prop_flat_map(arb_reports), who in 0usize..6, factor in 0.0f64..1.0) {
        let who = who % reports.len();
        let before = copeland_rank(&ComparisonMatrix::new(names(reports.len()), reports.clone())).unwrap();
        let mut better = reports;
        better[who].rmse *= factor;
        let after = copeland_rank(&ComparisonMatrix::new(names(better.len()), better)).unwrap();
        prop_assert!(after.entries[who].score >= before.entries[who].score);
    }

    #[test]
    fn common_rmse_scale_changes_nothing(reports in (2usize..6).prop_flat_map(arb_reports), c in 0.01f64..100.0) {
        let before = copeland_rank(&ComparisonMatrix::new(names(reports.len()), reports.clone())).unwrap();
        let scaled: Vec<MetricReport> = reports.into_iter().map(|mut r| { r.rmse *= c; r }).collect();
        let after = copeland_rank(&ComparisonMatrix::new(names(scaled.len()), scaled)).unwrap();
        prop_assert_eq!(before, after);
    }
}
