use proptest::prelude::*;

use super::*;
use crate::anomaly::ScoredClip;
use crate::frontend::{Condition, Domain};

/// Credit of every (anomalous, normal) pair, counted one by one.
fn pair_count_oracle(normal: &[f64], anomalous: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in anomalous {
        for &n in normal {
            if a > n {
                wins += 1.0;
            } else if a == n {
                wins += 0.5;
            }
        }
    }
    wins / (normal.len() * anomalous.len()) as f64
}

/// ROC points from thresholding at every observed score (and +inf) by
/// direct counting, then integrated segment by segment up to `max_fpr`.
fn step_curve_oracle(normal: &[f64], anomalous: &[f64], max_fpr: f64) -> f64 {
    let mut thresholds: Vec<f64> = normal.iter().chain(anomalous).copied().collect();
    thresholds.push(f64::INFINITY);
    let mut pts: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let fpr = normal.iter().filter(|&&s| s >= t).count() as f64 / normal.len() as f64;
            let tpr = anomalous.iter().filter(|&&s| s >= t).count() as f64 / anomalous.len() as f64;
            (fpr, tpr)
        })
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut area = 0.0;
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let hi = x1.min(max_fpr);
        if hi <= x0 {
            continue;
        }
        let y_hi = if x1 == x0 { y1 } else { y0 + (y1 - y0) * (hi - x0) / (x1 - x0) };
        area += (hi - x0) * (y0 + y_hi) / 2.0;
    }
    area / max_fpr
}

#[test]
fn auroc_examples() {
    assert_eq!(auroc(&[0.1, 0.4], &[0.2, 0.9]).unwrap(), 0.75);
    assert_eq!(auroc(&[0.1, 0.2], &[0.3, 0.9]).unwrap(), 1.0);
    assert_eq!(auroc(&[0.5; 4], &[0.5; 3]).unwrap(), 0.5);
    assert_eq!(auroc(&[0.1, 0.4], &[0.2, 0.9]).unwrap(), pair_count_oracle(&[0.1, 0.4], &[0.2, 0.9]));
}

#[test]
fn metrics_need_both_classes() {
    assert!(auroc(&[], &[1.0]).is_err());
    assert!(auroc(&[1.0], &[]).is_err());
    assert!(pauroc(&[1.0], &[], 0.1).is_err());
    assert!(auroc(&[f64::NAN], &[1.0]).is_err());
    assert!(pauroc(&[1.0], &[2.0], 0.0).is_err());
    assert!(pauroc(&[1.0], &[2.0], 1.5).is_err());
}

#[test]
fn pauroc_examples() {
    assert_eq!(pauroc(&[0.1, 0.2, 0.3], &[0.5, 0.6], 0.1).unwrap(), 1.0);
    assert_eq!(pauroc(&[0.5, 0.6], &[0.1, 0.2, 0.3], 0.1).unwrap(), 0.0);
    let normal: Vec<f64> = (1..=10).map(f64::from).collect();
    let got = pauroc(&normal, &[5.5], 0.1).unwrap();
    assert_eq!(got, step_curve_oracle(&normal, &[5.5], 0.1));
    assert_eq!(got, 0.0);
    // The anomaly outranks all but one normal: TPR jumps to 1 at FPR 0.1.
    let got = pauroc(&normal, &[9.5], 0.2).unwrap();
    assert!((got - step_curve_oracle(&normal, &[9.5], 0.2)).abs() < 1e-15);
    assert!((got - 0.5).abs() < 1e-15);
}

#[test]
fn pauroc_interpolates_at_the_boundary() {
    // One tie between the top normal and an anomaly: the ROC goes
    // diagonally from (0, 0) to (0.5, 1), so at FPR 0.25 TPR is 0.5.
    let got = pauroc(&[1.0, 0.0], &[1.0], 0.25).unwrap();
    assert!((got - 0.25).abs() < 1e-15, "{got}");
    assert_eq!(roc_curve(&[1.0, 0.0], &[1.0]).unwrap(), vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]);
}

#[test]
fn harmonic_examples() {
    assert!((harmonic_aggregate(&[0.5, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!((harmonic_aggregate(&[0.37; 5]).unwrap() - 0.37).abs() < 1e-15);
    let direct = 3.0 / (1.0 / 0.6 + 1.0 / 0.7 + 1.0 / 0.8);
    assert!((harmonic_aggregate(&[0.6, 0.7, 0.8]).unwrap() - direct).abs() < 1e-15);
    assert!((direct - 0.690_411).abs() < 1e-6);
    assert!(harmonic_aggregate(&[0.5, 0.0]).is_err());
    assert!(harmonic_aggregate(&[0.5, -1.0]).is_err());
    assert!(harmonic_aggregate(&[]).is_err());
}

fn score_sets() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    // Small integer grid so ties are common.
    let grid = (0u8..12).prop_map(f64::from);
    (
        proptest::collection::vec(grid.clone(), 1..26),
        proptest::collection::vec(grid, 1..26),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auroc_matches_pair_counting((n, a) in score_sets()) {
        prop_assert_eq!(auroc(&n, &a).unwrap(), pair_count_oracle(&n, &a));
    }

    #[test]
    fn pauroc_matches_step_curve((n, a) in score_sets(), max_fpr in 0.01f64..=1.0) {
        let got = pauroc(&n, &a, max_fpr).unwrap();
        prop_assert!((got - step_curve_oracle(&n, &a, max_fpr)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn full_pauroc_is_auroc((n, a) in score_sets()) {
        prop_assert!((pauroc(&n, &a, 1.0).unwrap() - auroc(&n, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn invariant_under_increasing_transforms((n, a) in score_sets(), max_fpr in 0.05f64..=1.0) {
        let f = |v: &Vec<f64>| v.iter().map(|x| x.powi(3) * 0.5 + 2f64.powf(*x)).collect::<Vec<_>>();
        prop_assert_eq!(auroc(&f(&n), &f(&a)).unwrap(), auroc(&n, &a).unwrap());
        prop_assert!((pauroc(&f(&n), &f(&a), max_fpr).unwrap() - pauroc(&n, &a, max_fpr).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn negation_complements_without_ties(mut all in proptest::collection::btree_set(-1000i32..1000, 2..40), split in 1usize..39) {
        let all: Vec<f64> = std::mem::take(&mut all).into_iter().map(f64::from).collect();
        let k = split.min(all.len() - 1);
        let (n, a) = all.split_at(k);
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        prop_assert!((auroc(n, a).unwrap() + auroc(&neg(n), &neg(a)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn harmonic_at_most_arithmetic(v in proptest::collection::vec(0.01f64..1.0, 1..20)) {
        let h = harmonic_aggregate(&v).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!(h <= mean + 1e-12);
        prop_assert!(h >= v.iter().copied().fold(f64::INFINITY, f64::min) - 1e-12);
    }
}

fn clip(machine: &str, section: &str, domain: Domain, truth: Condition, score: f64) -> ScoredClip {
    ScoredClip {
        clip_id: format!("{machine}_{section}_{domain}_{truth}_{score}"),
        machine: machine.into(),
        section: section.into(),
        domain,
        truth,
        score,
    }
}

fn separated() -> Vec<ScoredClip> {
    let mut v = Vec::new();
    for m in ["fan", "pump"] {
        for s in ["00", "01"] {
            for d in [Domain::Source, Domain::Target] {
                for i in 0..5 {
                    v.push(clip(m, s, d, Condition::Normal, i as f64));
                    v.push(clip(m, s, d, Condition::Anomalous, 10.0 + i as f64));
                }
            }
        }
    }
    v
}

#[test]
fn report_of_perfect_separation() {
    let r = EvalReport::from_scores(&separated(), DEFAULT_MAX_FPR).unwrap();
    assert_eq!(r.rows.len(), 8);
    assert!(r.rows.iter().all(|row| row.auroc == 1.0 && row.pauroc == 1.0));
    assert!(r.rows.iter().any(|row| row.domain == Domain::Source));
    assert!(r.rows.iter().any(|row| row.domain == Domain::Target));
    assert_eq!(r.target_score(), Some(1.0));
    assert_eq!(r.machine_aggregate("pump", Domain::Source).unwrap().auroc, 1.0);
    assert_eq!(r.machines(), vec!["fan", "pump"]);

    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with(&REPORT_CSV_HEADER.join(",")));
    assert_eq!(text.lines().count(), 1 + 8 + 2 * 3);
    assert!(text.contains("overall,,,target,,,1,1,1"));
    let table = r.with_metadata(Some(7), Some("abc".into())).to_table();
    assert!(table.contains("seed: 7") && table.contains("config: abc"));
    assert!(table.contains("target") && table.contains("source"));
}

#[test]
fn report_treats_zero_metric_as_zero_aggregate() {
    let mut scores = separated();
    for s in scores.iter_mut().filter(|s| s.machine == "fan" && s.section == "00") {
        s.score = -s.score;
    }
    let r = EvalReport::from_scores(&scores, DEFAULT_MAX_FPR).unwrap();
    assert_eq!(r.domain_aggregate(Domain::Target).unwrap().score, 0.0);
    assert_eq!(r.machine_aggregate("pump", Domain::Target).unwrap().score, 1.0);
}

#[test]
fn report_errors() {
    assert!(EvalReport::from_scores(&[], 0.1).is_err());
    let one_class = vec![clip("fan", "00", Domain::Source, Condition::Normal, 1.0)];
    let err = EvalReport::from_scores(&one_class, 0.1).unwrap_err();
    assert!(err.to_string().contains("fan/00/source"), "{err}");
    let unknown = vec![
        clip("fan", "00", Domain::Source, Condition::Unknown, 1.0),
        clip("fan", "00", Domain::Source, Condition::Anomalous, 1.0),
    ];
    assert!(split_by_truth(&unknown).is_err());
    assert!(auroc_clips(&unknown).is_err());
}

#[test]
fn clip_level_helpers_match() {
    let scores = separated();
    assert_eq!(auroc_clips(&scores).unwrap(), 1.0);
    assert_eq!(pauroc_clips(&scores, 0.1).unwrap(), 1.0);
}
