use groundcheck_core::evaluation::{
    evaluate, f1, precision, recall, report_from_records, sweep_thresholds, Counts, EvalError,
    PredictionRecord,
};
use groundcheck_core::pipeline::gather_evidence;
use groundcheck_core::provider::{EmbeddingTable, FixtureRecord, FixtureStore, MaskEntry, Subset};
use groundcheck_core::{
    run_pipeline, BitMask, Embedding, Grounding, GroundingInstance, Prediction, ReasoningConfig,
    RleMask,
};
use proptest::prelude::*;

fn grounding() -> impl Strategy<Value = Grounding> {
    prop_oneof![Just(Grounding::Single), Just(Grounding::Multiple)]
}

fn subset() -> impl Strategy<Value = Subset> {
    prop_oneof![
        Just(Subset::Vqav2),
        Just(Subset::Vizwiz),
        Just(Subset::Other)
    ]
}

/// Labeled-or-not instances paired with a verdict.
fn labeled_run() -> impl Strategy<Value = Vec<(Option<Grounding>, Grounding, Subset)>> {
    prop::collection::vec(
        (
            prop::option::weighted(0.85, grounding()),
            grounding(),
            subset(),
        ),
        0..40,
    )
}

fn build(
    run: &[(Option<Grounding>, Grounding, Subset)],
) -> (Vec<GroundingInstance>, Vec<Prediction>) {
    run.iter()
        .enumerate()
        .map(|(i, &(gold, s, subset))| {
            let id = format!("q{i}");
            (
                GroundingInstance {
                    instance_id: id.clone(),
                    image_id: format!("img{i}"),
                    question: "what is this?".into(),
                    image_height: 2,
                    image_width: 2,
                    gold_label: gold,
                    subset,
                },
                Prediction::new(id, s),
            )
        })
        .unzip()
}

proptest! {
    #[test]
    fn report_ignores_decision_order(run in labeled_run(), seed in any::<u64>()) {
        let (dataset, mut preds) = build(&run);
        let a = evaluate(&dataset, &preds).unwrap();
        let n = preds.len();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            preds.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(evaluate(&dataset, &preds).unwrap(), a);
    }

    #[test]
    fn f1_agrees_with_reported_precision_and_recall(run in labeled_run()) {
        let (dataset, preds) = build(&run);
        let report = evaluate(&dataset, &preds).unwrap();
        for r in std::iter::once(&report.overall).chain(report.subsets.values()) {
            let m = r.metrics;
            match (m.precision, m.recall) {
                (Some(p), Some(rc)) if p + rc > 0.0 => {
                    let f = m.f1.unwrap();
                    prop_assert!((f - 2.0 * p * rc / (p + rc)).abs() < 1e-9);
                    prop_assert!(f <= p.max(rc) + 1e-9 && f >= p.min(rc) - 1e-9);
                }
                _ => prop_assert!(m.f1.is_none()),
            }
        }
    }

    #[test]
    fn counts_partition_the_labeled_set(run in labeled_run()) {
        let (dataset, preds) = build(&run);
        let report = evaluate(&dataset, &preds).unwrap();
        let labeled = run.iter().filter(|(g, _, _)| g.is_some()).count();
        prop_assert_eq!(report.overall.counts.total, labeled);
        prop_assert_eq!(report.unlabeled, run.len() - labeled);
        prop_assert_eq!(report.missing, 0);
        let mut summed = Counts::default();
        for r in report.subsets.values() {
            prop_assert!(r.counts.total > 0);
            summed.total += r.counts.total;
            summed.predicted_single += r.counts.predicted_single;
            summed.actual_single += r.counts.actual_single;
            summed.correct_single += r.counts.correct_single;
        }
        prop_assert_eq!(summed, report.overall.counts);
    }

    #[test]
    fn always_single_has_full_recall(run in labeled_run()) {
        let forced: Vec<_> = run.iter().map(|&(g, _, sub)| (g, Grounding::Single, sub)).collect();
        let (dataset, preds) = build(&forced);
        let report = evaluate(&dataset, &preds).unwrap();
        if report.overall.counts.actual_single > 0 {
            prop_assert_eq!(report.overall.metrics.recall, Some(100.0));
        } else {
            prop_assert_eq!(report.overall.metrics.recall, None);
        }
    }
}

#[test]
fn zero_denominators_are_absent() {
    let recs = vec![PredictionRecord {
        instance_id: "a".into(),
        predicted: Grounding::Multiple,
        gold: Grounding::Multiple,
        subset: Subset::Vqav2,
    }];
    assert_eq!(precision(&recs), None);
    assert_eq!(recall(&recs), None);
    assert_eq!(f1(0.0, 0.0), None);
    let report = report_from_records(&recs, 0, 0);
    assert_eq!(report.overall.metrics.f1, None);
    assert!(!report.subsets.contains_key(&Subset::Vizwiz));
}

#[test]
fn unknown_and_duplicate_decisions_are_errors() {
    let (dataset, preds) = build(&[(Some(Grounding::Single), Grounding::Single, Subset::Vqav2)]);
    assert_eq!(
        evaluate(&dataset, &[Prediction::new("zz", Grounding::Single)]),
        Err(EvalError::UnknownInstance("zz".into()))
    );
    let twice = vec![preds[0].clone(), preds[0].clone()];
    assert!(matches!(
        evaluate(&dataset, &twice),
        Err(EvalError::DuplicateDecision(_))
    ));
    assert_eq!(evaluate(&dataset, &[]).unwrap().missing, 1);
}

fn rle(mask: &BitMask) -> MaskEntry {
    MaskEntry::Rle {
        rle: RleMask::encode(mask),
    }
}

#[test]
fn single_cell_sweep_matches_direct_run() {
    let left = BitMask::from_fn(4, 4, |_, c| c < 2).unwrap();
    let wide = BitMask::from_fn(4, 4, |_, c| c < 3).unwrap();
    let right = BitMask::from_fn(4, 4, |_, c| c >= 2).unwrap();
    let mut store = FixtureStore::new("fx");
    let mut table = EmbeddingTable::new("tbl");
    for (w, v) in [
        ("mug", [1.0, 0.0]),
        ("cup", [0.9, 0.1]),
        ("pen", [0.0, 1.0]),
    ] {
        table
            .insert(w, Embedding::new(v.to_vec()).unwrap())
            .unwrap();
    }
    let specs: [(&str, &[&str], &[&BitMask], Grounding); 3] = [
        ("a", &["mug", "cup"], &[&left, &wide], Grounding::Single),
        ("b", &["mug", "pen"], &[&left, &left], Grounding::Multiple),
        ("c", &["mug", "cup"], &[&left, &right], Grounding::Single),
    ];
    let mut dataset = Vec::new();
    for (id, cands, masks, gold) in specs {
        store.insert(FixtureRecord {
            instance_id: id.into(),
            candidates: cands.iter().map(|s| s.to_string()).collect(),
            masks: masks.iter().map(|m| rle(m)).collect(),
        });
        dataset.push(GroundingInstance {
            instance_id: id.into(),
            image_id: id.into(),
            question: "what is on the table?".into(),
            image_height: 4,
            image_width: 4,
            gold_label: Some(gold),
            subset: Subset::Vizwiz,
        });
    }
    let config = ReasoningConfig::default();
    let preds: Vec<Prediction> = dataset
        .iter()
        .map(|i| {
            let d = run_pipeline(i, &store, &store, &table, &config).unwrap();
            Prediction::new(d.instance_id, d.decision.s)
        })
        .collect();
    let verdicts: Vec<_> = preds.iter().map(|p| p.s).collect();
    assert_eq!(
        verdicts,
        [Grounding::Single, Grounding::Multiple, Grounding::Multiple]
    );
    let direct = evaluate(&dataset, &preds).unwrap();

    let evidence: Vec<_> = dataset
        .iter()
        .map(|i| gather_evidence(i, &store, &store, &table, &config).unwrap())
        .collect();
    let sweep = sweep_thresholds(&dataset, &evidence, &[0.5], &[0.7], &config).unwrap();
    assert_eq!(sweep.rows.len(), 1);
    assert_eq!(sweep.rows[0].report, direct);

    let grid =
        sweep_thresholds(&dataset, &evidence, &[0.0, 0.5, 1.0], &[0.5, 0.95], &config).unwrap();
    let cells: Vec<_> = grid.rows.iter().map(|r| (r.tau_iou, r.tau_sem)).collect();
    assert_eq!(
        cells,
        [
            (0.0, 0.5),
            (0.0, 0.95),
            (0.5, 0.5),
            (0.5, 0.95),
            (1.0, 0.5),
            (1.0, 0.95)
        ]
    );
    assert!(sweep_thresholds(&dataset, &evidence, &[], &[0.7], &config).is_err());
}
