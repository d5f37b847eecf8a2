mod common;

use std::collections::BTreeSet;

use vsr_harness::datasets::{
    load, perturb_batch, to_annotations, DatasetError, DatasetKind, DatasetStats, LoadOptions, PerturbationMode, Split,
};

fn fixture(kind: DatasetKind) -> (DatasetKind, &'static str, DatasetStats) {
    match kind {
        DatasetKind::VsrRandom => (kind, "vsr_random", DatasetStats::new(4, 1, 1)),
        DatasetKind::VsrZeroShot => (kind, "vsr_zeroshot", DatasetStats::new(3, 2, 2)),
        DatasetKind::WhatsUpA => (kind, "whatsup_a", DatasetStats::new(2, 2, 2)),
        DatasetKind::WhatsUpB => (kind, "whatsup_b", DatasetStats::new(3, 1, 4)),
    }
}

#[test]
fn every_fixture_loads_with_exact_stats() {
    for kind in DatasetKind::ALL {
        let (kind, dir, expected) = fixture(kind);
        let ds = load(kind, &common::fixture_root(dir), &LoadOptions::default()).unwrap();
        assert_eq!(ds.stats, expected, "{kind}");
        assert!(ds.examples.len() >= 6);
        assert!(ds.examples.iter().all(|e| e.dataset == kind && e.image_ref.exists()));
    }
}

#[test]
fn vsr_random_six_records() {
    let ds = load(DatasetKind::VsrRandom, &common::fixture_root("vsr_random"), &LoadOptions::default()).unwrap();
    assert_eq!(ds.stats, DatasetStats { train: 4, development: 1, test: 1, total: 6 });
    let test: Vec<_> = ds.split(Split::Test).collect();
    assert_eq!(test[0].example_id, "vr-5");
}

#[test]
fn split_files_and_missing_ids() {
    let ds = load(DatasetKind::VsrZeroShot, &common::fixture_root("vsr_zeroshot"), &LoadOptions::default()).unwrap();
    let ids: BTreeSet<&str> = ds.examples.iter().map(|e| e.example_id.as_str()).collect();
    assert!(ids.contains("dev-2"), "{ids:?}");
}

#[test]
fn aliases_and_shared_images() {
    let ds = load(DatasetKind::WhatsUpA, &common::fixture_root("whatsup_a"), &LoadOptions::default()).unwrap();
    assert_eq!(ds.examples[0].subject, "mug");
    assert!(ds.examples[0].gold && !ds.examples[1].gold);
    assert_eq!(ds.present_objects().len(), 3);
}

#[test]
fn loader_round_trip() {
    let src = common::fixture_root("whatsup_b");
    let ds = load(DatasetKind::WhatsUpB, &src, &LoadOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("annotations.jsonl"), to_annotations(&ds.examples, &src.join("images"))).unwrap();
    std::fs::create_dir(dir.path().join("images")).unwrap();
    let again = load(DatasetKind::WhatsUpB, dir.path(), &LoadOptions::default()).unwrap();
    assert_eq!(again.stats, ds.stats);
    for (a, b) in ds.examples.iter().zip(&again.examples) {
        assert_eq!((&a.example_id, &a.question, a.gold, a.split), (&b.example_id, &b.question, b.gold, b.split));
        assert_eq!(a.image_ref.file_name(), b.image_ref.file_name());
    }
}

#[test]
fn every_bad_record_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        r#"{"id":"a","image":"1.png","caption":"c","relation":"r","subject":"s","object":"o","label":true,"split":"test"}"#,
        r#"{"id":"b","image":"1.png","caption":"c","relation":"r","subject":"s","label":true,"split":"test"}"#,
        r#"{"id":"c","image":"1.png","caption":"c","relation":"r","subject":"s","object":"o","label":"maybe","split":"test"}"#,
        "not json",
    ];
    std::fs::write(dir.path().join("annotations.jsonl"), lines.join("\n")).unwrap();
    match load(DatasetKind::VsrRandom, dir.path(), &LoadOptions::default()) {
        Err(DatasetError::Validation(errs)) => {
            assert_eq!(errs.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 3, 4]);
        }
        other => panic!("expected validation errors, got {other:?}"),
    }
    let lenient = load(DatasetKind::VsrRandom, dir.path(), &LoadOptions { strict: false, ..LoadOptions::default() }).unwrap();
    assert_eq!((lenient.examples.len(), lenient.rejected.len()), (1, 3));
}

#[test]
fn fixture_perturbations_flip_gold() {
    let ds = load(DatasetKind::VsrRandom, &common::fixture_root("vsr_random"), &LoadOptions::default()).unwrap();
    let batch = perturb_batch(&ds, &ds.examples, PerturbationMode::Both, 3);
    assert!(!batch.examples.is_empty());
    assert!(batch.examples.iter().all(|e| !e.gold));
    let again = perturb_batch(&ds, &ds.examples, PerturbationMode::Both, 3);
    assert_eq!(batch.examples, again.examples);
}
