use std::io::Write;

use proptest::prelude::*;

use memorability::corpus::*;

fn video_id() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,7}"
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(-0.0), Just(1e-300), Just(f64::MAX)]
}

proptest! {
    #[test]
    fn feature_csv_round_trips(
        rows in prop::collection::vec((video_id(), prop::collection::vec(finite(), 3)), 1..30)
    ) {
        let mut set = FeatureSet::new(Modality::Audio, "VGGish", 3).unwrap();
        for (v, row) in &rows {
            set.push_row(VideoId::new(v.as_str()).unwrap(), row.clone()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_feature_csv(&set, &path).unwrap();
        let back = load_feature_csv(&path, Modality::Audio, "VGGish").unwrap();
        prop_assert_eq!(back.rows(), set.rows());
        for (a, b) in back.rows().values().flatten().flatten().zip(set.rows().values().flatten().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn labels_round_trip(scores in prop::collection::btree_map(video_id(), 0.0..=1.0f64, 1..40)) {
        let mut table = LabelTable::new(Term::Long);
        for (v, s) in &scores {
            table.insert(VideoId::new(v.as_str()).unwrap(), *s).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        write_labels_csv(&table, &path).unwrap();
        let back = load_labels_csv(&path, Term::Long).unwrap();
        prop_assert_eq!(back.scores(), table.scores());
    }

    #[test]
    fn captions_with_separators_round_trip(
        caps in prop::collection::btree_map(video_id(), prop::collection::vec("[a-z ,\"']{0,12}[a-z]", 1..=5), 1..20)
    ) {
        let mut set = CaptionSet::new();
        for (v, list) in &caps {
            for c in list {
                set.push(VideoId::new(v.as_str()).unwrap(), c.as_str()).unwrap();
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_captions_csv(&set, &path).unwrap();
        let back = load_captions_csv(&path).unwrap();
        prop_assert_eq!(back.captions(), set.captions());
    }

    #[test]
    fn annotations_round_trip(obs in prop::collection::vec((video_id(), any::<bool>(), 0.5..500.0f64), 1..60)) {
        let mut log = AnnotationLog::new();
        for (v, hit, t) in &obs {
            log.push(VideoId::new(v.as_str()).unwrap(), Observation::new(*hit, *t).unwrap());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_annotations_csv(&log, &path).unwrap();
        let back = load_annotations_csv(&path).unwrap();
        prop_assert_eq!(back.entries(), log.entries());
    }
}

fn write(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.csv");
    std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
    (dir, path)
}

fn line_of(e: CorpusError) -> u64 {
    match e {
        CorpusError::Line { line, .. } => line,
        other => panic!("expected a line diagnostic, got {other}"),
    }
}

#[test]
fn malformed_lines_name_their_line() {
    let (_d, p) = write("a,1,2\nb,1\n");
    assert_eq!(line_of(load_feature_csv(&p, Modality::Video, "C3D").unwrap_err()), 2);
    let (_d, p) = write("a,1,nan\n");
    assert_eq!(line_of(load_feature_csv(&p, Modality::Video, "C3D").unwrap_err()), 1);
    let (_d, p) = write("a,0.5\nb,1.5\n");
    assert_eq!(line_of(load_labels_csv(&p, Term::Short).unwrap_err()), 2);
    let (_d, p) = write("a,30,1\na,0,1\n");
    assert_eq!(line_of(load_annotations_csv(&p).unwrap_err()), 2);
    let (_d, p) = write("a,30,1\na,40,yes\n");
    assert_eq!(line_of(load_annotations_csv(&p).unwrap_err()), 2);
    let (_d, p) = write("a,one\na,two\na,three\na,four\na,five\na,six\n");
    assert_eq!(line_of(load_captions_csv(&p).unwrap_err()), 6);
    let (_d, p) = write("a b,0.5\n");
    assert_eq!(line_of(load_labels_csv(&p, Term::Short).unwrap_err()), 1);
}

#[test]
fn empty_files_are_rejected() {
    let (_d, p) = write("");
    assert!(matches!(load_labels_csv(&p, Term::Short), Err(CorpusError::Empty { .. })));
}

#[test]
fn a_video_may_have_no_rows() {
    let mut set = FeatureSet::new(Modality::Audio, "VGGish", 2).unwrap();
    set.push_row(VideoId::new("a").unwrap(), vec![1.0, 2.0]).unwrap();
    assert!(set.rows_for(&VideoId::new("silent").unwrap()).is_empty());
    assert!(set.push_row(VideoId::new("a").unwrap(), vec![1.0]).is_err());
}
