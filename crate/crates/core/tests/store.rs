use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use wugs::store::{ingest, IngestOptions, NewJudgment, ProjectDir};
use wugs::{Error, Judgment};

const USAGES: &str = "lemma\tpos\tgrouping\tidentifier\tcontext\ttarget_start\ttarget_end\tdate
plane\tnn\t1\tp1\tthe plane took off\t4\t9\t1850
plane\tnn\t1\tp2\ta flat plane surface\t7\t12\t
plane\tnn\t2\tp3\ther plane landed\t4\t9\t1990
plane\tnn\t2\tp4\tthe plane of the table\t4\t9\t1991
cell\tnn\t1\tc1\tthe prison cell\t11\t15\t
cell\tnn\t2\tc2\ta mobile cell rang\t9\t13\t
";

const SENSES: &str = "lemma\tsense_id\tdefinition
cell\tcell-room\ta small room
cell\tcell-phone\ta mobile phone
";

const JUDGMENTS: &str = "identifier1\tidentifier2\tannotator\tjudgment\tcomment\tround
p1\tp2\tann1\t1\t\t1
p1\tp3\tann1\t4\t\t1
p1\tp3\tann2\t3\tsame vehicle\t1
p2\tp4\tann2\t4\t\t1
c1\tsense:cell-room\tann1\t4\t\t1
c2\tsense:cell-phone\tann2\t4\t\t1
";

fn write_set(dir: &Path, usages: &str, senses: &str, judgments: &str) {
    fs::write(dir.join("usages.tsv"), usages).unwrap();
    fs::write(dir.join("senses.tsv"), senses).unwrap();
    fs::write(dir.join("judgments.tsv"), judgments).unwrap();
}

fn load_set(dir: &Path) -> wugs::Result<wugs::Project> {
    ingest(
        &dir.join("usages.tsv"),
        Some(&dir.join("senses.tsv")),
        Some(&dir.join("judgments.tsv")),
        IngestOptions {
            project_id: "demo".into(),
            ..Default::default()
        },
    )
}

#[test]
fn minimal_file_set_gives_one_edge() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("usages.tsv"),
        "lemma\tpos\tgrouping\tidentifier\tcontext\ttarget_start\ttarget_end\tdate\n\
         w\tnn\t1\ta\tone w here\t4\t5\t\n\
         w\tnn\t1\tb\tanother w\t8\t9\t\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("judgments.tsv"),
        "identifier1\tidentifier2\tannotator\tjudgment\tcomment\tround\na\tb\tx\t3\t\t1\n",
    )
    .unwrap();
    let p = ingest(
        &dir.path().join("usages.tsv"),
        None,
        Some(&dir.path().join("judgments.tsv")),
        IngestOptions::default(),
    )
    .unwrap();
    let g = p.graph("w").unwrap();
    assert_eq!(g.edge_count(), 1);
    assert_eq!(g.weight("a", "b"), Some(3.0));
}

#[test]
fn export_then_ingest_is_identity() {
    let src = tempfile::tempdir().unwrap();
    write_set(src.path(), USAGES, SENSES, JUDGMENTS);
    let p = load_set(src.path()).unwrap();
    assert_eq!(p.judgments().len(), 6);
    assert!(p.graph("cell").unwrap().is_usg());

    let out = tempfile::tempdir().unwrap();
    p.export_tsv(out.path()).unwrap();
    let q = load_set(out.path()).unwrap();
    for lemma in ["plane", "cell"] {
        assert_eq!(p.graph(lemma).unwrap(), q.graph(lemma).unwrap());
        assert_eq!(
            p.export_graph_json(lemma).unwrap(),
            q.export_graph_json(lemma).unwrap()
        );
    }
    assert_eq!(p.judgments(), q.judgments());
    for file in ["usages.tsv", "senses.tsv", "judgments.tsv"] {
        assert_eq!(
            fs::read(src.path().join(file)).unwrap(),
            fs::read(out.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn graph_export_is_byte_stable_and_clustered() {
    let src = tempfile::tempdir().unwrap();
    write_set(src.path(), USAGES, SENSES, JUDGMENTS);
    let p = load_set(src.path()).unwrap();
    let before = p.export_graph_json("plane").unwrap();
    assert_eq!(before, p.export_graph_json("plane").unwrap());
    let doc: serde_json::Value = serde_json::from_str(&before).unwrap();
    assert_eq!(doc["nodes"].as_array().unwrap().len(), 4);
    assert_eq!(doc["edges"].as_array().unwrap().len(), 3);
    assert!(doc["loss"].is_null());

    // close round 0 and 1 so a clustering exists
    let (mut p, _) = p.advance_round().unwrap();
    p.expire_open_tasks();
    let (p, _) = p.advance_round().unwrap();
    let doc: serde_json::Value = serde_json::from_str(&p.export_graph_json("plane").unwrap()).unwrap();
    assert!(doc["normalized_loss"].is_number(), "{doc}");
    for node in doc["nodes"].as_array().unwrap() {
        if !node["isolate"].as_bool().unwrap() {
            assert!(node["cluster"].is_u64(), "{node}");
        }
    }
}

#[test]
fn parse_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bad_span = USAGES.replace(
        "p2\ta flat plane surface\t7\t12",
        "p2\ta flat plane surface\t7\t99",
    );
    write_set(dir.path(), &bad_span, SENSES, JUDGMENTS);
    match load_set(dir.path()) {
        Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 6)),
        other => panic!("{other:?}"),
    }

    let dup = USAGES.replace("\tp2\t", "\tp1\t");
    write_set(dir.path(), &dup, SENSES, JUDGMENTS);
    match load_set(dir.path()) {
        Err(e @ Error::Parse { line: 3, .. }) => assert!(e.to_string().contains("`p1`")),
        other => panic!("{other:?}"),
    }

    let not_a_number = USAGES.replace("\t1\tp1\t", "\tx\tp1\t");
    write_set(dir.path(), &not_a_number, SENSES, JUDGMENTS);
    match load_set(dir.path()) {
        Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
        other => panic!("{other:?}"),
    }

    let unknown = JUDGMENTS.replace("p2\tp4", "p2\tp9");
    write_set(dir.path(), USAGES, SENSES, &unknown);
    match load_set(dir.path()) {
        Err(e @ Error::Parse { line: 5, .. }) => assert!(e.to_string().contains("p9")),
        other => panic!("{other:?}"),
    }

    let bad_header = USAGES.replace("target_start", "start");
    write_set(dir.path(), &bad_header, SENSES, JUDGMENTS);
    assert!(matches!(
        load_set(dir.path()),
        Err(Error::Parse {
            line: 1,
            column: 6,
            ..
        })
    ));
}

#[test]
fn unknown_period_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_set(dir.path(), USAGES, SENSES, JUDGMENTS);
    let err = ingest(
        &dir.path().join("usages.tsv"),
        None,
        None,
        IngestOptions {
            periods: Some(vec![1]),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Parse {
                line: 4,
                column: 3,
                ..
            }
        ),
        "{err:?}"
    );
}

#[test]
fn saved_project_loads_back() {
    let src = tempfile::tempdir().unwrap();
    write_set(src.path(), USAGES, SENSES, JUDGMENTS);
    let p = load_set(src.path()).unwrap();
    let (p, _) = p.advance_round().unwrap();

    let root = tempfile::tempdir().unwrap();
    let dir = ProjectDir::new(root.path());
    dir.save(&p).unwrap();
    let q = dir.load().unwrap();
    assert_eq!(p, q);
}

#[test]
fn concurrent_appends_keep_every_row() {
    let src = tempfile::tempdir().unwrap();
    write_set(src.path(), USAGES, SENSES, JUDGMENTS);
    let p = load_set(src.path()).unwrap();
    let root = tempfile::tempdir().unwrap();
    let dir = Arc::new(ProjectDir::new(root.path()));
    dir.save(&p).unwrap();

    let rows = |annotator: &'static str| -> Vec<Judgment> {
        (0..50)
            .map(|i| Judgment::new("p3", "p4", annotator, 1 + i % 4, 2 + i as u32).unwrap())
            .collect()
    };
    let writers: Vec<_> = ["ann1", "ann2"]
        .into_iter()
        .map(|a| {
            let dir = Arc::clone(&dir);
            let rows = rows(a);
            thread::spawn(move || {
                for j in rows {
                    dir.append_judgments(std::slice::from_ref(&j)).unwrap();
                }
            })
        })
        .collect();
    for w in writers {
        w.join().unwrap();
    }
    let q = dir.load().unwrap();
    assert_eq!(q.judgments().len(), 6 + 100);
    assert_eq!(&q.judgments()[..6], p.judgments());
    for a in ["ann1", "ann2"] {
        let mine: Vec<&Judgment> = q
            .judgments()
            .iter()
            .filter(|j| j.annotator == a && j.round > 1)
            .collect();
        assert_eq!(mine.len(), 50);
        // each writer's rows keep their arrival order
        assert!(mine.windows(2).all(|w| w[0].round < w[1].round));
    }
}

#[test]
fn append_grows_the_log_by_accepted_rows() {
    let src = tempfile::tempdir().unwrap();
    write_set(src.path(), USAGES, SENSES, JUDGMENTS);
    let mut p = load_set(src.path()).unwrap();
    let before = p.judgments().to_vec();
    let report = p.append_judgments(&[
        NewJudgment::new("p3", "p4", "ann1", 2),
        NewJudgment::new("p1", "p2", "ann1", 2),
        NewJudgment::new("c1", "c2", "ann1", 2),
        NewJudgment::new("p1", "c1", "ann1", 2),
    ]);
    assert_eq!(report.accepted.len(), 1);
    assert_eq!(report.rejected.len(), 3);
    assert_eq!(p.judgments().len(), before.len() + 1);
    assert_eq!(&p.judgments()[..before.len()], &before[..]);
}
