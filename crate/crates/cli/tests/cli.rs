use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const USAGES: &str = "lemma\tpos\tgrouping\tidentifier\tcontext\ttarget_start\ttarget_end\tdate
plane\tnn\t1\tp1\tthe plane took off\t4\t9\t1850
plane\tnn\t1\tp2\ta flat plane surface\t7\t12\t
plane\tnn\t1\tp3\tthe plane was late\t4\t9\t
plane\tnn\t2\tp4\ther plane landed\t4\t9\t1990
plane\tnn\t2\tp5\tthe plane of the table\t4\t9\t1991
plane\tnn\t2\tp6\tboard the plane now\t10\t15\t
";

fn wugs(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wugs"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) -> Value {
    let o = wugs(out, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    manifest(out)
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Fills every open row of a batch file; pairs inside {p1,p2,p3} or
/// {p4,p5,p6} get 4, the rest 1.
fn fill(batch: &Path, filled: &Path) {
    let text = fs::read_to_string(batch).unwrap();
    let mut lines = text.lines();
    let mut out = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let mut f: Vec<&str> = line.split('\t').collect();
        let side = |id: &str| id[1..].parse::<u32>().unwrap() <= 3;
        f[3] = if side(f[0]) == side(f[1]) { "4" } else { "1" };
        out.push_str(&f.join("\t"));
        out.push('\n');
    }
    fs::write(filled, out).unwrap();
}

#[test]
fn annotation_session_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let usages = tmp.path().join("usages.tsv");
    fs::write(&usages, USAGES).unwrap();
    let project = tmp.path().join("proj");
    let out = tmp.path().join("out");

    let m = ok(
        &out,
        &[
            "ingest",
            "--project",
            arg(&project),
            "--usages",
            arg(&usages),
            "--annotators",
            "ann1,ann2",
        ],
    );
    assert_eq!(m["command"], "ingest");
    assert_eq!(m["results"]["lemmas"]["plane"]["usages"], 6);
    assert_eq!(m["config"]["auth.admin"], Value::Null);

    for round in 1..=4 {
        let m = ok(&out, &["--seed", "7", "sample", "--project", arg(&project)]);
        assert_eq!(m["results"]["round"], round);
        if m["results"]["complete"]
            .as_array()
            .unwrap()
            .iter()
            .any(|l| l == "plane")
        {
            break;
        }
        let batch = out.join("batches/plane.tsv");
        let filled = tmp.path().join("filled.tsv");
        fill(&batch, &filled);
        let m = ok(
            &out,
            &["ingest", "--project", arg(&project), "--judgments", arg(&filled)],
        );
        assert!(m["results"]["rejected"].as_array().unwrap().is_empty(), "{m}");
        // a second ingest of the same rows is rejected row by row
        let m = ok(
            &out,
            &["ingest", "--project", arg(&project), "--judgments", arg(&filled)],
        );
        assert_eq!(m["results"]["accepted"], 0);
    }

    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&a, &["--seed", "3", "cluster", "--project", arg(&project)]);
    ok(&b, &["--seed", "3", "cluster", "--project", arg(&project)]);
    for f in ["clusters/plane.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c: Value = serde_json::from_str(&fs::read_to_string(a.join("clusters/plane.json")).unwrap()).unwrap();
    let mut clusters: Vec<Vec<String>> = serde_json::from_value(c["clusters"].clone()).unwrap();
    clusters.sort();
    assert_eq!(clusters, [["p1", "p2", "p3"], ["p4", "p5", "p6"]]);

    let m = ok(&out, &["stats", "--project", arg(&project)]);
    assert_eq!(m["results"]["krippendorff_alpha"], 1.0);

    let m = ok(&out, &["change", "--project", arg(&project)]);
    assert_eq!(m["results"]["plane"], 1.0);
    assert!(fs::read_to_string(out.join("change.tsv"))
        .unwrap()
        .starts_with("lemma\tgraded"));

    let m = ok(&out, &["export", "--project", arg(&project)]);
    let outputs: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(outputs.contains(&"graphs/plane.json") && outputs.contains(&"tsv/judgments.tsv"));
}

#[test]
fn manifest_records_seed_and_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["simulate", "--usages", "20", "--rounds", "2"];
    let m1 = ok(tmp.path(), &[&["--seed", "5"], &args[..]].concat());
    let m2 = ok(
        tmp.path(),
        &[&["--seed", "5", "--set", "anneal.k_max=4"], &args[..]].concat(),
    );
    assert_eq!(m1["seed"], 5);
    assert_eq!(m1["config"]["anneal.k_max"], "10");
    assert_eq!(m2["config"]["anneal.k_max"], "4");
    assert_ne!(m1["config_hash"], m2["config_hash"]);
    assert_eq!(m1["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn noise_free_simulation_recovers_the_senses() {
    let tmp = tempfile::tempdir().unwrap();
    let m = ok(
        tmp.path(),
        &["--seed", "1", "simulate", "--senses", "2", "--noise", "0"],
    );
    assert_eq!(m["results"]["final_accuracy"], 1.0);
    assert!(m["results"]["edge_share"].as_f64().unwrap() < 0.2);
    assert!(
        fs::read_to_string(tmp.path().join("rounds.tsv"))
            .unwrap()
            .lines()
            .count()
            >= 2
    );
}

#[test]
fn planted_robustness_writes_a_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let m = ok(
        tmp.path(),
        &[
            "robustness",
            "--fractions",
            "0,0.25",
            "--trials",
            "4",
            "--graphs",
            "2",
            "--usages",
            "60",
        ],
    );
    let acc = m["results"]["mean_accuracy"].as_array().unwrap();
    assert_eq!(acc.len(), 2);
    assert!(acc[0].as_f64().unwrap() > 0.99);
    let tsv = fs::read_to_string(tmp.path().join("robustness.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(wugs(&out, &["--help"]).status.code(), Some(0));
    assert_eq!(wugs(&out, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        wugs(&out, &["--set", "nope=1", "simulate"]).status.code(),
        Some(1)
    );
    let missing = tmp.path().join("missing");
    assert_eq!(
        wugs(&out, &["cluster", "--project", arg(&missing)]).status.code(),
        Some(1)
    );

    let usages = tmp.path().join("usages.tsv");
    fs::write(&usages, USAGES.replace("\t4\t9\t1850", "\t4\t99\t1850")).unwrap();
    let project = tmp.path().join("proj");
    let o = wugs(
        &out,
        &["ingest", "--project", arg(&project), "--usages", arg(&usages)],
    );
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "data");
    assert!(
        err["message"].as_str().unwrap().contains("usages.tsv:2:6"),
        "{err}"
    );

    fs::write(&usages, USAGES).unwrap();
    wugs(
        &out,
        &["ingest", "--project", arg(&project), "--usages", arg(&usages)],
    );
    let o = wugs(&out, &["serve", "--project", arg(&project)]);
    assert_eq!(o.status.code(), Some(1));
}
