use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use faithnli::manifest::RunManifest;

fn faithnli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faithnli"))
        .current_dir(dir)
        .args(["--backend", "mock", "--seed", "7"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = faithnli(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_true_corpus(dir: &Path, name: &str, n: usize) -> PathBuf {
    let mut text = String::from("grounding,generated_text,label\n");
    for i in 0..n {
        let faithful = i % 2;
        let reply = if faithful == 1 {
            format!("the shop {i} opens at nine.")
        } else {
            format!("i think shop {i} never opens.")
        };
        text.push_str(&format!("Shop {i} opens at nine every day.,{reply},{faithful}\n"));
    }
    let path = dir.join(format!("{name}.csv"));
    fs::write(&path, text).unwrap();
    path
}

fn write_anli(dir: &Path, n: usize) -> PathBuf {
    let labels = ["e", "n", "c"];
    let text: String = (0..n)
        .map(|i| {
            format!(
                "{{\"uid\": \"r1-{i}\", \"context\": \"Premise {i}.\", \"hypothesis\": \"Hypothesis {i}.\", \"label\": \"{}\"}}\n",
                labels[i % 3]
            )
        })
        .collect();
    let path = dir.join("anli_r1.jsonl");
    fs::write(&path, text).unwrap();
    path
}

/// Reads and checks a manifest written by a run started in `dir`.
fn verify(dir: &Path, path: &str) -> RunManifest {
    let m = RunManifest::read(&dir.join(path)).unwrap();
    m.verify_from(dir).unwrap();
    m
}

#[test]
fn score_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_true_corpus(d, "q2", 40);
    write_true_corpus(d, "dialfact", 30);

    ok(
        d,
        &[
            "score",
            "--corpus",
            "q2.csv",
            "--corpus",
            "dialfact.csv",
            "--output",
            "all.csv",
        ],
    );
    let m = verify(d, "all.csv.manifest.json");
    assert_eq!(m.counters["backend_calls"], 70 * 15);
    assert_eq!(m.counters["instances_scored"], 70);
    let scores = fs::read_to_string(d.join("all.csv")).unwrap();
    assert_eq!(scores.lines().next(), Some("uid,corpus,metric,score"));
    assert_eq!(scores.lines().count(), 71);
    assert!(scores.contains(",e-c+mc15,"));

    ok(
        d,
        &[
            "score",
            "--corpus",
            "q2.csv",
            "--corpus",
            "dialfact.csv",
            "--output",
            "base.csv",
            "--mode",
            "e",
            "--no-mc",
        ],
    );
    assert_eq!(verify(d, "base.csv.manifest.json").counters["backend_calls"], 70);

    let stdout = ok(
        d,
        &[
            "evaluate",
            "--scores",
            "all.csv",
            "--scores",
            "base.csv",
            "--gold",
            "q2.csv",
            "--gold",
            "dialfact.csv",
            "--baseline",
            "e",
            "--bootstrap",
            "100",
            "--permutations",
            "200",
            "--output-dir",
            "ev",
        ],
    );
    assert!(!stdout.is_empty());
    for f in ["report.csv", "report.json", "significance.csv", "grid.txt"] {
        assert!(d.join("ev").join(f).exists(), "missing {f}");
    }
    verify(d, "ev/manifest.json");
    let report = fs::read_to_string(d.join("ev/report.csv")).unwrap();
    assert!(report.contains("q2") && report.contains("dialfact"));
}

#[test]
fn cached_rescoring_makes_no_calls_and_matches() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_true_corpus(d, "q2", 20);
    ok(
        d,
        &["--cache", "cache", "score", "--corpus", "q2.csv", "--output", "a.csv"],
    );
    ok(
        d,
        &["--cache", "cache", "score", "--corpus", "q2.csv", "--output", "b.csv"],
    );
    assert_eq!(verify(d, "a.csv.manifest.json").counters["backend_calls"], 300);
    assert_eq!(verify(d, "b.csv.manifest.json").counters["backend_calls"], 0);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
}

#[test]
fn identical_metrics_give_p_of_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_true_corpus(d, "q2", 30);
    ok(d, &["score", "--corpus", "q2.csv", "--output", "a.csv"]);
    ok(
        d,
        &[
            "score",
            "--corpus",
            "q2.csv",
            "--output",
            "b.csv",
            "--metric-name",
            "copy",
        ],
    );
    ok(
        d,
        &[
            "evaluate",
            "--scores",
            "a.csv",
            "--scores",
            "b.csv",
            "--gold",
            "q2.csv",
            "--baseline",
            "copy",
            "--bootstrap",
            "50",
            "--permutations",
            "100",
            "--output-dir",
            "ev",
        ],
    );
    let sig = fs::read_to_string(d.join("ev/significance.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(sig.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let p = headers.iter().position(|h| h == "p_value").expect("p_value column");
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert!(!records.is_empty());
    for r in records {
        assert_eq!(r[p].parse::<f64>().unwrap(), 1.0, "{sig}");
    }
}

#[test]
fn ablate_self_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_true_corpus(d, "q2", 30);
    ok(d, &["score", "--corpus", "q2.csv", "--output", "a.csv"]);
    ok(
        d,
        &[
            "ablate",
            "--variant",
            "a.csv",
            "--base",
            "a.csv",
            "--gold",
            "q2.csv",
            "--bootstrap",
            "50",
            "--output",
            "abl.csv",
        ],
    );
    let text = fs::read_to_string(d.join("abl.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    let fields: Vec<f64> = row.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    assert!(fields.iter().all(|v| *v == 0.0), "{text}");
}

#[test]
fn augment_doubles_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_anli(d, 30);
    ok(d, &["augment", "--anli", "1=anli_r1.jsonl", "--output", "aug.jsonl"]);
    let lines: Vec<serde_json::Value> = fs::read_to_string(d.join("aug.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 60);
    assert_eq!(lines.iter().filter(|v| v["augmented"] == true).count(), 30);
    for (orig, aug) in lines[..30].iter().zip(&lines[30..]) {
        assert_eq!(orig["label"], aug["label"]);
    }
    verify(d, "aug.jsonl.manifest.json");

    ok(d, &["augment", "--anli", "1=anli_r1.jsonl", "--output", "again.jsonl"]);
    assert_eq!(
        fs::read(d.join("aug.jsonl")).unwrap(),
        fs::read(d.join("again.jsonl")).unwrap()
    );
}

#[test]
fn robustness_builds_and_summarises() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_anli(d, 12);
    ok(
        d,
        &[
            "robustness",
            "--anli",
            "1=anli_r1.jsonl",
            "--repeats",
            "3",
            "--m",
            "5",
            "--out-dir",
            "rob",
        ],
    );
    for r in 0..3 {
        assert!(d.join(format!("rob/repeat_{r:02}/train.jsonl")).exists());
    }
    assert!(d.join("rob/robustness_manifest.json").exists());

    write_true_corpus(d, "q2", 20);
    let mut reports = Vec::new();
    for r in 0..3 {
        let k = (r + 3).to_string();
        ok(
            d,
            &[
                "score",
                "--corpus",
                "q2.csv",
                "--k",
                &k,
                "--metric-name",
                "ours",
                "--output",
                &format!("s{r}.csv"),
            ],
        );
        ok(
            d,
            &[
                "evaluate",
                "--scores",
                &format!("s{r}.csv"),
                "--gold",
                "q2.csv",
                "--bootstrap",
                "20",
                "--output-dir",
                &format!("ev{r}"),
            ],
        );
        reports.push(format!("ev{r}/report.csv"));
    }
    let mut args = vec!["robustness", "--out-dir", "sum"];
    for r in &reports {
        args.extend(["--reports", r.as_str()]);
    }
    ok(d, &args);
    let md = fs::read_to_string(d.join("sum/robustness_summary.md")).unwrap();
    assert!(md.contains("q2"));
    assert!(d.join("sum/robustness_summary.csv").exists());
}

#[test]
fn analyses_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_true_corpus(d, "q2", 40);
    ok(d, &["score", "--corpus", "q2.csv", "--output", "a.csv"]);

    let table = ok(
        d,
        &[
            "analyze",
            "pronoun-corr",
            "--gold",
            "q2.csv",
            "--scores",
            "a.csv",
            "--output",
            "pc.csv",
        ],
    );
    assert!(table.contains("Gold Label"));
    let pc = fs::read_to_string(d.join("pc.csv")).unwrap();
    // Every unfaithful reply starts with "i think", so the gold tau is -1.
    assert!(pc.lines().any(|l| l.starts_with("Gold Label,-1.00")), "{pc}");

    ok(
        d,
        &[
            "analyze",
            "histogram",
            "--gold",
            "q2.csv",
            "--scores",
            "a.csv",
            "--output",
            "h.csv",
            "--svg",
            "h.svg",
        ],
    );
    let h = fs::read_to_string(d.join("h.csv")).unwrap();
    assert_eq!(h.lines().count(), 21);
    let total: u64 = h
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(2).map(|v| v.parse::<u64>().unwrap()).sum::<u64>())
        .sum();
    assert_eq!(total, 40);
    assert!(fs::read_to_string(d.join("h.svg")).unwrap().starts_with("<svg"));

    ok(
        d,
        &[
            "analyze",
            "cost",
            "--gold",
            "q2.csv",
            "--measure",
            "--output",
            "cost.csv",
            "--markdown",
            "cost.md",
        ],
    );
    let m = verify(d, "cost.csv.manifest.json");
    assert_eq!(m.counters["calls_all"], 600);
    assert_eq!(m.counters["calls_no_mc"], 40);
    assert!(d.join("cost.md").exists());
}

#[test]
fn begin_bias_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut tsv = String::from("knowledge\tresponse\tbegin_label\tmodel\n");
    for i in 0..24 {
        let (resp, label, model) = match i % 3 {
            0 => ("i love that band", "Generic", "gpt2"),
            1 => ("the band formed in 1990", "Fully attributable", "t5"),
            _ => ("the band split up", "Not fully attributable", "ctrl"),
        };
        tsv.push_str(&format!("knowledge {i}\t{resp} {i}\t{label}\t{model}\n"));
    }
    fs::write(d.join("begin.tsv"), tsv).unwrap();
    let out = ok(
        d,
        &["analyze", "begin-bias", "--corpus", "begin.tsv", "--output", "bias.csv"],
    );
    assert!(out.contains("gpt2_vs_t5"));
    let csv = fs::read_to_string(d.join("bias.csv")).unwrap();
    assert!(csv.starts_with("var_x,var_y,tau,n,p_value"));
    verify(d, "bias.csv.manifest.json");
}

#[test]
fn finetune_dry_run_selects_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_anli(d, 9);
    let out = ok(
        d,
        &[
            "finetune",
            "--train",
            "anli_r1.jsonl",
            "--val",
            "anli_r1.jsonl",
            "--run-dir",
            "ft",
            "--steps",
            "2000",
            "--interval",
            "500",
            "--dry-run",
        ],
    );
    assert!(out.contains("selected"), "{out}");
    assert!(d.join("ft/finetune_run.json").exists());
    verify(d, "ft/manifest.json");

    let out = ok(
        d,
        &[
            "finetune",
            "--train",
            "anli_r1.jsonl",
            "--val",
            "anli_r1.jsonl",
            "--run-dir",
            "sweep",
            "--sweep",
            "--dry-run",
        ],
    );
    assert_eq!(out.matches("lr ").count(), 4, "{out}");
}

#[test]
fn config_file_is_applied_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_true_corpus(d, "q2", 10);
    fs::write(d.join("run.toml"), "seed = 3\n[metric]\nk = 4\n").unwrap();
    ok(
        d,
        &[
            "--config", "run.toml", "score", "--corpus", "q2.csv", "--output", "a.csv",
        ],
    );
    assert_eq!(verify(d, "a.csv.manifest.json").counters["backend_calls"], 40);
    ok(
        d,
        &[
            "--config", "run.toml", "score", "--corpus", "q2.csv", "--output", "b.csv", "--k", "2",
        ],
    );
    assert_eq!(verify(d, "b.csv.manifest.json").counters["backend_calls"], 20);

    fs::write(d.join("bad.toml"), "sede = 3\n").unwrap();
    assert!(!faithnli(
        d,
        &["--config", "bad.toml", "score", "--corpus", "q2.csv", "--output", "c.csv"]
    )
    .status
    .success());
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_true_corpus(d, "fever", 10);
    write_true_corpus(d, "q2", 10);

    let out = faithnli(d, &["score", "--corpus", "fever.csv", "--output", "x.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(faithnli(
        d,
        &["score", "--corpus", "fever.csv", "--include-fever", "--output", "x.csv"]
    )
    .status
    .success());

    assert!(!faithnli(d, &["score", "--corpus", "missing.csv", "--output", "y.csv"])
        .status
        .success());
    assert!(
        !faithnli(d, &["score", "--corpus", "q2.csv", "--output", "y.csv", "--k", "0"])
            .status
            .success()
    );
    assert!(!faithnli(
        d,
        &[
            "evaluate",
            "--scores",
            "nope.csv",
            "--gold",
            "q2.csv",
            "--output-dir",
            "ev"
        ]
    )
    .status
    .success());

    ok(d, &["score", "--corpus", "q2.csv", "--output", "q.csv"]);
    fs::write(d.join("q2_short.csv"), "grounding,generated_text,label\nA,B,1\n").unwrap();
    let out = faithnli(
        d,
        &[
            "evaluate",
            "--scores",
            "q.csv",
            "--gold",
            "q2=q2_short.csv",
            "--output-dir",
            "ev",
        ],
    );
    assert!(!out.status.success());
}
