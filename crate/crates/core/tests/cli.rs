use std::path::Path;
use std::process::{Command, Output};

use paxnet::geom::write_xyz;
use paxnet::graph::read_graph;
use paxnet::train::folded_chain;

fn paxnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paxnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = paxnet(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_native(dir: &Path, name: &str, atoms: usize, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("{name}.xyz"));
    std::fs::write(&path, write_xyz(&folded_chain(atoms, seed).unwrap())).unwrap();
    path
}

#[test]
fn synth_train_score_rank_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut manifest_text = String::new();
    for (name, seed) in [("alpha", 1), ("beta", 2)] {
        let native = write_native(d, name, 24, seed);
        let manifest = d.join(format!("{name}.tsv"));
        ok(&[
            "synth",
            "--native",
            s(&native),
            "--sigmas",
            "0.3,1.0,3.0,6.0",
            "--count",
            "3",
            "--seed",
            "5",
            "--out-dir",
            s(&d.join("decoys")),
            "--manifest",
            s(&manifest),
        ]);
        manifest_text += &std::fs::read_to_string(&manifest).unwrap();
    }
    assert!(manifest_text.starts_with("decoys/alpha_00000.xyz\t"));
    let all = d.join("all.tsv");
    std::fs::write(&all, &manifest_text).unwrap();

    let train_args = |ckpt: &Path| {
        vec![
            "train".to_string(),
            "--train-manifest".into(),
            s(&all).into(),
            "--val-manifest".into(),
            s(&d.join("beta.tsv")).into(),
            "--epochs".into(),
            "2".into(),
            "--hidden-dim".into(),
            "4".into(),
            "--lr".into(),
            "1e-3".into(),
            "--seed".into(),
            "3".into(),
            "--checkpoint".into(),
            s(ckpt).into(),
        ]
    };
    let c1 = d.join("c1.bin");
    let c2 = d.join("c2.bin");
    let log1 = ok(&train_args(&c1).iter().map(String::as_str).collect::<Vec<_>>());
    let lines: Vec<&str> = log1.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("1\t") && lines[0].split('\t').count() == 3);
    let mut threaded = train_args(&c2);
    threaded.extend(["--threads".into(), "2".into()]);
    let log2 = ok(&threaded.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(log1, log2);
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());

    let decoy = d.join("decoys/alpha_00000.xyz");
    let scored = ok(&["score", "--checkpoint", s(&c1), "--input", s(&decoy)]);
    let (path, value) = scored.trim_end().split_once('\t').unwrap();
    assert_eq!(path, s(&decoy));
    assert!(value.parse::<f64>().unwrap().is_finite());
    assert_eq!(scored, ok(&["score", "--checkpoint", s(&c1), "--input", s(&decoy)]));

    let r1 = d.join("r1.tsv");
    let r2 = d.join("r2.tsv");
    ok(&["rank", "--checkpoint", s(&c1), "--manifest", s(&all), "--out", s(&r1), "--threads", "1"]);
    ok(&["rank", "--checkpoint", s(&c1), "--manifest", s(&all), "--out", s(&r2), "--threads", "3"]);
    let report = std::fs::read_to_string(&r1).unwrap();
    assert_eq!(report, std::fs::read_to_string(&r2).unwrap());
    assert_eq!(report.lines().count(), 1 + 24);

    let metrics = ok(&["eval", "--report", s(&r1), "--threshold", "2.0"]);
    assert!(metrics.lines().any(|l| l.starts_with("geometric_mean_rank=")), "{metrics}");
    assert!(metrics.lines().any(|l| l == "groups=2"));
    assert!(metrics.lines().any(|l| l.starts_with("group.alpha.spearman=")));
}

#[test]
fn build_graph_writes_cache() {
    let dir = tempfile::tempdir().unwrap();
    let pdb = dir.path().join("m.pdb");
    let lines = [
        "ATOM      1  P     G A   1       0.000   0.000   0.000  1.00  0.00           P",
        "ATOM      2  C1'   G A   1       1.500   0.000   0.000  1.00  0.00           C",
        "ATOM      3  N9    G A   1       1.500   1.400   0.000  1.00  0.00           N",
        "ATOM      4  O4'   G A   1       4.000   0.000   0.000  1.00  0.00           O",
        "END",
    ];
    std::fs::write(&pdb, lines.join("\n")).unwrap();
    let out = dir.path().join("m.pxg");
    let summary = ok(&["build-graph", "--input", s(&pdb), "--out", s(&out)]);
    assert_eq!(summary.trim(), "nodes=3 global_edges=6 local_edges=4 angles=4");
    let g = read_graph(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(g.z, vec![6, 7, 8]);
}

#[test]
fn usage_and_domain_errors() {
    let out = paxnet(&["nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = paxnet(&["rank", "--checkpoint", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = paxnet(&["score", "--checkpoint", "/nonexistent.bin", "--input", "a.pdb"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent.bin"));
    for sub in ["build-graph", "synth", "train", "score", "rank", "eval"] {
        assert_eq!(paxnet(&[sub, "--help"]).status.code(), Some(0), "{sub}");
    }
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let native = write_native(dir.path(), "n", 15, 9);
    let run = |tag: &str| {
        let out_dir = dir.path().join(tag);
        let manifest = dir.path().join(format!("{tag}.tsv"));
        ok(&[
            "synth", "--native", s(&native), "--sigmas", "0.5,2", "--count", "2", "--seed", "1",
            "--out-dir", s(&out_dir), "--manifest", s(&manifest),
        ]);
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        let text = std::fs::read_to_string(&manifest).unwrap().replace(&format!("{tag}/"), "");
        (files, text)
    };
    assert_eq!(run("a"), run("b"));
}
