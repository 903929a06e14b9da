//! End-to-end checks of the command-line interface: subcommand wiring,
//! artifact emission, and the documented exit codes (0 ok, 2 config,
//! 3 data, 4 numerical).

use std::path::Path;
use std::process::{Command, Output};

fn semaxes(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semaxes"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn synth_then_run_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = semaxes(
        &[
            "synth",
            "--datasets",
            "2",
            "--dim",
            "4",
            "--samples",
            "300",
            "--shared",
            "2",
            "--runs",
            "3",
            "--seed",
            "9",
            "--out",
            "fixture",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fixture = dir.path().join("fixture");
    assert!(fixture.join("pipeline.toml").exists());
    assert!(fixture.join("syn0.vec").exists());
    assert!(fixture.join("dict0_1.txt").exists());
    assert!(fixture.join("ground_truth.json").exists());

    let out = semaxes(
        &["run", "--config", "fixture/pipeline.toml"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let outdir = fixture.join("out");
    for artifact in [
        "manifest.json",
        "plan.json",
        "resolved_config.toml",
        "syn0/cluster_report.json",
        "syn0/quality_curve.tsv",
        "syn0/axes.tsv",
        "syn1/axes.json",
        "cross/similarity_syn0_syn1.tsv",
        "cross/clusters.json",
        "cross/summary.json",
        "cross/cluster_table.tsv",
        "cross/questionnaire.txt",
    ] {
        assert!(outdir.join(artifact).exists(), "missing {artifact}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "ok");

    // the two shared sources should be recovered as two pair clusters
    let clusters: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("cross/clusters.json")).unwrap())
            .unwrap();
    assert_eq!(clusters["summary"]["clusters_found"], 2, "{clusters}");
}

#[test]
fn subcommand_chain_icasso_axes_crosslang() {
    let dir = tempfile::tempdir().unwrap();
    let out = semaxes(
        &[
            "synth", "--datasets", "2", "--dim", "4", "--samples", "300", "--shared", "2",
            "--seed", "11", "--out", "fx",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);

    for k in 0..2 {
        let input = format!("fx/syn{k}.vec");
        let outdir = format!("ic{k}");
        let out = semaxes(
            &[
                "icasso",
                "--input",
                &input,
                "--runs",
                "3",
                "--retain",
                "4",
                "--target-clusters",
                "4",
                "--out",
                &outdir,
            ],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(&outdir).join("reliable_axes.bin").exists());
    }

    let out = semaxes(
        &[
            "axes",
            "--axes",
            "ic0/reliable_axes.bin",
            "--cluster-report",
            "ic0/cluster_report.json",
            "--vocab",
            "fx/syn0.vec",
            "--language",
            "syn0",
            "--top-k",
            "3",
            "--out",
            "ax0",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("ax0/axes.tsv").exists());

    let out = semaxes(
        &[
            "crosslang",
            "--axes",
            "a=ic0/reliable_axes.bin",
            "--axes",
            "b=ic1/reliable_axes.bin",
            "--n-common",
            "300",
            "--out",
            "cx",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("cx/clusters.json").exists());
    assert!(dir.path().join("cx/similarity_a_b.tsv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("n_tests"),
        "multiple-testing convention not printed: {stdout}"
    );
}

#[test]
fn kappa_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ratings.csv"),
        "item,rater,rating\nc1,r1,1\nc1,r2,1\nc2,r1,0\nc2,r2,1\nc3,r1,0\nc3,r2,0\n",
    )
    .unwrap();
    let out = semaxes(&["kappa", "--ratings", "ratings.csv", "--out", "k"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("k/kappa.json")).unwrap())
            .unwrap();
    assert!(report["kappa"].is_number());
    assert!(String::from_utf8_lossy(&out.stdout).contains("kappa"));
}

#[test]
fn exit_code_2_for_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = semaxes(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(code(&out), 2);

    std::fs::write(dir.path().join("bad.toml"), "total_size = -3\n").unwrap();
    let out = semaxes(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn exit_code_3_for_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    // malformed embedding file: a word line with the wrong field count
    std::fs::write(dir.path().join("a.vec"), "2 3\nalpha 1 0 0\nbeta 1 0\n").unwrap();
    std::fs::write(dir.path().join("b.vec"), "2 3\nxen 1 0 0\nyen 0 1 0\n").unwrap();
    std::fs::write(dir.path().join("d.txt"), "alpha xen\n").unwrap();
    std::fs::write(dir.path().join("f.txt"), "alpha\nbeta\n").unwrap();
    std::fs::write(dir.path().join("g.txt"), "xen\nyen\n").unwrap();
    std::fs::write(
        dir.path().join("p.toml"),
        r#"
total_size = 2

[[languages]]
name = "a"
embeddings = "a.vec"
frequency_list = "f.txt"

[[languages]]
name = "b"
embeddings = "b.vec"
frequency_list = "g.txt"
dictionary = "d.txt"
"#,
    )
    .unwrap();
    let out = semaxes(&["run", "--config", "p.toml"], dir.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    // partial manifest tags the failed stage
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["status"], "failed:ingest");
}

#[test]
fn exit_code_4_for_numerical_errors() {
    let dir = tempfile::tempdir().unwrap();
    // rank-deficient embeddings: second coordinate duplicates the first
    let mut vec_a = String::from("6 3\n");
    let mut vec_b = String::from("6 3\n");
    for i in 0..6 {
        let v = i as f64;
        vec_a.push_str(&format!("a{i} {v} {v} {}\n", v * v));
        vec_b.push_str(&format!("b{i} {v} {v} {}\n", v * v * 0.5));
    }
    std::fs::write(dir.path().join("a.vec"), vec_a).unwrap();
    std::fs::write(dir.path().join("b.vec"), vec_b).unwrap();
    std::fs::write(dir.path().join("d.txt"), "a0 b0\na1 b1\na2 b2\na3 b3\n").unwrap();
    std::fs::write(dir.path().join("f.txt"), "a0\na1\na2\na3\na4\na5\n").unwrap();
    std::fs::write(dir.path().join("g.txt"), "b0\nb1\nb2\nb3\nb4\nb5\n").unwrap();
    std::fs::write(
        dir.path().join("p.toml"),
        r#"
total_size = 6

[[languages]]
name = "a"
embeddings = "a.vec"
frequency_list = "f.txt"

[[languages]]
name = "b"
embeddings = "b.vec"
frequency_list = "g.txt"
dictionary = "d.txt"

[ica]
retain = 3

[icasso]
runs = 2
target_clusters = 2
"#,
    )
    .unwrap();
    let out = semaxes(&["run", "--config", "p.toml"], dir.path());
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["status"], "failed:icasso");
}
