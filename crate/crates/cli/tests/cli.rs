//! Integration tests driving the `lexsim` binary end to end on the demo
//! corpus: artifact presence, determinism, stage isolation, exclusions,
//! config handling, and exit codes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lexsim")
}

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../testdata/toy")
        .canonicalize()
        .expect("demo corpus present")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn toy_args<'a>(out_dir: &'a str, extra: &[&'a str]) -> Vec<String> {
    let toy = toy_dir();
    let mut args: Vec<String> = vec![
        "--corpus-dir".into(),
        toy.join("corpus").to_string_lossy().into_owned(),
        "--targets".into(),
        toy.join("targets.txt").to_string_lossy().into_owned(),
        "--out-dir".into(),
        out_dir.into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn full_run(out_dir: &str) {
    let mut args = vec!["run".to_string()];
    args.extend(toy_args(out_dir, &["--k", "2"]));
    let args_ref: Vec<&str> = args.iter().map(String::as_str).collect();
    run_ok(&args_ref);
}

/// Every non-manifest artifact as bytes, keyed by path relative to out_dir.
fn snapshot(out_dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![out_dir.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(out_dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                if rel != "manifest.json" {
                    files.insert(rel, fs::read(&path).unwrap());
                }
            }
        }
    }
    files
}

fn manifest_output_hashes(out_dir: &Path) -> BTreeMap<String, BTreeMap<String, String>> {
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    manifest["stages"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(stage, record)| {
            let outputs = record["outputs"]
                .as_object()
                .unwrap()
                .iter()
                .map(|(file, hash)| (file.clone(), hash.as_str().unwrap().to_string()))
                .collect();
            (stage.clone(), outputs)
        })
        .collect()
}

#[test]
fn full_run_produces_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    full_run(out.to_str().unwrap());

    for name in [
        "bags.jsonl",
        "corpus_report.json",
        "S.csv",
        "ranked.csv",
        "stats.json",
        "R.csv",
        "R_stats.json",
        "spectrum.csv",
        "eigenvectors.csv",
        "coords.csv",
        "stress.csv",
        "coord_means.csv",
        "merges.jsonl",
        "dendrogram.newick",
        "clusters_2.json",
        "config.json",
        "manifest.json",
        "report/rank_s.csv",
        "report/rank_r.csv",
        "report/elbow.csv",
        "report/coords_first3.csv",
        "report/clusters.md",
    ] {
        assert!(out.join(name).is_file(), "missing artifact {name}");
    }

    // The demo corpus has no exclusions and recovers the planted split.
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("corpus_report.json")).unwrap()).unwrap();
    assert_eq!(report["included_targets"].as_array().unwrap().len(), 6);
    assert!(report["excluded_targets"].as_array().unwrap().is_empty());

    let clusters: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&fs::read_to_string(out.join("clusters_2.json")).unwrap()).unwrap();
    let mut groups: Vec<Vec<String>> = clusters.into_values().collect();
    groups.sort();
    assert_eq!(
        groups,
        vec![
            vec!["fern".to_string(), "moss".into(), "timber".into()],
            vec!["harbor".to_string(), "tide".into(), "wave".into()],
        ]
    );

    // Markdown cluster table has one row per cluster.
    let table = fs::read_to_string(out.join("report/clusters.md")).unwrap();
    assert_eq!(table.lines().count(), 2 + 2);
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    full_run(out.to_str().unwrap());
    let first_files = snapshot(&out);
    let first_hashes = manifest_output_hashes(&out);

    full_run(out.to_str().unwrap());
    let second_files = snapshot(&out);
    let second_hashes = manifest_output_hashes(&out);

    assert_eq!(first_files, second_files);
    assert_eq!(first_hashes, second_hashes);
}

#[test]
fn stage_isolation_reproduces_deleted_intermediates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_str = out.to_str().unwrap();
    full_run(out_str);
    let before = snapshot(&out);

    // Delete the similarity artifacts and re-run only `sim`.
    for name in ["S.csv", "ranked.csv", "stats.json"] {
        fs::remove_file(out.join(name)).unwrap();
    }
    let mut args = vec!["sim".to_string()];
    args.extend(toy_args(out_str, &["--k", "2"]));
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    // Delete the MDS artifacts and re-run only `mds`.
    for name in ["spectrum.csv", "coords.csv", "stress.csv"] {
        fs::remove_file(out.join(name)).unwrap();
    }
    let mut args = vec!["mds".to_string()];
    args.extend(toy_args(out_str, &["--k", "2"]));
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    let after = snapshot(&out);
    assert_eq!(before, after);
}

#[test]
fn sparse_target_is_excluded_and_reported() {
    let tmp = tempfile::tempdir().unwrap();
    // Copy the demo corpus, then thin one target to 49 documents.
    let corpus = tmp.path().join("corpus");
    copy_tree(&toy_dir().join("corpus"), &corpus);
    let thin = corpus.join("moss");
    let mut docs: Vec<PathBuf> = fs::read_dir(&thin)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    docs.sort();
    for doc in docs.iter().skip(49) {
        fs::remove_file(doc).unwrap();
    }

    let out = tmp.path().join("out");
    let output = run_ok(&[
        "ingest",
        "--corpus-dir",
        corpus.to_str().unwrap(),
        "--targets",
        toy_dir().join("targets.txt").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("moss"), "exclusion warning names the target");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("corpus_report.json")).unwrap()).unwrap();
    let excluded = report["excluded_targets"].as_array().unwrap();
    assert_eq!(excluded.len(), 1);
    assert_eq!(excluded[0]["target"], "moss");
    assert_eq!(excluded[0]["contexts_found"], 49);
    assert_eq!(report["included_targets"].as_array().unwrap().len(), 5);
}

#[test]
fn missing_target_directory_counts_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    copy_tree(&toy_dir().join("corpus"), &corpus);
    fs::remove_dir_all(corpus.join("fern")).unwrap();

    let out = tmp.path().join("out");
    run_ok(&[
        "ingest",
        "--corpus-dir",
        corpus.to_str().unwrap(),
        "--targets",
        toy_dir().join("targets.txt").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("corpus_report.json")).unwrap()).unwrap();
    let excluded = report["excluded_targets"].as_array().unwrap();
    assert_eq!(excluded[0]["target"], "fern");
    assert_eq!(excluded[0]["contexts_found"], 0);
}

#[test]
fn empty_target_list_warns_and_writes_empty_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let targets = tmp.path().join("targets.txt");
    fs::write(&targets, "# nothing here\n").unwrap();
    let out = tmp.path().join("out");
    let output = run_ok(&[
        "ingest",
        "--corpus-dir",
        toy_dir().join("corpus").to_str().unwrap(),
        "--targets",
        targets.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&output.stderr).contains("empty"));
    assert_eq!(fs::read_to_string(out.join("bags.jsonl")).unwrap(), "");
}

#[test]
fn unreadable_document_is_a_data_error_naming_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    copy_tree(&toy_dir().join("corpus"), &corpus);
    // Invalid UTF-8 breaks the plain-text contract.
    fs::write(corpus.join("tide/d000.txt"), [0xff, 0xfe, 0x00]).unwrap();

    let out = tmp.path().join("out");
    let output = run(&[
        "ingest",
        "--corpus-dir",
        corpus.to_str().unwrap(),
        "--targets",
        toy_dir().join("targets.txt").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("d000.txt"));
}

#[test]
fn null_replicates_use_derived_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_str = out.to_str().unwrap();

    let mut args = vec!["ingest".to_string()];
    args.extend(toy_args(out_str, &[]));
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    let mut args = vec!["null".to_string()];
    args.extend(toy_args(out_str, &["--seed", "7", "--replicates", "3"]));
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    for name in [
        "R.csv",
        "R_stats.json",
        "R_rep2.csv",
        "R_rep2_stats.json",
        "R_rep3.csv",
        "R_rep3_stats.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(
        manifest["stages"]["null"]["seeds"],
        serde_json::json!([7, 8, 9])
    );

    // Same seed reproduces R.csv bit for bit; a different replicate differs.
    let r1 = fs::read(out.join("R.csv")).unwrap();
    let mut args = vec!["null".to_string()];
    args.extend(toy_args(out_str, &["--seed", "7"]));
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(fs::read(out.join("R.csv")).unwrap(), r1);
    assert_ne!(fs::read(out.join("R_rep2.csv")).unwrap(), r1);
}

#[test]
fn report_mean_column_matches_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    full_run(out.to_str().unwrap());

    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    let mean = stats["mean"].as_f64().unwrap();

    let rank_s = fs::read_to_string(out.join("report/rank_s.csv")).unwrap();
    let first_row = rank_s.lines().nth(1).unwrap();
    let mean_cell: f64 = first_row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((mean_cell - mean).abs() <= 1e-8 * mean.abs().max(1.0));

    // Ranked file row count matches n(n-1)/2.
    let ranked = fs::read_to_string(out.join("ranked.csv")).unwrap();
    assert_eq!(ranked.lines().count() - 1, 15);
}

#[test]
fn trace_prints_top_similarity_pair_first() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_str = out.to_str().unwrap();
    full_run(out_str);

    let ranked = fs::read_to_string(out.join("ranked.csv")).unwrap();
    let top: Vec<&str> = ranked.lines().nth(1).unwrap().split(',').collect();
    let (label_i, label_j) = (top[2], top[3]);

    let mut args = vec!["cluster".to_string()];
    args.extend(toy_args(out_str, &["--k", "2", "--trace", "1"]));
    let output = run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let first_line = stdout.lines().next().unwrap();
    assert!(
        first_line.contains(label_i) && first_line.contains(label_j),
        "trace line {first_line:?} should mention {label_i} and {label_j}"
    );
}

#[test]
fn config_file_is_read_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let config = tmp.path().join("cfg.toml");
    let toy = toy_dir();
    fs::write(
        &config,
        format!(
            "corpus_dir = {:?}\ntargets_file = {:?}\nk = 2\nout_dir = {:?}\n",
            toy.join("corpus").to_str().unwrap(),
            toy.join("targets.txt").to_str().unwrap(),
            out_a.to_str().unwrap()
        ),
    )
    .unwrap();

    run_ok(&["ingest", "--config", config.to_str().unwrap()]);
    assert!(out_a.join("bags.jsonl").is_file());

    // Flag overrides the config file's out_dir.
    run_ok(&[
        "ingest",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_b.to_str().unwrap(),
    ]);
    assert!(out_b.join("bags.jsonl").is_file());
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    // Usage errors: bad parameter value, bad enum, unknown flag.
    let bad_param = run(&[
        "ingest",
        "--corpus-dir",
        toy_dir().join("corpus").to_str().unwrap(),
        "--half-width",
        "0",
    ]);
    assert_eq!(bad_param.status.code(), Some(1));

    let bad_enum = run(&["cluster", "--distance", "bogus"]);
    assert_eq!(bad_enum.status.code(), Some(1));

    let unknown_flag = run(&["sim", "--frobnicate"]);
    assert_eq!(unknown_flag.status.code(), Some(1));

    let missing_corpus_flag = run(&["ingest", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(missing_corpus_flag.status.code(), Some(1));

    // Data errors: nonexistent corpus, missing upstream artifacts.
    let missing_corpus = run(&[
        "ingest",
        "--corpus-dir",
        tmp.path().join("nope").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(missing_corpus.status.code(), Some(2));

    let missing_bags = run(&["sim", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(missing_bags.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_bags.stderr).contains("ingest"));

    let missing_s = run(&["mds", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(missing_s.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_s.stderr).contains("sim"));

    // Help succeeds.
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn cluster_k_larger_than_n_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_str = out.to_str().unwrap();
    for stage in ["ingest", "sim"] {
        let mut args = vec![stage.to_string()];
        args.extend(toy_args(out_str, &[]));
        run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let mut args = vec!["cluster".to_string()];
    args.extend(toy_args(out_str, &["--k", "7"]));
    let output = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(output.status.code(), Some(2));
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let src = entry.path();
        let dst = to.join(entry.file_name());
        if src.is_dir() {
            copy_tree(&src, &dst);
        } else {
            fs::copy(&src, &dst).unwrap();
        }
    }
}
