//! Stage implementations. Every stage reads its inputs back from the files
//! the previous stage wrote (never from memory), so a full `run` and a
//! stage-by-stage invocation produce byte-identical artifacts, and any
//! intermediate can be deleted and reproduced.

use std::fs;
use std::path::{Path, PathBuf};

use lexsim_core::cluster::{
    cut, merge_trace, similarity_to_distance, to_newick, ward_linkage,
};
use lexsim_core::corpus::{
    assemble_corpus, default_stoplist, default_targets, load_stoplist, load_targets, read_bags,
    write_bags, CleanupRules, IngestOptions,
};
use lexsim_core::sim::{
    build_similarity_matrix, fit_rank_range, format_sig9, rank_entries, shuffle_null_model,
    MatrixKind, SimilarityMatrix, StatsReport,
};
use lexsim_core::spectral::{
    eigendecompose, principal_coordinates, stress_curve, StressReport,
};
use lexsim_core::PipelineConfig;

use crate::manifest::{self, RunManifest};
use crate::AppError;

fn data(message: impl std::fmt::Display) -> AppError {
    AppError::Data(message.to_string())
}

fn usage(message: impl Into<String>) -> AppError {
    AppError::Usage(message.into())
}

fn out_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

/// Creates the output directory and drops the config snapshot next to the
/// artifacts, so every output is accompanied by the parameters and seed that
/// produced it.
fn prepare_out(cfg: &PipelineConfig) -> Result<(), AppError> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| data(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    write_json(&out_path(cfg, "config.json"), cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Path of an artifact a stage depends on; a missing file names the stage
/// that produces it.
fn require_artifact(cfg: &PipelineConfig, name: &str, produced_by: &str) -> Result<PathBuf, AppError> {
    let path = out_path(cfg, name);
    if !path.is_file() {
        return Err(data(format!(
            "missing artifact {} under {}: run the `{produced_by}` stage first",
            name,
            cfg.out_dir.display()
        )));
    }
    Ok(path)
}

fn finish_stage(
    cfg: &PipelineConfig,
    name: &str,
    outputs: &[PathBuf],
    seeds: Vec<u64>,
    inputs: &[(&str, String)],
) -> Result<(), AppError> {
    let mut man = RunManifest::load_or_default(&cfg.out_dir);
    man.set_config(cfg);
    for (input, hash) in inputs {
        man.record_input(input, hash.clone());
    }
    man.record_stage(name, outputs, seeds)
        .map_err(|e| data(format!("manifest: {e}")))?;
    man.save(&cfg.out_dir)
        .map_err(|e| data(format!("manifest: {e}")))
}

pub fn ingest(cfg: &PipelineConfig) -> Result<(), AppError> {
    let corpus_dir = cfg
        .corpus_dir
        .as_deref()
        .ok_or_else(|| usage("corpus_dir is required (flag --corpus-dir or config key corpus_dir)"))?;
    if !corpus_dir.is_dir() {
        return Err(data(format!(
            "corpus directory {} does not exist",
            corpus_dir.display()
        )));
    }

    let (targets, targets_hash) = match &cfg.targets_file {
        Some(path) => (
            load_targets(path)?,
            manifest::sha256_file(path).map_err(|e| data(format!("{}: {e}", path.display())))?,
        ),
        None => {
            let targets = default_targets();
            let hash = manifest::sha256_bytes(targets.join("\n").as_bytes());
            (targets, hash)
        }
    };
    let (stoplist, stoplist_hash) = match &cfg.stoplist_file {
        Some(path) => (
            load_stoplist(path)?,
            manifest::sha256_file(path).map_err(|e| data(format!("{}: {e}", path.display())))?,
        ),
        None => {
            let stoplist = default_stoplist();
            let joined: Vec<String> = stoplist.iter().cloned().collect();
            (stoplist, manifest::sha256_bytes(joined.join("\n").as_bytes()))
        }
    };
    if targets.is_empty() {
        eprintln!("warning: target list is empty; writing empty outputs");
    }

    let rules = CleanupRules::new(cfg.min_word_length, stoplist)?;
    let opts = IngestOptions::from(cfg);
    let (bags, report) = assemble_corpus(corpus_dir, &targets, &rules, &opts)?;

    prepare_out(cfg)?;
    let bags_path = out_path(cfg, "bags.jsonl");
    let report_path = out_path(cfg, "corpus_report.json");
    write_bags(&bags_path, &bags)?;
    write_json(&report_path, &report)?;

    for excluded in &report.excluded_targets {
        eprintln!(
            "warning: excluded {:?} ({} contexts, need {})",
            excluded.target, excluded.contexts_found, cfg.max_contexts
        );
    }
    println!(
        "ingest: {} targets included, {} excluded, {} distinct words, {} tokens",
        report.included_targets.len(),
        report.excluded_targets.len(),
        report.vocabulary_size,
        report.total_words
    );

    let corpus_hash =
        manifest::sha256_tree(corpus_dir).map_err(|e| data(format!("hashing corpus: {e}")))?;
    finish_stage(
        cfg,
        "ingest",
        &[bags_path, report_path],
        vec![],
        &[
            ("corpus", corpus_hash),
            ("targets", targets_hash),
            ("stoplist", stoplist_hash),
        ],
    )
}

pub fn sim(cfg: &PipelineConfig, fit: Option<(usize, usize)>) -> Result<(), AppError> {
    let bags_path = require_artifact(cfg, "bags.jsonl", "ingest")?;
    let bags = read_bags(&bags_path)?;
    let s = build_similarity_matrix(&bags)?;

    prepare_out(cfg)?;
    let s_path = out_path(cfg, "S.csv");
    let ranked_path = out_path(cfg, "ranked.csv");
    let stats_path = out_path(cfg, "stats.json");
    s.write_csv(&s_path)?;
    let ranked = rank_entries(&s);
    ranked.write_csv(&ranked_path)?;
    let stats = StatsReport::from_matrix(&s);
    write_json(&stats_path, &stats)?;

    let mut outputs = vec![s_path, ranked_path, stats_path];
    if let Some((lo, hi)) = fit {
        let (intercept, slope) = fit_rank_range(&ranked, lo, hi)?;
        let fit_path = out_path(cfg, "fit.json");
        write_json(
            &fit_path,
            &serde_json::json!({
                "r_lo": lo,
                "r_hi": hi,
                "intercept": intercept,
                "slope": slope,
            }),
        )?;
        println!("fit over ranks [{lo}, {hi}]: value ~ {intercept:.6} + ({slope:.6e}) * rank");
        outputs.push(fit_path);
    }
    println!(
        "sim: {0}x{0} matrix, {1} ranked entries, mean {2:.6}, std {3:.6}",
        stats.n, stats.entries, stats.mean, stats.std
    );
    finish_stage(cfg, "sim", &outputs, vec![], &[])
}

pub fn null(cfg: &PipelineConfig) -> Result<(), AppError> {
    let bags_path = require_artifact(cfg, "bags.jsonl", "ingest")?;
    let bags = read_bags(&bags_path)?;

    prepare_out(cfg)?;
    let mut outputs = Vec::new();
    let mut seeds = Vec::new();
    for replicate in 0..cfg.replicates {
        let seed = cfg.replicate_seed(replicate);
        let shuffled = shuffle_null_model(&bags, seed)?;
        let r = build_similarity_matrix(&shuffled)?;
        let (matrix_name, stats_name) = if replicate == 0 {
            ("R.csv".to_string(), "R_stats.json".to_string())
        } else {
            (
                format!("R_rep{}.csv", replicate + 1),
                format!("R_rep{}_stats.json", replicate + 1),
            )
        };
        let matrix_path = out_path(cfg, &matrix_name);
        let stats_path = out_path(cfg, &stats_name);
        r.write_csv(&matrix_path)?;
        write_json(&stats_path, &StatsReport::from_matrix(&r))?;
        outputs.push(matrix_path);
        outputs.push(stats_path);
        seeds.push(seed);
    }
    println!("null: {} replicate(s), seeds {:?}", cfg.replicates, seeds);
    finish_stage(cfg, "null", &outputs, seeds, &[])
}

pub fn mds(cfg: &PipelineConfig, fit_tail: Option<(usize, usize)>) -> Result<(), AppError> {
    let s_path = require_artifact(cfg, "S.csv", "sim")?;
    let s = SimilarityMatrix::read_csv(&s_path, MatrixKind::Normalized)?;
    let spectrum = eigendecompose(s.as_matrix())?;
    let coords = principal_coordinates(&spectrum, s.n())?;
    if !coords.clamped.is_empty() {
        eprintln!(
            "warning: clamped {} slightly negative eigenvalue(s) to zero",
            coords.clamped.len()
        );
    }

    prepare_out(cfg)?;
    let spectrum_path = out_path(cfg, "spectrum.csv");
    let vectors_path = out_path(cfg, "eigenvectors.csv");
    let coords_path = out_path(cfg, "coords.csv");
    let stress_path = out_path(cfg, "stress.csv");
    let means_path = out_path(cfg, "coord_means.csv");

    spectrum.write_eigenvalues_csv(&spectrum_path)?;
    spectrum.write_eigenvectors_csv(&vectors_path, s.labels())?;
    coords.write_csv(&coords_path, s.labels())?;
    let stress = stress_curve(s.as_matrix(), &spectrum);
    stress.write_csv(&stress_path)?;

    let mut means = String::from("a,mean\n");
    for (a, mean) in coords.column_means().iter().enumerate() {
        means.push_str(&format!("{},{}\n", a + 1, format_sig9(*mean)));
    }
    fs::write(&means_path, means)
        .map_err(|e| data(format!("cannot write {}: {e}", means_path.display())))?;

    if let Some((lo, hi)) = fit_tail {
        let (intercept, slope) = stress.fit_tail(lo, hi)?;
        println!("stress tail fit over m in [{lo}, {hi}]: Q ~ {intercept:.6} + ({slope:.6e}) * m");
    }
    let last_q = stress.points.last().map(|&(_, q)| q).unwrap_or(0.0);
    println!(
        "mds: n = {}, lambda_1 = {:.6}, trace = {:.6}, Q(n) = {:.3e}",
        s.n(),
        spectrum.eigenvalues()[0],
        spectrum.eigenvalue_sum(),
        last_q
    );
    finish_stage(
        cfg,
        "mds",
        &[spectrum_path, vectors_path, coords_path, stress_path, means_path],
        vec![],
        &[],
    )
}

pub fn cluster(cfg: &PipelineConfig, trace: Option<usize>) -> Result<(), AppError> {
    let s_path = require_artifact(cfg, "S.csv", "sim")?;
    let s = SimilarityMatrix::read_csv(&s_path, MatrixKind::Normalized)?;
    let d = similarity_to_distance(&s, cfg.distance)?;
    let dend = ward_linkage(&d)?;
    let partition = cut(&dend, cfg.k)?;

    prepare_out(cfg)?;
    let merges_path = out_path(cfg, "merges.jsonl");
    let newick_path = out_path(cfg, "dendrogram.newick");
    let clusters_path = out_path(cfg, &format!("clusters_{}.json", cfg.k));
    dend.write_merges_jsonl(&merges_path)?;
    fs::write(&newick_path, to_newick(&dend) + "\n")
        .map_err(|e| data(format!("cannot write {}: {e}", newick_path.display())))?;
    write_json(&clusters_path, &partition.to_json_map())?;

    if let Some(t) = trace {
        for entry in merge_trace(&dend, t) {
            println!(
                "step {:>4}  cost {:.6}  [{}] + [{}]",
                entry.step,
                entry.cost,
                entry.left_members.join(", "),
                entry.right_members.join(", ")
            );
        }
    }
    println!(
        "cluster: {} merges, cut at k = {} ({} clusters)",
        dend.merges().len(),
        cfg.k,
        partition.members().len()
    );
    finish_stage(
        cfg,
        "cluster",
        &[merges_path, newick_path, clusters_path],
        vec![],
        &[],
    )
}

pub fn report(cfg: &PipelineConfig) -> Result<(), AppError> {
    let s_path = require_artifact(cfg, "S.csv", "sim")?;
    let stats_path = require_artifact(cfg, "stats.json", "sim")?;
    let r_path = require_artifact(cfg, "R.csv", "null")?;
    let r_stats_path = require_artifact(cfg, "R_stats.json", "null")?;
    let stress_path = require_artifact(cfg, "stress.csv", "mds")?;
    let coords_path = require_artifact(cfg, "coords.csv", "mds")?;
    let clusters_path = require_artifact(cfg, &format!("clusters_{}.json", cfg.k), "cluster")?;

    let s = SimilarityMatrix::read_csv(&s_path, MatrixKind::Normalized)?;
    let stats: StatsReport = read_json(&stats_path)?;
    let r = SimilarityMatrix::read_csv(&r_path, MatrixKind::Normalized)?;
    let r_stats: StatsReport = read_json(&r_stats_path)?;
    let clusters: std::collections::BTreeMap<String, Vec<String>> = read_json(&clusters_path)?;
    StressReport::read_csv(&stress_path)?; // validate before copying

    let report_dir = out_path(cfg, "report");
    fs::create_dir_all(&report_dir)
        .map_err(|e| data(format!("cannot create {}: {e}", report_dir.display())))?;

    // Fig. 1 analogs: rank-ordered entries with the mean as a horizontal line.
    let rank_s_path = report_dir.join("rank_s.csv");
    let rank_r_path = report_dir.join("rank_r.csv");
    write_rank_csv(&rank_s_path, &s, stats.mean)?;
    write_rank_csv(&rank_r_path, &r, r_stats.mean)?;

    // Fig. 2 analog: the stress curve, copied verbatim.
    let elbow_path = report_dir.join("elbow.csv");
    fs::copy(&stress_path, &elbow_path)
        .map_err(|e| data(format!("cannot write {}: {e}", elbow_path.display())))?;

    // Fig. 3 analog: the first three coordinate columns, cells verbatim.
    let coords3_path = report_dir.join("coords_first3.csv");
    write_first_coords(&coords_path, &coords3_path, 3)?;

    // Table analog: the k-cut partition as a Markdown table.
    let clusters_md_path = report_dir.join("clusters.md");
    let mut table = String::from("| cluster | members |\n| ---: | --- |\n");
    let mut ordered: Vec<(usize, &Vec<String>)> = clusters
        .iter()
        .map(|(key, members)| {
            key.parse::<usize>()
                .map(|id| (id, members))
                .map_err(|_| data(format!("bad cluster id {key:?} in clusters file")))
        })
        .collect::<Result<_, _>>()?;
    ordered.sort_by_key(|(id, _)| *id);
    for (id, members) in &ordered {
        table.push_str(&format!("| {id} | {} |\n", members.join(", ")));
    }
    fs::write(&clusters_md_path, table)
        .map_err(|e| data(format!("cannot write {}: {e}", clusters_md_path.display())))?;

    println!("report: 5 artifacts under {}", report_dir.display());
    finish_stage(
        cfg,
        "report",
        &[rank_s_path, rank_r_path, elbow_path, coords3_path, clusters_md_path],
        vec![],
        &[],
    )
}

fn write_rank_csv(path: &Path, m: &SimilarityMatrix, mean: f64) -> Result<(), AppError> {
    let ranked = rank_entries(m);
    let mut text = String::from("rank,value,mean\n");
    for entry in ranked.entries() {
        text.push_str(&format!(
            "{},{},{}\n",
            entry.rank,
            format_sig9(entry.value),
            format_sig9(mean)
        ));
    }
    fs::write(path, text).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

/// Copies the label column and the first `keep` coordinate columns without
/// reformatting the cells.
fn write_first_coords(from: &Path, to: &Path, keep: usize) -> Result<(), AppError> {
    let text = fs::read_to_string(from)
        .map_err(|e| data(format!("cannot read {}: {e}", from.display())))?;
    let mut out = String::new();
    for line in text.lines() {
        let kept: Vec<&str> = line.split(',').take(keep + 1).collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    fs::write(to, out).map_err(|e| data(format!("cannot write {}: {e}", to.display())))
}

/// All stages in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<(), AppError> {
    ingest(cfg)?;
    sim(cfg, None)?;
    null(cfg)?;
    mds(cfg, None)?;
    cluster(cfg, None)?;
    report(cfg)
}
