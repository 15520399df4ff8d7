//! End-to-end library tests on planted synthetic corpora: ingestion
//! invariants, recovery of the planted topic split, and the directional
//! behavior of the shuffled null model.

use lexsim_core::cluster::{cut, similarity_to_distance, ward_linkage, DistanceKind};
use lexsim_core::corpus::{assemble_corpus, CleanupRules, IngestOptions};
use lexsim_core::sim::{build_similarity_matrix, shuffle_null_model, summary_stats};
use lexsim_core::synth::{write_corpus, SynthSpec};

fn ingest_demo(
    docs_per_target: usize,
    max_contexts: usize,
    seed: u64,
) -> (Vec<lexsim_core::corpus::BagOfWords>, SynthSpec) {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::two_topic_demo(docs_per_target, seed);
    let targets = write_corpus(&spec, dir.path()).unwrap();
    let rules = CleanupRules::default_rules();
    let opts = IngestOptions {
        half_width: spec.half_width,
        max_contexts,
        one_per_doc: true,
    };
    let (bags, report) = assemble_corpus(dir.path(), &targets, &rules, &opts).unwrap();
    assert!(report.excluded_targets.is_empty());
    (bags, spec)
}

#[test]
fn bag_totals_are_exact() {
    let (bags, _) = ingest_demo(55, 50, 3);
    for bag in &bags {
        assert_eq!(bag.total(), 50 * 41);
    }
    let sum: u64 = bags.iter().map(|b| b.total()).sum();
    assert_eq!(sum, 6 * 50 * 41);
}

#[test]
fn ingestion_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::two_topic_demo(12, 5);
    let targets = write_corpus(&spec, dir.path()).unwrap();
    let rules = CleanupRules::default_rules();
    let opts = IngestOptions {
        half_width: 20,
        max_contexts: 10,
        one_per_doc: true,
    };
    let first = assemble_corpus(dir.path(), &targets, &rules, &opts).unwrap();
    let second = assemble_corpus(dir.path(), &targets, &rules, &opts).unwrap();
    assert_eq!(first.0, second.0);
    assert_eq!(first.1, second.1);
}

#[test]
fn no_bag_token_violates_cleanup_rules() {
    let (bags, spec) = ingest_demo(12, 10, 11);
    let rules = CleanupRules::default_rules();
    let targets = spec.targets();
    for bag in &bags {
        for word in bag.counts().keys() {
            // The target itself is exempt at its own position; everything
            // else must pass the filter.
            assert!(
                rules.accepts(word) || targets.contains(word),
                "{word:?} violates cleanup rules"
            );
        }
    }
}

#[test]
fn planted_split_is_recovered() {
    for seed in 0..3 {
        let (bags, spec) = ingest_demo(50, 50, seed);
        let s = build_similarity_matrix(&bags).unwrap();
        let d = similarity_to_distance(&s, DistanceKind::Sqrt2).unwrap();
        let dend = ward_linkage(&d).unwrap();
        let partition = cut(&dend, 2).unwrap();
        let mut got: Vec<Vec<String>> = partition.members().to_vec();
        got.sort();
        let mut want = spec.planted_split();
        want.sort();
        assert_eq!(got, want, "seed {seed} failed to recover the split");
    }
}

#[test]
fn shuffled_matrix_is_more_homogeneous() {
    let (bags, _) = ingest_demo(50, 50, 0);
    let s = build_similarity_matrix(&bags).unwrap();
    let s_stats = summary_stats(&s);
    for seed in 0..3 {
        let shuffled = shuffle_null_model(&bags, seed).unwrap();
        let r = build_similarity_matrix(&shuffled).unwrap();
        let r_stats = summary_stats(&r);
        assert!(
            r_stats.std < s_stats.std,
            "seed {seed}: sigma(R) = {} not below sigma(S) = {}",
            r_stats.std,
            s_stats.std
        );
        assert!(
            r_stats.mean > s_stats.mean,
            "seed {seed}: mean(R) = {} not above mean(S) = {}",
            r_stats.mean,
            s_stats.mean
        );
    }
}
