//! Deterministic synthetic corpora with a planted topic structure, used by
//! the test suites and to (re)generate the demo corpus shipped in
//! `testdata/`. Each document is a single line of exactly `2h + 1` cleanup-
//! surviving tokens with the target in the middle; non-target positions draw
//! from the target's topical vocabulary or, with probability
//! `shared_fraction`, from a filler vocabulary common to all topics.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One topic: its target words and its private vocabulary.
#[derive(Debug, Clone)]
pub struct Topic {
    pub targets: Vec<String>,
    pub vocab: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub topics: Vec<Topic>,
    /// Filler words shared across topics.
    pub shared_vocab: Vec<String>,
    /// Probability that a context position draws a shared filler word.
    pub shared_fraction: f64,
    pub docs_per_target: usize,
    pub half_width: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// The two-topic demo corpus: sea and forest words plus neutral filler.
    /// The planted split is {harbor, tide, wave} vs {fern, moss, timber}.
    pub fn two_topic_demo(docs_per_target: usize, seed: u64) -> Self {
        let sea = Topic {
            targets: words(&["tide", "wave", "harbor"]),
            vocab: words(&[
                "salt", "spray", "gull", "anchor", "sailor", "vessel", "coral", "foam", "buoy",
                "mast", "deck", "shore", "reef", "current", "swell", "brine", "fleet", "cargo",
                "dock", "quay", "lighthouse", "seaweed", "tackle", "rudder", "keel",
            ]),
        };
        let forest = Topic {
            targets: words(&["moss", "fern", "timber"]),
            vocab: words(&[
                "pine", "cedar", "bark", "root", "canopy", "trail", "deer", "owl", "grove",
                "thicket", "lichen", "sapling", "needle", "resin", "stump", "bough", "glade",
                "elk", "fox", "bramble", "undergrowth", "hollow", "creek", "meadow", "spruce",
            ]),
        };
        let shared = words(&[
            "light", "stone", "wind", "rain", "cloud", "road", "house", "winter", "summer",
            "north", "south", "garden", "window", "music", "paper", "letter", "market",
            "bridge", "tower", "valley",
        ]);
        SynthSpec {
            topics: vec![sea, forest],
            shared_vocab: shared,
            shared_fraction: 0.2,
            docs_per_target,
            half_width: 20,
            seed,
        }
    }

    /// A corpus of `n_topics * targets_per_topic` targets with generated
    /// vocabularies, for scale tests.
    pub fn generated(
        n_topics: usize,
        targets_per_topic: usize,
        vocab_per_topic: usize,
        docs_per_target: usize,
        seed: u64,
    ) -> Self {
        let topics = (0..n_topics)
            .map(|t| Topic {
                targets: (0..targets_per_topic)
                    .map(|i| format!("topic{t:02}target{i:02}"))
                    .collect(),
                vocab: (0..vocab_per_topic)
                    .map(|i| format!("topic{t:02}word{i:03}"))
                    .collect(),
            })
            .collect();
        let shared_vocab = (0..30).map(|i| format!("sharedword{i:02}")).collect();
        SynthSpec {
            topics,
            shared_vocab,
            shared_fraction: 0.2,
            docs_per_target,
            half_width: 20,
            seed,
        }
    }

    /// All targets in topic order.
    pub fn targets(&self) -> Vec<String> {
        self.topics
            .iter()
            .flat_map(|t| t.targets.iter().cloned())
            .collect()
    }

    /// The planted partition: one label set per topic.
    pub fn planted_split(&self) -> Vec<Vec<String>> {
        self.topics
            .iter()
            .map(|t| {
                let mut targets = t.targets.clone();
                targets.sort();
                targets
            })
            .collect()
    }
}

fn words(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> &'a str {
    &pool[(rng.next_u64() % pool.len() as u64) as usize]
}

/// Writes `<dir>/<target>/dNNN.txt` for every target and returns the target
/// list in order. Regenerating with the same spec is byte-identical.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> std::io::Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut targets = Vec::new();
    for topic in &spec.topics {
        for target in &topic.targets {
            targets.push(target.clone());
            let target_dir = dir.join(target);
            fs::create_dir_all(&target_dir)?;
            for doc in 0..spec.docs_per_target {
                let mut tokens = Vec::with_capacity(2 * spec.half_width + 1);
                for position in 0..(2 * spec.half_width + 1) {
                    if position == spec.half_width {
                        tokens.push(target.as_str());
                    } else if unit_f64(&mut rng) < spec.shared_fraction {
                        tokens.push(pick(&mut rng, &spec.shared_vocab));
                    } else {
                        tokens.push(pick(&mut rng, &topic.vocab));
                    }
                }
                let mut file = fs::File::create(target_dir.join(format!("d{doc:03}.txt")))?;
                writeln!(file, "{}", tokens.join(" "))?;
            }
        }
    }
    Ok(targets)
}
