//! Regenerates the demo corpus shipped in `testdata/toy/`:
//!
//! ```text
//! cargo run -p lexsim-core --example gen_testdata -- testdata/toy
//! ```
//!
//! Writes 6 targets x 60 documents (two planted topics) plus the matching
//! targets file. Output is deterministic, so rerunning changes nothing.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use lexsim_core::synth::{write_corpus, SynthSpec};

fn main() {
    let root: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "testdata/toy".to_string())
        .into();
    let spec = SynthSpec::two_topic_demo(60, 0);
    let corpus_dir = root.join("corpus");
    fs::create_dir_all(&corpus_dir).expect("create corpus dir");
    let targets = write_corpus(&spec, &corpus_dir).expect("write corpus");

    let mut targets_file =
        fs::File::create(root.join("targets.txt")).expect("create targets file");
    writeln!(targets_file, "# demo targets: two planted topics").expect("write targets");
    for target in &targets {
        writeln!(targets_file, "{target}").expect("write targets");
    }
    println!(
        "wrote {} targets x {} docs under {}",
        targets.len(),
        spec.docs_per_target,
        corpus_dir.display()
    );
}
