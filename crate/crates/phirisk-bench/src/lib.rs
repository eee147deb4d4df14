//! Shared fixtures for the pipeline benchmarks.

use phirisk_core::segment::SentenceRecord;
use phirisk_core::synth::{generate_corpus, SynthConfig, SynthCorpus};

pub fn bench_corpus(notes: usize) -> SynthCorpus {
    generate_corpus(&SynthConfig {
        seed: 7,
        notes,
        ..Default::default()
    })
    .expect("bench config is valid")
}

pub fn bench_records(notes: usize) -> Vec<SentenceRecord> {
    let corpus = bench_corpus(notes);
    corpus
        .notes
        .iter()
        .flat_map(|n| phirisk_core::segment::label_sentences(&n.document))
        .collect()
}
