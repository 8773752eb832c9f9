//! Shared fixtures for the benchmarks.

use olid::corpus::{synth_codeswitch, SynthConfig, SynthPair};

/// A fixed synthetic corpus so runs are comparable.
pub fn corpus(source_docs: usize, target_docs: usize) -> SynthPair {
    let config = SynthConfig {
        source_docs,
        target_docs,
        ..SynthConfig::default()
    };
    synth_codeswitch(&config, 42).expect("synthetic corpus")
}
