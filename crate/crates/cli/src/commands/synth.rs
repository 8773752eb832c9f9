use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use olid::corpus::{synth_codeswitch, write_tsv};
use serde_json::json;

use crate::artifacts::{claim_output_dir, sha256_hex, write_manifest, write_text, Manifest};
use crate::config::SynthFile;
use crate::exit::ConfigError;

pub struct SynthArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub force: bool,
}

/// Write `source.tsv`, `target.tsv` and the marker word lists.
pub fn run(args: &SynthArgs) -> Result<()> {
    let mut file = match &args.config {
        Some(path) => SynthFile::load(path)?,
        None => SynthFile {
            seed: 0,
            output_dir: None,
            synth: Default::default(),
        },
    };
    if let Some(seed) = args.seed {
        file.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        file.output_dir = Some(dir.clone());
    }
    let out = file
        .output_dir
        .clone()
        .ok_or_else(|| ConfigError("no output directory: set output_dir or pass --output-dir".into()))?;
    let digest = sha256_hex(&serde_json::to_vec(&file)?);
    claim_output_dir(&out, &digest, args.force)?;

    let pair = synth_codeswitch(&file.synth, file.seed)?;
    write_tsv(&pair.source, out.join("source.tsv"))?;
    write_tsv(&pair.target, out.join("target.tsv"))?;
    let mut markers = String::from("language\tword\n");
    for (lang, words) in [("source", &pair.source_markers), ("target", &pair.target_markers)] {
        for w in words.iter() {
            markers.push_str(&format!("{lang}\t{w}\n"));
        }
    }
    write_text(&out.join("markers.tsv"), &markers)?;
    write_manifest(
        &out,
        &Manifest {
            version: 1,
            command: "synth".into(),
            config_sha256: digest,
            seeds: BTreeMap::from([("root".to_string(), json!(file.seed))]),
            files: vec!["markers.tsv".into(), "source.tsv".into(), "target.tsv".into()],
        },
    )?;
    eprintln!(
        "{} source and {} target documents written to {}",
        pair.source.len(),
        pair.target.len(),
        out.display()
    );
    Ok(())
}
