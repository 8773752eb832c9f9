pub mod evaluate;
pub mod gradcheck;
pub mod predict;
pub mod preprocess;
pub mod synth;
pub mod train;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use olid::corpus::{parse_tsv, LabelAliases, LabeledDataset, TsvSchema};

/// Load a TSV with `id` and `text` columns. A `label` column is used when
/// `keep_labels` is set and ignored (with a warning) otherwise.
pub fn load_input(path: &Path, keep_labels: bool) -> Result<LabeledDataset> {
    let content = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let has_label = content
        .lines()
        .next()
        .is_some_and(|header| header.trim_end_matches('\r').split('\t').any(|c| c == "label"));
    let schema = if has_label && keep_labels {
        TsvSchema::default()
    } else {
        if has_label {
            eprintln!("warning: {} has a label column; labels are ignored", path.display());
        }
        TsvSchema::default().without_label()
    };
    let ds = parse_tsv(&content, path, &schema, &LabelAliases::default())?;
    if ds.is_empty() {
        return Err(olid::Error::Dataset {
            name: ds.name,
            message: "no documents".into(),
        }
        .into());
    }
    Ok(ds)
}
