use std::path::PathBuf;

use anyhow::{Context, Result};

use crate::artifacts::{predictions_tsv, write_text, LoadedModel};

pub struct PredictArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    pub vocab: Option<PathBuf>,
}

/// One `id<TAB>label[<TAB>p_NOT<TAB>p_OFF]` row per input document, in input
/// order.
pub fn run(args: &PredictArgs) -> Result<()> {
    let model = LoadedModel::load(&args.model, args.vocab.as_deref())
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let ds = super::load_input(&args.input, false)?;
    let preds = model.predict_all(&ds)?;
    write_text(&args.output, &predictions_tsv(&ds, &preds, false))?;
    eprintln!("{} predictions written to {}", preds.len(), args.output.display());
    Ok(())
}
