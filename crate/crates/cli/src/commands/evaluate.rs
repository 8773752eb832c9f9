use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use super::train::{display_name, render_report_text, report_for};
use crate::artifacts::{write_text, LoadedModel};
use olid::metrics::{render_report, ReportFormat};

pub struct EvaluateArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub vocab: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub json: bool,
}

/// Score a saved model or ensemble on a labeled file. The report goes to
/// stdout and to `evaluation.{json,txt}` in the output directory (by default
/// the model's directory).
pub fn run(args: &EvaluateArgs) -> Result<()> {
    let model = LoadedModel::load(&args.model, args.vocab.as_deref())
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let ds = super::load_input(&args.data, true)?;
    let preds = model.predict_all(&ds)?;
    let report = report_for(&ds, &preds)?;
    let name = display_name(&model);
    let json = render_report(&report, ReportFormat::Json);
    let text = render_report_text(&name, &report);

    let dir = match &args.output_dir {
        Some(d) => d.clone(),
        None if args.model.is_dir() => args.model.clone(),
        None => args.model.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_text(&dir.join("evaluation.json"), &json)?;
    write_text(&dir.join("evaluation.txt"), &text)?;
    print!("{}", if args.json { json } else { text });
    Ok(())
}
