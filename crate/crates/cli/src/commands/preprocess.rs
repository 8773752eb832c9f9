use std::path::PathBuf;

use anyhow::Result;
use olid::corpus::write_tsv;
use olid::textprep::{preprocess, ClassicalOptions, EmojiTable, Regime};

pub struct PreprocessArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub regime: Regime,
    pub keep_case: bool,
}

pub fn run(args: &PreprocessArgs) -> Result<()> {
    let ds = super::load_input(&args.input, true)?;
    let table = EmojiTable::bundled();
    let options = ClassicalOptions {
        lowercase_ascii: !args.keep_case,
    };
    let out = ds.map_text(|t| preprocess(t, args.regime, table, options));
    write_tsv(&out, &args.output)?;
    eprintln!("{} documents written to {}", out.len(), args.output.display());
    Ok(())
}
