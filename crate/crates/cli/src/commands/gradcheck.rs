use anyhow::{bail, Result};
use olid::encoder::{grad_check, tiny_config};

use crate::exit::NumericalFailure;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;

pub fn run(seed: u64, tolerance: f64) -> Result<()> {
    let report = grad_check(&tiny_config(), seed)?;
    println!(
        "seed {seed}: max relative error {:.3e} over {} parameters (worst tensor {})",
        report.max_relative_error, report.parameters_checked, report.worst_tensor
    );
    if !(report.max_relative_error < tolerance) {
        bail!(NumericalFailure(format!(
            "gradient check failed: {:.3e} is not below {tolerance:e}",
            report.max_relative_error
        )));
    }
    Ok(())
}
