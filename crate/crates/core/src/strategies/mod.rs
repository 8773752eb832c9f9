//! Cross-lingual transfer, self-ensembles (vote mode or probability
//! average), MLM-before-fine-tuning schedules, and checkpoint persistence.

mod checkpoint;
mod ensemble;
mod recipe;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, transfer_init, Checkpoint, Provenance, StrategyTag, ENCODER_KIND,
};
pub use ensemble::{
    ase_average, load_ensemble, mse_vote, predict_ase, predict_mse, save_ensemble, train_ensemble, Aggregation,
    EnsembleModel, ENSEMBLE_FILE,
};
pub use recipe::{
    run_recipe, train_from_scratch, Recipe, RecipeData, RecipeOutput, RecipePlan, RecipeRun, TransferSource,
};

#[cfg(test)]
mod tests;
