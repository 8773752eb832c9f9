//! Bag-of-words baselines: multinomial naive Bayes, a linear SVM trained by
//! SGD on the hinge loss, and a random forest of CART trees.

mod forest;
mod mnb;
mod persist;
mod svm;

pub use forest::{predict_rf, train_random_forest, DecisionTree, ForestParams, MaxFeatures, Node, RfModel};
pub use mnb::{predict_mnb, train_mnb, MnbModel};
pub use persist::ClassicalModel;
pub use svm::{predict_svm, train_svm_sgd, SvmHyper, SvmModel};

use crate::corpus::BinaryLabel;
use crate::error::{Error, Result};
use crate::features::SparseCountVector;

/// Shared preconditions: equal non-zero lengths, one dimension, both classes.
/// Returns the feature dimension.
fn check_training_set(x: &[SparseCountVector], y: &[BinaryLabel]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} vectors but {} labels", x.len(), y.len())));
    }
    let Some(first) = x.first() else {
        return Err(Error::InvalidArgument("empty training set".into()));
    };
    let dimension = first.dimension();
    for v in x {
        v.check_dimension(dimension)?;
    }
    for label in BinaryLabel::ALL {
        if !y.contains(&label) {
            return Err(Error::InvalidArgument(format!("training set has no {label} examples")));
        }
    }
    Ok(dimension)
}
