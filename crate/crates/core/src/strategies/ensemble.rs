use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;
use crate::distribution::ProbabilityDistribution;
use crate::error::{Error, Result};
use crate::textprep::TokenIdSequence;

use super::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// Mode of the member votes.
    #[serde(rename = "MSE")]
    Mse,
    /// Mean of the member probabilities.
    #[serde(rename = "ASE")]
    Ase,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mse => "MSE",
            Aggregation::Ase => "ASE",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MSE" => Ok(Aggregation::Mse),
            "ASE" => Ok(Aggregation::Ase),
            _ => Err(Error::InvalidArgument(format!("unknown aggregation {s:?}; expected MSE or ASE"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<Checkpoint>,
    pub aggregation: Aggregation,
}

impl EnsembleModel {
    /// Members must share configuration and tokenizer.
    pub fn new(members: Vec<Checkpoint>, aggregation: Aggregation) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidArgument("an ensemble needs at least one member".into()));
        };
        for m in &members[1..] {
            if m.vocab_fingerprint != first.vocab_fingerprint {
                return Err(Error::FingerprintMismatch {
                    expected: first.vocab_fingerprint.clone(),
                    found: m.vocab_fingerprint.clone(),
                });
            }
            if m.config() != first.config() {
                return Err(Error::InvalidArgument("ensemble members have different encoder configurations".into()));
            }
        }
        Ok(EnsembleModel { members, aggregation })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn vocab_fingerprint(&self) -> &str {
        &self.members[0].vocab_fingerprint
    }

    pub fn max_len(&self) -> usize {
        self.members[0].config().max_len
    }

    pub fn member_distributions(&self, ids: &TokenIdSequence) -> Result<Vec<ProbabilityDistribution>> {
        self.members.iter().map(|m| m.predict_proba(ids)).collect()
    }

    /// Label under the configured aggregation, plus the averaged
    /// distribution for ASE.
    pub fn predict(&self, ids: &TokenIdSequence) -> Result<(BinaryLabel, Option<ProbabilityDistribution>)> {
        let dists = self.member_distributions(ids)?;
        Ok(match self.aggregation {
            Aggregation::Mse => (mse_vote(&dists)?, None),
            Aggregation::Ase => {
                let p = ase_average(&dists)?;
                (p.argmax(), Some(p))
            }
        })
    }
}

fn require_members(dists: &[ProbabilityDistribution]) -> Result<()> {
    if dists.is_empty() {
        return Err(Error::InvalidArgument("no member predictions to aggregate".into()));
    }
    Ok(())
}

/// Mode of the member argmax votes. A tied vote goes to the class with the
/// higher mean probability, then to the lower class index.
pub fn mse_vote(dists: &[ProbabilityDistribution]) -> Result<BinaryLabel> {
    require_members(dists)?;
    let mut votes = [0usize; BinaryLabel::COUNT];
    for d in dists {
        votes[d.argmax().index()] += 1;
    }
    Ok(match votes[1].cmp(&votes[0]) {
        std::cmp::Ordering::Greater => BinaryLabel::Off,
        std::cmp::Ordering::Less => BinaryLabel::Not,
        std::cmp::Ordering::Equal => ProbabilityDistribution::mean(dists).argmax(),
    })
}

/// Per-class mean of the member distributions.
pub fn ase_average(dists: &[ProbabilityDistribution]) -> Result<ProbabilityDistribution> {
    require_members(dists)?;
    Ok(ProbabilityDistribution::mean(dists))
}

pub fn predict_mse(e: &EnsembleModel, ids: &TokenIdSequence) -> Result<BinaryLabel> {
    mse_vote(&e.member_distributions(ids)?)
}

pub fn predict_ase(e: &EnsembleModel, ids: &TokenIdSequence) -> Result<(ProbabilityDistribution, BinaryLabel)> {
    let p = ase_average(&e.member_distributions(ids)?)?;
    Ok((p, p.argmax()))
}

/// Train one member per seed, possibly in parallel. Results are returned in
/// seed order and do not depend on scheduling. Duplicate seeds produce a
/// warning, not an error.
pub fn train_ensemble<F>(seeds: &[u64], train_member: F) -> Result<(Vec<Checkpoint>, Vec<String>)>
where
    F: Fn(usize, u64) -> Result<Checkpoint> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("an ensemble needs at least one seed".into()));
    }
    let mut warnings = Vec::new();
    let distinct: BTreeSet<u64> = seeds.iter().copied().collect();
    if distinct.len() != seeds.len() {
        warnings.push(format!("duplicate ensemble seeds {seeds:?}; some members will be identical"));
    }
    let results: Vec<Result<Checkpoint>> = seeds.par_iter().enumerate().map(|(k, &s)| train_member(k, s)).collect();
    let members = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((members, warnings))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleManifest {
    version: u32,
    aggregation: Aggregation,
    members: Vec<String>,
}

pub const ENSEMBLE_FILE: &str = "ensemble.json";

/// `member_<k>.ckpt` files plus an `ensemble.json` index.
pub fn save_ensemble(e: &EnsembleModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut names = Vec::with_capacity(e.len());
    for (k, m) in e.members.iter().enumerate() {
        let name = format!("member_{k}.ckpt");
        save_checkpoint(m, dir.join(&name))?;
        names.push(name);
    }
    let manifest = EnsembleManifest {
        version: 1,
        aggregation: e.aggregation,
        members: names,
    };
    let path = dir.join(ENSEMBLE_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|err| Error::io(path, err))
}

pub fn load_ensemble(dir: impl AsRef<Path>) -> Result<EnsembleModel> {
    let dir = dir.as_ref();
    let path = dir.join(ENSEMBLE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: EnsembleManifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if manifest.version != 1 {
        return Err(Error::Checkpoint(format!("unsupported ensemble version {}", manifest.version)));
    }
    let members = manifest
        .members
        .iter()
        .map(|name| load_checkpoint(dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(members, manifest.aggregation)
}
