//! Bagged MLP ensembles over SRS or RSS training samples.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::mlp::{self, argmax_rows, MlpConfig, MlpModel};
use crate::numerics::rng::purpose;
use crate::numerics::{Matrix, RngStream};
use crate::sampling::{build_plan, fit_score_function, SamplerConfig, SamplingPlan};

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    Vote,
    Mean,
}

impl std::str::FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vote" => Ok(FusionRule::Vote),
            "mean" => Ok(FusionRule::Mean),
            other => Err(Error::invalid(format!("unknown fusion {other:?} (expected vote|mean)"))),
        }
    }
}

impl std::fmt::Display for FusionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionRule::Vote => "vote",
            FusionRule::Mean => "mean",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_models: usize,
    pub sampler: SamplerConfig,
    /// `input_dim` and `output_dim` are overwritten from the training data.
    pub mlp: MlpConfig,
    pub loss: LossKind,
    pub fusion: FusionRule,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: EnsembleConfig,
    /// SHA-256 over every base classifier's sampled indices.
    pub plans_digest: String,
    pub class_names: Option<Vec<String>>,
    pub standardizer: Option<Standardizer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    models: Vec<MlpModel>,
    fusion: FusionRule,
    provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedPrediction {
    pub labels: Vec<usize>,
    /// Averaged raw scores, for mean fusion only.
    pub scores: Option<Matrix>,
}

fn digest_plans(plans: &[SamplingPlan]) -> String {
    let mut h = Sha256::new();
    for p in plans {
        h.update((p.classifier_id as u64).to_le_bytes());
        for &i in &p.indices {
            h.update((i as u64).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Train one base classifier per id on its own sampled subset. Workers only
/// affect scheduling; results are gathered by classifier id.
pub fn train_ensemble_with_workers(
    config: &EnsembleConfig,
    train: &Dataset,
    workers: usize,
) -> Result<EnsembleModel> {
    if config.n_models == 0 {
        return Err(Error::invalid("ensemble needs T >= 1"));
    }
    config.sampler.resolve(train.len())?;
    let score = fit_score_function(train)?;
    let mut mlp_cfg = config.mlp.clone();
    mlp_cfg.input_dim = train.dim();
    mlp_cfg.output_dim = train.n_classes();
    mlp_cfg.seed = config.seed;
    mlp_cfg.validate()?;

    let train_root = RngStream::new(config.seed, purpose::TRAINING);
    let fit_one = |t: usize| -> Result<(SamplingPlan, MlpModel)> {
        let annotate = |e: Error| Error::Classifier {
            id: t,
            source: Box::new(e),
        };
        let plan = build_plan(&config.sampler, train, &score, t).map_err(annotate)?;
        let sample = train.subset(&plan.indices);
        let mut rng = train_root.derive(t as u64);
        let (model, _) = mlp::train(&mlp_cfg, sample.features(), sample.labels(), config.loss, &mut rng)
            .map_err(annotate)?;
        Ok((plan, model))
    };

    let results: Vec<Result<(SamplingPlan, MlpModel)>> = if workers <= 1 {
        (0..config.n_models).map(fit_one).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| (0..config.n_models).into_par_iter().map(fit_one).collect())
    };
    let (plans, models): (Vec<_>, Vec<_>) = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();

    Ok(EnsembleModel {
        models,
        fusion: config.fusion,
        provenance: Provenance {
            config: config.clone(),
            plans_digest: digest_plans(&plans),
            class_names: train.class_names().map(<[String]>::to_vec),
            standardizer: None,
        },
    })
}

pub fn train_ensemble(config: &EnsembleConfig, train: &Dataset) -> Result<EnsembleModel> {
    train_ensemble_with_workers(config, train, 1)
}

/// Plurality vote over per-model labels; ties go to the lowest class id.
pub fn fuse_votes(votes: &[Vec<usize>], n_classes: usize) -> Vec<usize> {
    let n = votes.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let mut counts = vec![0usize; n_classes];
            for v in votes {
                counts[v[i]] += 1;
            }
            let mut best = 0;
            for (c, &k) in counts.iter().enumerate().skip(1) {
                if k > counts[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Element-wise mean of equally shaped score matrices.
pub fn fuse_mean(scores: &[Matrix]) -> Result<Matrix> {
    let first = scores.first().ok_or_else(|| Error::invalid("no scores to average"))?;
    let mut acc = Matrix::zeros(first.rows(), first.cols());
    for s in scores {
        if s.shape() != first.shape() {
            return Err(Error::dims("fuse_mean", format!("{:?}", first.shape()), format!("{:?}", s.shape())));
        }
        for (a, v) in acc.as_mut_slice().iter_mut().zip(s.as_slice()) {
            *a += v;
        }
    }
    acc.scale(1.0 / scores.len() as f64);
    Ok(acc)
}

impl EnsembleModel {
    pub fn from_parts(models: Vec<MlpModel>, fusion: FusionRule, provenance: Provenance) -> Result<Self> {
        let first = models.first().ok_or_else(|| Error::invalid("ensemble needs T >= 1"))?;
        let dims = (first.input_dim(), first.output_dim());
        if models.iter().any(|m| (m.input_dim(), m.output_dim()) != dims) {
            return Err(Error::invalid("base models disagree on (d, C)"));
        }
        Ok(EnsembleModel {
            models,
            fusion,
            provenance,
        })
    }

    pub fn models(&self) -> &[MlpModel] {
        &self.models
    }

    pub fn fusion(&self) -> FusionRule {
        self.fusion
    }

    pub fn with_fusion(mut self, fusion: FusionRule) -> Self {
        self.fusion = fusion;
        self
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn set_standardizer(&mut self, st: Standardizer) {
        self.provenance.standardizer = Some(st);
    }

    pub fn input_dim(&self) -> usize {
        self.models[0].input_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.models[0].output_dim()
    }

    pub fn fuse_predict(&self, features: &Matrix) -> Result<FusedPrediction> {
        match self.fusion {
            FusionRule::Vote => {
                let votes = self
                    .models
                    .iter()
                    .map(|m| m.predict_labels(features))
                    .collect::<Result<Vec<_>>>()?;
                Ok(FusedPrediction {
                    labels: fuse_votes(&votes, self.n_classes()),
                    scores: None,
                })
            }
            FusionRule::Mean => {
                let scores = self
                    .models
                    .iter()
                    .map(|m| m.predict_scores(features))
                    .collect::<Result<Vec<_>>>()?;
                let mean = fuse_mean(&scores)?;
                Ok(FusedPrediction {
                    labels: argmax_rows(&mean),
                    scores: Some(mean),
                })
            }
        }
    }

    /// Write `manifest.json` plus `model_NNN.json` per base classifier.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.models.len());
        for (t, m) in self.models.iter().enumerate() {
            let name = format!("model_{t:03}.json");
            fs::write(dir.join(&name), m.to_json()?)?;
            files.push(name);
        }
        let manifest = EnsembleManifest {
            version: ENSEMBLE_FORMAT_VERSION,
            fusion: self.fusion,
            n_models: self.models.len(),
            models: files,
            provenance: self.provenance.clone(),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<EnsembleModel> {
        let dir = dir.as_ref();
        let manifest: EnsembleManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::Version(manifest.version));
        }
        if manifest.models.len() != manifest.n_models {
            return Err(Error::dims("ensemble manifest", manifest.n_models, manifest.models.len()));
        }
        let models = manifest
            .models
            .iter()
            .map(|f| MlpModel::from_json(&fs::read_to_string(dir.join(f))?))
            .collect::<Result<Vec<_>>>()?;
        EnsembleModel::from_parts(models, manifest.fusion, manifest.provenance)
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    version: u32,
    fusion: FusionRule,
    n_models: usize,
    models: Vec<String>,
    provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plurality() {
        assert_eq!(fuse_votes(&[vec![1], vec![1], vec![0]], 2), vec![1]);
        assert_eq!(fuse_votes(&[vec![0], vec![1]], 2), vec![0]);
        assert_eq!(fuse_votes(&[vec![2], vec![1]], 3), vec![1]);
    }

    #[test]
    fn mean_scores() {
        let a = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0, 2.0]]).unwrap();
        let m = fuse_mean(&[a, b]).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 1.0]);
        assert_eq!(argmax_rows(&m), vec![1]);
    }

    #[test]
    fn mean_shape_mismatch() {
        assert!(fuse_mean(&[Matrix::zeros(1, 2), Matrix::zeros(2, 2)]).is_err());
        assert!(fuse_mean(&[]).is_err());
    }

    #[test]
    fn parse_fusion() {
        assert_eq!("vote".parse::<FusionRule>().unwrap(), FusionRule::Vote);
        assert!("max".parse::<FusionRule>().is_err());
    }
}
