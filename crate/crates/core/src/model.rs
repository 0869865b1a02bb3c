//! Learner selection, trained models, and the versioned model file.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::corpus::Class;
use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestConfig, ForestModel};
use crate::prep::{Dataset, SelectionResult};
use crate::svm::{train_svm, SmoConfig, SvmModel};

pub const MODEL_FORMAT: &str = "expertise-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum LearnerSpec {
    Forest(ForestConfig),
    Svm(SmoConfig),
}

impl LearnerSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            LearnerSpec::Forest(_) => ModelKind::Forest,
            LearnerSpec::Svm(_) => ModelKind::Svm,
        }
    }

    /// Same learner with any randomness re-seeded from `seed`.
    pub fn reseeded(&self, seed: u64) -> LearnerSpec {
        match self {
            LearnerSpec::Forest(c) => LearnerSpec::Forest(ForestConfig {
                master_seed: seed,
                ..c.clone()
            }),
            LearnerSpec::Svm(c) => LearnerSpec::Svm(c.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Forest,
    Svm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Forest => "forest",
            ModelKind::Svm => "svm",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forest" | "rf" | "random-forest" => Ok(ModelKind::Forest),
            "svm" | "smo" => Ok(ModelKind::Svm),
            _ => Err(Error::invalid(format!("unknown learner `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Forest(ForestModel),
    Svm(SvmModel),
}

/// A hard label plus the learner's score: the Expert vote fraction for a
/// forest, the signed decision value for an SVM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Class,
    pub score: f64,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Forest(_) => ModelKind::Forest,
            TrainedModel::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedModel::Forest(m) => &m.feature_names,
            TrainedModel::Svm(m) => &m.feature_names,
        }
    }

    pub fn predict(&self, row: &[Option<f64>]) -> Result<Prediction> {
        match self {
            TrainedModel::Forest(m) => {
                let p = m.predict(row)?;
                Ok(Prediction {
                    label: p.label,
                    score: p.expert_fraction,
                })
            }
            TrainedModel::Svm(m) => {
                let f = m.decision_value(row)?;
                Ok(Prediction {
                    label: if f > 0.0 {
                        Class::Expert
                    } else {
                        Class::Novice
                    },
                    score: f,
                })
            }
        }
    }

    /// Predictions for every row; the dataset must use the model's schema.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<Prediction>> {
        if d.feature_names != self.feature_names() {
            return Err(Error::invalid(format!(
                "dataset features [{}] differ from the model's [{}]",
                d.feature_names.join(","),
                self.feature_names().join(",")
            )));
        }
        d.rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Score threshold above which the accumulated label is Expert.
    pub fn score_threshold(&self) -> f64 {
        match self {
            TrainedModel::Forest(_) => 0.5,
            TrainedModel::Svm(_) => 0.0,
        }
    }
}

pub fn train_model(spec: &LearnerSpec, d: &Dataset) -> Result<TrainedModel> {
    match spec {
        LearnerSpec::Forest(c) => Ok(TrainedModel::Forest(train_forest(d, c)?)),
        LearnerSpec::Svm(c) => Ok(TrainedModel::Svm(train_svm(d, c)?)),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the model's canonical JSON encoding.
pub fn model_digest(model: &TrainedModel) -> String {
    sha256_hex(
        serde_json::to_string(model)
            .expect("models serialize")
            .as_bytes(),
    )
}

/// On-disk model: a self-describing, digest-protected JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub feature_schema: Vec<String>,
    pub feature_set: String,
    pub payload: Value,
    pub selection: Option<SelectionResult>,
    pub config_echo: BTreeMap<String, String>,
    pub digest: String,
}

fn body_digest(body: &Value) -> String {
    let mut v = body.clone();
    if let Value::Object(map) = &mut v {
        map.remove("digest");
    }
    sha256_hex(
        serde_json::to_string(&v)
            .expect("json values serialize")
            .as_bytes(),
    )
}

impl ModelFile {
    pub fn new(
        model: &TrainedModel,
        feature_set: &str,
        selection: Option<SelectionResult>,
        config_echo: BTreeMap<String, String>,
    ) -> Result<ModelFile> {
        let payload = match model {
            TrainedModel::Forest(m) => serde_json::to_value(m)?,
            TrainedModel::Svm(m) => serde_json::to_value(m)?,
        };
        let mut file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: model.kind(),
            feature_schema: model.feature_names().to_vec(),
            feature_set: feature_set.into(),
            payload,
            selection,
            config_echo,
            digest: String::new(),
        };
        file.digest = body_digest(&serde_json::to_value(&file)?);
        Ok(file)
    }

    pub fn model(&self) -> Result<TrainedModel> {
        let model = match self.kind {
            ModelKind::Forest => {
                TrainedModel::Forest(serde_json::from_value(self.payload.clone())?)
            }
            ModelKind::Svm => TrainedModel::Svm(serde_json::from_value(self.payload.clone())?),
        };
        if model.feature_names() != self.feature_schema {
            return Err(Error::ModelFile(
                "payload features differ from the declared schema".into(),
            ));
        }
        Ok(model)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a model file, checking format, version and digest before the
    /// payload is interpreted.
    pub fn read<R: Read>(reader: R) -> Result<ModelFile> {
        let value: Value = serde_json::from_reader(reader)
            .map_err(|e| Error::ModelFile(format!("not a JSON document: {e}")))?;
        let format = value.get("format").and_then(Value::as_str);
        if format != Some(MODEL_FORMAT) {
            return Err(Error::ModelFile(format!("unexpected format {format:?}")));
        }
        match value.get("version").and_then(Value::as_u64) {
            Some(v) if v == MODEL_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::ModelFile(format!(
                    "unsupported model file version {v}"
                )))
            }
            None => return Err(Error::ModelFile("missing version".into())),
        }
        let stored = value
            .get("digest")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::ModelFile("missing digest".into()))?
            .to_string();
        let computed = body_digest(&value);
        if stored != computed {
            return Err(Error::ModelFile(format!(
                "digest mismatch: file says {stored}, content hashes to {computed}"
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::ModelFile(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let rows: Vec<Vec<Option<f64>>> = (0..12).map(|i| vec![Some(i as f64), None]).collect();
        let labels = (0..12)
            .map(|i| if i < 6 { Class::Novice } else { Class::Expert })
            .collect();
        Dataset::new(
            vec!["a".into(), "b".into()],
            rows,
            labels,
            (0..12).map(|i| i.to_string()).collect(),
        )
        .map(|mut d| {
            d.rows[0][1] = Some(1.0);
            d
        })
        .unwrap()
    }

    #[test]
    fn model_file_round_trips_and_detects_tampering() {
        let d = tiny();
        for spec in [
            LearnerSpec::Forest(ForestConfig {
                n_trees: 7,
                ..Default::default()
            }),
            LearnerSpec::Svm(SmoConfig::default()),
        ] {
            let model = train_model(&spec, &d).unwrap();
            let file = ModelFile::new(&model, "All", None, BTreeMap::new()).unwrap();
            let mut buf = Vec::new();
            file.write(&mut buf).unwrap();
            let back = ModelFile::read(buf.as_slice()).unwrap();
            assert_eq!(back.model().unwrap(), model);
            assert_eq!(
                back.model().unwrap().predict_dataset(&d).unwrap(),
                model.predict_dataset(&d).unwrap()
            );

            let text = String::from_utf8(buf).unwrap();
            let tampered = text.replacen("\"All\"", "\"Global\"", 1);
            assert!(matches!(
                ModelFile::read(tampered.as_bytes()),
                Err(Error::ModelFile(_))
            ));
            let future = text.replacen("\"version\": 1", "\"version\": 2", 1);
            match ModelFile::read(future.as_bytes()) {
                Err(Error::ModelFile(m)) => assert!(m.contains("version 2")),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn digest_is_stable() {
        let d = tiny();
        let spec = LearnerSpec::Forest(ForestConfig {
            n_trees: 5,
            ..Default::default()
        });
        let a = model_digest(&train_model(&spec, &d).unwrap());
        let b = model_digest(&train_model(&spec, &d).unwrap());
        assert_eq!(a, b);
        assert_ne!(
            a,
            model_digest(&train_model(&spec.reseeded(1), &d).unwrap())
        );
    }
}
