//! Versioned JSON documents for trained models.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::ForestModel;
use crate::trees::{Prediction, TreeError, TreeModel};

pub const FORMAT_NAME: &str = "strokeclass-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write model {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("model document is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("not a {FORMAT_NAME} document (format {0:?})")]
    WrongFormat(String),
    #[error("unsupported model version {0}, this build reads version {FORMAT_VERSION}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: Model,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Tree(t) => &t.feature_names,
            Model::Forest(f) => &f.feature_names,
        }
    }

    pub fn class_names(&self) -> &[String] {
        match self {
            Model::Tree(t) => &t.class_names,
            Model::Forest(f) => &f.class_names,
        }
    }

    /// Label plus per-class scores: leaf frequencies for a tree, vote
    /// fractions for a forest.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, TreeError> {
        match self {
            Model::Tree(t) => t.predict(x),
            Model::Forest(f) => f.predict(x),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Model::Tree(t) => format!(
                "{} tree, {} nodes, depth {}",
                t.params.criterion,
                t.root.count_nodes(),
                t.root.depth()
            ),
            Model::Forest(f) => format!("random forest, {} trees", f.trees.len()),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = Document {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            model: self.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("models serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        let header: Header = serde_json::from_str(text)?;
        if header.format != FORMAT_NAME {
            return Err(ModelError::WrongFormat(header.format));
        }
        if header.version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(header.version));
        }
        let doc: Document = serde_json::from_str(text)?;
        Ok(doc.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ModelError::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Model::from_json(&text)
    }
}

impl From<TreeModel> for Model {
    fn from(t: TreeModel) -> Self {
        Model::Tree(t)
    }
}

impl From<ForestModel> for Model {
    fn from(f: ForestModel) -> Self {
        Model::Forest(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::forest::{fit_forest, ForestParams};
    use crate::trees::{fit_cart, fit_id3, TreeParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let labels = rows.iter().map(|r: &Vec<f64>| usize::from(r[0] * r[1] > 0.0) + usize::from(r[2] > 1.0)).collect();
        Dataset::new(
            (0..4).map(|i| format!("f{i}")).collect(),
            vec!["a".into(), "b".into(), "c".into()],
            rows,
            labels,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let ds = data();
        let models: Vec<Model> = vec![
            fit_cart(&ds, &TreeParams::default()).unwrap().into(),
            fit_id3(&ds, &TreeParams::default()).unwrap().into(),
            fit_forest(&ds, &ForestParams { n_trees: 7, seed: 3, ..Default::default() }).unwrap().into(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in models {
            let back = Model::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_json(), m.to_json());
            for _ in 0..50 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-4.0..4.0)).collect();
                assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
            }
        }
    }

    #[test]
    fn header_is_checked() {
        let ds = data();
        let json = Model::from(fit_cart(&ds, &TreeParams::default()).unwrap()).to_json();
        assert!(json.contains("\"format\": \"strokeclass-model\""));
        assert!(json.contains("\"algorithm\": \"tree\""));
        let other = json.replacen("strokeclass-model", "something-else", 1);
        assert!(matches!(Model::from_json(&other), Err(ModelError::WrongFormat(_))));
        let newer = json.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(Model::from_json(&newer), Err(ModelError::UnsupportedVersion(2))));
        assert!(matches!(Model::from_json("{"), Err(ModelError::Parse(_))));
    }
}
