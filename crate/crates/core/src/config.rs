//! Loading models and plans from TOML or JSON files (chosen by extension).

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentModel;
use crate::error::{Error, Result};
use crate::harness::ExperimentPlan;

/// A model file: `environment: {atoms: [...], capabilities: [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub environment: EnvironmentModel,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let err = |message: String| Error::Config {
        path: path.to_path_buf(),
        message,
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| err(e.to_string())),
        _ => toml::from_str(&text).map_err(|e| err(e.to_string())),
    }
}

/// Reads an environment from a model file or a plan file (both carry an
/// `environment` table).
pub fn load_model(path: &Path) -> Result<EnvironmentModel> {
    load::<ModelFile>(path).map(|f| f.environment)
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let plan: ExperimentPlan = load(path)?;
    plan.validate()?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Support;
    use crate::offspring::OffspringLaw;

    #[test]
    fn toml_model_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        fs::write(
            &path,
            r#"
[environment]
capabilities = ["A1", "A3(0.5)"]

[[environment.atoms]]
prob = 0.5
law = { family = "two_point", params = { b = 3, q = 0.5 } }

[[environment.atoms]]
prob = 0.5
law = { family = "geometric_on_one", params = { p = 0.25 } }
"#,
        )
        .unwrap();
        let model = load_model(&path).unwrap();
        let Support::Atoms(atoms) = model.support() else {
            panic!()
        };
        assert_eq!(atoms[1].law, OffspringLaw::GeometricOnOne { p: 0.25 });
        assert_eq!(model.capabilities().len(), 2);
    }

    #[test]
    fn json_model_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = EnvironmentModel::two_atom();
        fs::write(
            &path,
            serde_json::to_string(&ModelFile {
                environment: model.clone(),
            })
            .unwrap(),
        )
        .unwrap();
        assert_eq!(load_model(&path).unwrap(), model);

        let bad = dir.path().join("bad.toml");
        fs::write(&bad, "[environment]\natoms = []\n").unwrap();
        assert!(matches!(load_model(&bad), Err(Error::Config { .. })));
        assert!(matches!(
            load_model(&dir.path().join("missing.toml")),
            Err(Error::Io(_))
        ));
    }
}
