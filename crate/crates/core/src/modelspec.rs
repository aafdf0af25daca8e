//! Model sources: JSON spec files and `registry:<name>?k=v&…` addresses.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cases::{self, CaseModel, Truth};
use crate::discrete::TransitionMatrix;
use crate::error::{Error, Result};
use crate::measures::{DensitySpec, DiscreteModel, GeneralModel, StructureHints, SupportDescriptor};

/// A model spec file.
///
/// ```json
/// {"type": "discrete", "target": [0.5, 0.5], "proposal": [0.25, 0.75]}
/// {"type": "general",
///  "target": {"family": "exponential", "rate": 1.0},
///  "proposal": {"family": "exponential", "rate": 0.5},
///  "support": {"kind": "interval", "lower": 0.0, "upper": null},
///  "hints": {"weight_monotone": "decreasing"}}
/// {"type": "chain", "matrix": [[0.5, 0.5], [0.5, 0.5]], "stationary": [0.5, 0.5]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Discrete {
        target: Vec<f64>,
        proposal: Vec<f64>,
        /// Rescale both vectors to sum to one.
        #[serde(default)]
        normalize: bool,
    },
    General {
        #[serde(default = "default_name")]
        name: String,
        target: DensitySpec,
        proposal: DensitySpec,
        #[serde(default)]
        support: Option<SupportDescriptor>,
        #[serde(default)]
        hints: StructureHints,
    },
    /// A finite chain that need not be an IMH kernel.
    Chain {
        matrix: Vec<Vec<f64>>,
        stationary: Vec<f64>,
    },
}

fn default_name() -> String {
    "custom".into()
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn build(&self) -> Result<CaseModel> {
        match self {
            ModelSpec::Discrete {
                target,
                proposal,
                normalize,
            } => {
                let m = if *normalize {
                    DiscreteModel::normalized(target.clone(), proposal.clone())?
                } else {
                    DiscreteModel::new(target.clone(), proposal.clone())?
                };
                Ok(CaseModel::Discrete(m))
            }
            ModelSpec::General {
                name,
                target,
                proposal,
                support,
                hints,
            } => {
                let m = GeneralModel::from_specs(name.clone(), target.clone(), proposal.clone(), support.clone())?
                    .with_hints(hints.clone())?;
                Ok(CaseModel::General(m))
            }
            ModelSpec::Chain { matrix, stationary } => {
                let kernel = TransitionMatrix::from_rows(matrix)?;
                if stationary.len() != kernel.n() {
                    return Err(Error::InvalidModel(format!(
                        "stationary vector has {} entries, matrix has {}",
                        stationary.len(),
                        kernel.n()
                    )));
                }
                let resid = kernel.stationarity_residual(stationary);
                if resid > 1e-10 {
                    return Err(Error::NotStationary(resid));
                }
                Ok(CaseModel::Chain {
                    kernel,
                    stationary: stationary.clone(),
                })
            }
        }
    }
}

/// A resolved model with whatever ground truth its source carries.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    /// The source string, used as the model id in outputs.
    pub id: String,
    pub model: CaseModel,
    pub truths: Vec<Truth>,
}

/// Split `registry:<name>?k=v&k2=v2` into its name and parameters.
pub fn parse_registry_address(source: &str) -> Result<(String, BTreeMap<String, String>)> {
    let rest = source
        .strip_prefix("registry:")
        .ok_or_else(|| Error::Spec(format!("`{source}` is not a registry address")))?;
    let (name, query) = rest.split_once('?').unwrap_or((rest, ""));
    if name.is_empty() {
        return Err(Error::Spec("registry address has no model name".into()));
    }
    let mut params = BTreeMap::new();
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Spec(format!("parameter `{pair}` is not of the form key=value")))?;
        if params.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Spec(format!("parameter `{k}` given twice")));
        }
    }
    Ok((name.to_string(), params))
}

/// Resolve a registry address or a path to a JSON spec.
pub fn load_model(source: &str) -> Result<LoadedModel> {
    if source.starts_with("registry:") {
        let (name, params) = parse_registry_address(source)?;
        let entry = cases::build(&name, &params)?;
        return Ok(LoadedModel {
            id: source.to_string(),
            model: entry.model,
            truths: entry.truths,
        });
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| Error::Spec(format!("cannot read `{source}`: {e}")))?;
    Ok(LoadedModel {
        id: source.to_string(),
        model: ModelSpec::from_json(&text)?.build()?,
        truths: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_registry_addresses() {
        let (n, p) = parse_registry_address("registry:exponential?theta=0.5").unwrap();
        assert_eq!(n, "exponential");
        assert_eq!(p["theta"], "0.5");
        let (n, p) = parse_registry_address("registry:dirichlet_multinomial?alpha=1,1&counts=3,4").unwrap();
        assert_eq!(n, "dirichlet_multinomial");
        assert_eq!(p["counts"], "3,4");
        assert!(parse_registry_address("registry:three_point").unwrap().1.is_empty());
        assert!(parse_registry_address("registry:?a=1").is_err());
        assert!(parse_registry_address("registry:x?a").is_err());
        assert!(parse_registry_address("registry:x?a=1&a=2").is_err());
    }

    #[test]
    fn loads_registry_models() {
        let m = load_model("registry:exponential?theta=0.1").unwrap();
        assert!(matches!(m.model, CaseModel::General(_)));
        assert!((m.truths.iter().find(|t| t.name == "wstar").unwrap().value - 10.0).abs() < 1e-12);
        assert!(matches!(
            load_model("registry:exponential?theta=1.5"),
            Err(Error::ThetaOutOfRange(_))
        ));
    }

    #[test]
    fn discrete_spec_round_trip() {
        let text = r#"{"type": "discrete", "target": [0.5, 0.5], "proposal": [0.25, 0.75]}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        let back = ModelSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let CaseModel::Discrete(m) = spec.build().unwrap() else {
            panic!()
        };
        assert_eq!(m.wstar(), 2.0);
    }

    #[test]
    fn general_spec_with_support_and_hints() {
        let text = r#"{
            "type": "general",
            "target": {"family": "exponential", "rate": 1.0},
            "proposal": {"family": "exponential", "rate": 0.5},
            "support": {"kind": "interval", "lower": 0.0, "upper": null},
            "hints": {"weight_monotone": "decreasing"}
        }"#;
        let CaseModel::General(m) = ModelSpec::from_json(text).unwrap().build().unwrap() else {
            panic!()
        };
        assert!((m.weight_at(&[0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(m.bounds_1d(), Some((0.0, f64::INFINITY)));
    }

    #[test]
    fn chain_spec() {
        let ok = r#"{"type": "chain", "matrix": [[0.5, 0.5], [0.5, 0.5]], "stationary": [0.5, 0.5]}"#;
        assert!(matches!(
            ModelSpec::from_json(ok).unwrap().build().unwrap(),
            CaseModel::Chain { .. }
        ));
        let bad = r#"{"type": "chain", "matrix": [[1.0, 0.0], [0.5, 0.5]], "stationary": [0.5, 0.5]}"#;
        assert!(matches!(
            ModelSpec::from_json(bad).unwrap().build(),
            Err(Error::NotStationary(_))
        ));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ModelSpec::from_json(r#"{"type": "discrete", "target": [1.0]}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"type": "cubic"}"#).is_err());
        let extra = r#"{"type": "discrete", "target": [1.0, 0.0], "proposal": [0.5, 0.5], "x": 1}"#;
        assert!(ModelSpec::from_json(extra).is_err());
        let bad = ModelSpec::from_json(r#"{"type": "discrete", "target": [0.9, 0.0], "proposal": [0.5, 0.5]}"#)
            .unwrap()
            .build();
        assert!(bad.unwrap_err().is_model_error());
        assert!(matches!(load_model("/nonexistent/model.json"), Err(Error::Spec(_))));
    }
}
