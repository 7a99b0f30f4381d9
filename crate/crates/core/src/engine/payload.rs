use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMask, RegressionProblem};
use crate::model::ModelWithQuality;
use crate::osga::RunResult;

/// Closed registry of message types a port can carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadKind {
    FeatureCount,
    FeatureMask,
    RegressionProblem,
    ModelWithQuality,
    ParameterVector,
    ScalarQuality,
    SearchResult,
}

impl PayloadKind {
    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::FeatureCount => "feature-count",
            PayloadKind::FeatureMask => "feature-mask",
            PayloadKind::RegressionProblem => "regression-problem",
            PayloadKind::ModelWithQuality => "model-with-quality",
            PayloadKind::ParameterVector => "parameter-vector",
            PayloadKind::ScalarQuality => "scalar-quality",
            PayloadKind::SearchResult => "search-result",
        }
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Payload {
    FeatureCount(usize),
    FeatureMask(FeatureMask),
    RegressionProblem(Box<RegressionProblem>),
    ModelWithQuality(Box<ModelWithQuality>),
    ParameterVector(Vec<f64>),
    ScalarQuality(f64),
    SearchResult(Box<RunResult<FeatureMask>>),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::FeatureCount(_) => PayloadKind::FeatureCount,
            Payload::FeatureMask(_) => PayloadKind::FeatureMask,
            Payload::RegressionProblem(_) => PayloadKind::RegressionProblem,
            Payload::ModelWithQuality(_) => PayloadKind::ModelWithQuality,
            Payload::ParameterVector(_) => PayloadKind::ParameterVector,
            Payload::ScalarQuality(_) => PayloadKind::ScalarQuality,
            Payload::SearchResult(_) => PayloadKind::SearchResult,
        }
    }
}
