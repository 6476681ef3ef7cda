//! Rules for turning several confidence statements into a joint confidence.
//!
//! Each rule is a [`ConfidenceCombiner`]; [`CombinerRegistry`] resolves them by
//! name so the CLI and planners can pick one at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::ConfidenceStatement;

/// Joint confidence that every constituent statement holds at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfidence {
    pub confidence: f64,
    /// Set when the error budget is exhausted and the joint statement says nothing.
    pub vacuous: bool,
}

impl JointConfidence {
    fn from_total_error(total: f64) -> Self {
        if total >= 1.0 {
            Self {
                confidence: 0.0,
                vacuous: true,
            }
        } else {
            Self {
                confidence: 1.0 - total,
                vacuous: false,
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.confidence
    }
}

pub trait ConfidenceCombiner: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// One-line description used in argument trees.
    fn describe(&self) -> &'static str;

    fn joint(&self, alphas: &[f64]) -> JointConfidence;

    /// Largest per-statement alpha for the second of two statements, given
    /// the first one's alpha and a total budget.
    fn complement(&self, total: f64, first: f64) -> f64;
}

/// Bonferroni: `1 - sum(alpha_i)`, valid under any dependence.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnionRule;

impl ConfidenceCombiner for UnionRule {
    fn name(&self) -> &'static str {
        "union"
    }

    fn describe(&self) -> &'static str {
        "union bound: joint confidence 1 - sum of alphas, valid for dependent data"
    }

    fn joint(&self, alphas: &[f64]) -> JointConfidence {
        JointConfidence::from_total_error(alphas.iter().sum())
    }

    fn complement(&self, total: f64, first: f64) -> f64 {
        total - first
    }
}

/// Product rule for statements built from independent data sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndependentRule;

impl ConfidenceCombiner for IndependentRule {
    fn name(&self) -> &'static str {
        "independent"
    }

    fn describe(&self) -> &'static str {
        "independent data sets: joint confidence is the product of confidences"
    }

    fn joint(&self, alphas: &[f64]) -> JointConfidence {
        let confidence: f64 = alphas.iter().map(|a| 1.0 - a).product();
        JointConfidence {
            confidence: confidence.max(0.0),
            vacuous: confidence <= 0.0,
        }
    }

    fn complement(&self, total: f64, first: f64) -> f64 {
        // a1 + a2 - a1 a2 = total
        (total - first) / (1.0 - first)
    }
}

/// Union rule over a nonempty list of statements.
pub fn combine_union(statements: &[ConfidenceStatement]) -> Result<JointConfidence> {
    if statements.is_empty() {
        return Err(Error::InvalidEvidence("no statements to combine".into()));
    }
    let alphas: Vec<f64> = statements.iter().map(|s| s.alpha()).collect();
    Ok(UnionRule.joint(&alphas))
}

/// `(1 - a1)(1 - a2)`: the caller vouches that the data sets are independent.
pub fn combine_independent(s1: &ConfidenceStatement, s2: &ConfidenceStatement) -> JointConfidence {
    IndependentRule.joint(&[s1.alpha(), s2.alpha()])
}

#[derive(Debug, Clone)]
pub struct CombinerRegistry {
    rules: BTreeMap<&'static str, Arc<dyn ConfidenceCombiner>>,
}

impl Default for CombinerRegistry {
    fn default() -> Self {
        let mut reg = Self {
            rules: BTreeMap::new(),
        };
        reg.register(Arc::new(UnionRule));
        reg.register(Arc::new(IndependentRule));
        reg
    }
}

impl CombinerRegistry {
    pub fn register(&mut self, rule: Arc<dyn ConfidenceCombiner>) {
        self.rules.insert(rule.name(), rule);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ConfidenceCombiner>> {
        self.rules
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "combination rule",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rules.keys().copied().collect()
    }
}
