//! Goal-structuring-notation export of a verdict.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bounds::{Outcome, RiskBound, Verdict};
use crate::error::{Error, Result};
use crate::intervals::{ConfidenceStatement, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Goal,
    Strategy,
    Solution,
    Context,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Goal => "goal",
            NodeKind::Strategy => "strategy",
            NodeKind::Solution => "solution",
            NodeKind::Context => "context",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentNode {
    pub id: String,
    pub kind: NodeKind,
    pub statement: String,
    #[serde(default)]
    pub children: Vec<ArgumentNode>,
}

impl ArgumentNode {
    fn new(id: impl Into<String>, kind: NodeKind, statement: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            statement: statement.into(),
            children: Vec::new(),
        }
    }

    fn with(mut self, children: Vec<ArgumentNode>) -> Self {
        self.children = children;
        self
    }

    /// Depth-first, pre-order.
    pub fn walk(&self) -> Vec<&ArgumentNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.walk().iter().filter(|n| n.kind == kind).count()
    }

    /// Unique ids, solutions are leaves.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for n in self.walk() {
            if !seen.insert(n.id.as_str()) {
                return Err(Error::MalformedTree(format!("duplicate id `{}`", n.id)));
            }
            if n.kind == NodeKind::Solution && !n.children.is_empty() {
                return Err(Error::MalformedTree(format!(
                    "solution `{}` has children",
                    n.id
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let node: Self =
            serde_json::from_str(text).map_err(|e| Error::MalformedTree(e.to_string()))?;
        node.validate()?;
        Ok(node)
    }

    /// Indented plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        let _ = writeln!(
            out,
            "{}[{}] {}: {}",
            "  ".repeat(depth),
            self.id,
            self.kind.as_str(),
            self.statement
        );
        for c in &self.children {
            c.render_into(out, depth + 1);
        }
    }
}

fn fmt_conf(c: f64) -> String {
    // confidences like 1 - (0.08 + 0.02) print as 0.9, not 0.9000000000000001
    format!("{}", (c * 1e10).round() / 1e10)
}

fn statement_goal(s: &ConfidenceStatement) -> String {
    let op = match s.direction() {
        Direction::Upper => "<=",
        Direction::Lower => ">=",
    };
    format!(
        "{} {} {} with confidence >= {}",
        s.parameter(),
        op,
        s.bound(),
        fmt_conf(s.confidence())
    )
}

fn solution_for(s: &ConfidenceStatement) -> String {
    let family = match s.kind() {
        crate::intervals::ParameterKind::Probability => "binomial",
        crate::intervals::ParameterKind::Rate => "Poisson",
    };
    format!(
        "exact one-sided {family} {} confidence bound at alpha = {}",
        s.direction(),
        s.alpha()
    )
}

fn subgoal(id: &str, title: &str, statements: &[ConfidenceStatement]) -> ArgumentNode {
    if let [only] = statements {
        return ArgumentNode::new(id, NodeKind::Goal, statement_goal(only)).with(vec![
            ArgumentNode::new(
                format!("Sn{}", &id[1..]),
                NodeKind::Solution,
                solution_for(only),
            ),
        ]);
    }
    let solutions = statements
        .iter()
        .enumerate()
        .map(|(i, s)| {
            ArgumentNode::new(
                format!("Sn{}.{}", &id[1..], i + 1),
                NodeKind::Solution,
                format!(
                    "frame {}: {}; {}",
                    i + 1,
                    statement_goal(s),
                    solution_for(s)
                ),
            )
        })
        .collect();
    ArgumentNode::new(
        id,
        NodeKind::Goal,
        format!(
            "{title}: all {} per-frame statements hold",
            statements.len()
        ),
    )
    .with(solutions)
}

fn contexts(bound: &RiskBound) -> Vec<ArgumentNode> {
    bound
        .assumptions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            ArgumentNode::new(
                format!("C{}", i + 1),
                NodeKind::Context,
                format!("assumption {}: {}", a.as_str(), a.describe()),
            )
        })
        .collect()
}

fn strategy(bound: &RiskBound) -> ArgumentNode {
    let decomposition = match bound.direction {
        Direction::Upper => {
            "E[C] = P(V_h > 0) E[M] <= min_j P(D_j > c) E[M]: a collision needs every update in the buffer to miss"
        }
        Direction::Lower => {
            "E[C] = P(V_h > 0) E[M] >= prod_j P(D_j > c) E[M]: with independent errors every update must miss"
        }
    };
    ArgumentNode::new(
        "S1",
        NodeKind::Strategy,
        format!(
            "{decomposition}; confidences combined by the {} rule, joint confidence {}",
            bound.combination,
            fmt_conf(bound.confidence)
        ),
    )
    .with(vec![
        subgoal("G1.1", "obstacle rate", &bound.provenance.rate),
        subgoal("G1.2", "miss probability", &bound.provenance.miss),
    ])
}

/// Builds the argument tree for a verdict.
pub fn render_gsn(verdict: &Verdict) -> ArgumentNode {
    let eps = verdict.target.epsilon;
    let conf = fmt_conf(verdict.target.confidence());
    match (&verdict.outcome, &verdict.binding_bound) {
        (Outcome::Safe, Some(b)) => {
            let mut children = contexts(b);
            children.push(strategy(b));
            ArgumentNode::new(
                "G1",
                NodeKind::Goal,
                format!(
                    "expected collisions per km <= {eps} with confidence >= {conf} (bound {} per km)",
                    b.value
                ),
            )
            .with(children)
        }
        (Outcome::Unsafe, Some(b)) => {
            let mut children = contexts(b);
            children.push(strategy(b));
            ArgumentNode::new(
                "G1",
                NodeKind::Goal,
                format!(
                    "NOT(expected collisions per km <= {eps}): it exceeds {eps} with confidence >= {conf} (bound {} per km)",
                    b.value
                ),
            )
            .with(children)
        }
        (_, binding) => {
            let mut children = Vec::new();
            if let Some(b) = binding {
                children.push(ArgumentNode::new(
                    "C1",
                    NodeKind::Context,
                    format!(
                        "best available {} bound {} per km at confidence {}",
                        b.direction,
                        b.value,
                        fmt_conf(b.confidence)
                    ),
                ));
            }
            ArgumentNode::new(
                "G1",
                NodeKind::Goal,
                format!(
                    "expected collisions per km <= {eps} with confidence >= {conf} (undeveloped)"
                ),
            )
            .with(children)
        }
    }
}
