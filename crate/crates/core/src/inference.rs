//! Prediction by textual rule order, proof trees and annotated rule traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, Op, Value};
use crate::error::{Error, Result};
use crate::program::{Clause, Program};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    /// `None` when no rule applies.
    pub label: Option<String>,
    pub rule_index: Option<usize>,
}

/// What a proof-tree node evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    /// The body of rule `index`, concluding `head`.
    Rule { index: usize, head: String },
    /// `ab<id>`; its parent uses it negated.
    Abnormal { id: usize },
    /// A feature test.
    Literal {
        feature: String,
        op: Op,
        constant: Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationNode {
    pub goal: Goal,
    /// Truth of the goal itself (for an abnormal node: whether it applies).
    pub holds: bool,
    /// The example's cell, for literal nodes.
    pub observed: Option<Value>,
    pub children: Vec<JustificationNode>,
}

/// A proof tree for the firing rule, or the failed trees of every rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Justification {
    pub example: usize,
    pub target: String,
    pub prediction: Prediction,
    pub roots: Vec<JustificationNode>,
    /// Feature name and raw value of every feature the tree consults,
    /// sorted by name.
    pub bindings: Vec<(String, Value)>,
}

fn check_row(program: &Program, row: &[Value]) -> Result<()> {
    if row.len() != program.schema.len() {
        return Err(Error::Input(format!(
            "row has {} values, model expects {}",
            row.len(),
            program.schema.len()
        )));
    }
    for (v, f) in row.iter().zip(&program.schema) {
        if f.kind == FeatureKind::Categorical && v.is_num() {
            return Err(Error::Input(format!(
                "numeric value {v} in categorical feature `{}`",
                f.name
            )));
        }
    }
    Ok(())
}

/// The head of the first rule, in textual order, whose defaults hold and
/// whose exceptions all fail.
pub fn predict(program: &Program, row: &[Value]) -> Result<Prediction> {
    check_row(program, row)?;
    let idx = program.first_applicable(row);
    Ok(Prediction {
        label: idx.map(|i| program.rules[i].head.clone()),
        rule_index: idx,
    })
}

fn clause_children(program: &Program, clause: &Clause, row: &[Value]) -> Vec<JustificationNode> {
    let mut children: Vec<JustificationNode> = clause
        .defaults
        .iter()
        .map(|l| JustificationNode {
            goal: Goal::Literal {
                feature: program.schema[l.feature].name.clone(),
                op: l.op,
                constant: l.value.clone(),
            },
            holds: l.holds(row),
            observed: Some(row[l.feature].clone()),
            children: Vec::new(),
        })
        .collect();
    for &id in &clause.exceptions {
        let (holds, grand) = match program.abnormal(id) {
            Some(a) => (
                program.clause_holds(&a.body, row),
                clause_children(program, &a.body, row),
            ),
            None => (false, Vec::new()),
        };
        children.push(JustificationNode {
            goal: Goal::Abnormal { id },
            holds,
            observed: None,
            children: grand,
        });
    }
    children
}

fn rule_node(program: &Program, index: usize, row: &[Value]) -> JustificationNode {
    let r = &program.rules[index];
    JustificationNode {
        goal: Goal::Rule {
            index,
            head: r.head.clone(),
        },
        holds: program.clause_holds(&r.body, row),
        observed: None,
        children: clause_children(program, &r.body, row),
    }
}

fn collect_bindings(node: &JustificationNode, out: &mut BTreeMap<String, Value>) {
    if let (Goal::Literal { feature, .. }, Some(v)) = (&node.goal, &node.observed) {
        out.insert(feature.clone(), v.clone());
    }
    for c in &node.children {
        collect_bindings(c, out);
    }
}

/// Builds the proof tree for `row`; `example` is only used as its number in
/// the rendering.
pub fn justify(program: &Program, row: &[Value], example: usize) -> Result<Justification> {
    let prediction = predict(program, row)?;
    let roots: Vec<JustificationNode> = match prediction.rule_index {
        Some(i) => vec![rule_node(program, i, row)],
        None => (0..program.rules.len())
            .map(|i| rule_node(program, i, row))
            .collect(),
    };
    let mut bindings = BTreeMap::new();
    for r in &roots {
        collect_bindings(r, &mut bindings);
    }
    Ok(Justification {
        example,
        target: program.target.clone(),
        prediction,
        roots,
        bindings: bindings.into_iter().collect(),
    })
}

fn verdict(holds: bool) -> &'static str {
    if holds {
        "DOES HOLD"
    } else {
        "DOES NOT HOLD"
    }
}

fn shown(v: &Value) -> String {
    match v {
        Value::Num(x) => x.to_string(),
        Value::Cat(s) => format!("'{s}'"),
    }
}

fn render_node(node: &JustificationNode, target: &str, depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    match &node.goal {
        Goal::Rule { head, .. } => {
            let _ = writeln!(out, "{pad}the value of {target} is {head} {} because", verdict(node.holds));
        }
        Goal::Abnormal { id } => {
            let _ = writeln!(out, "{pad}exception ab{id} {} because", verdict(node.holds));
        }
        Goal::Literal {
            feature,
            op,
            constant,
        } => {
            let phrase = match op {
                Op::Eq => "equal",
                Op::Ne => "not equal",
                Op::Gt => "be greater than",
                Op::Le => "be less equal",
            };
            let observed = node.observed.as_ref().map(shown).unwrap_or_default();
            let _ = writeln!(
                out,
                "{pad}the value of {feature} is {observed} which should {phrase} {} ({})",
                shown(constant),
                verdict(node.holds)
            );
        }
    }
    for c in &node.children {
        render_node(c, target, depth + 1, out);
    }
}

impl Justification {
    /// The `{'feature: value', ...}` line.
    pub fn bindings_line(&self) -> String {
        let items: Vec<String> = self
            .bindings
            .iter()
            .map(|(f, v)| format!("'{f}: {v}'"))
            .collect();
        format!("{{{}}}", items.join(", "))
    }

    pub fn render(&self) -> String {
        let mut out = format!("Proof Tree for example number {} :\n", self.example);
        for r in &self.roots {
            render_node(r, &self.target, 0, &mut out);
        }
        out.push_str(&self.bindings_line());
        out.push('\n');
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The rules consulted for `row`, every call marked `[T]` or `[F]`: the
/// abnormal rules of the firing rule and then the rule itself (all rules
/// when none fires), followed by the bindings line.
pub fn trace(program: &Program, row: &[Value]) -> Result<String> {
    let j = justify(program, row, 0)?;
    let mut out = String::new();
    let indices: Vec<usize> = match j.prediction.rule_index {
        Some(i) => vec![i],
        None => (0..program.rules.len()).collect(),
    };
    for i in indices {
        for id in &program.rules[i].body.exceptions {
            if let Some(a) = program.abnormal(*id) {
                out.push_str(&program.trace_abnormal(a, row));
                out.push('\n');
            }
        }
        out.push_str(&program.trace_rule(i, row));
        out.push('\n');
    }
    out.push_str(&j.bindings_line());
    out.push('\n');
    Ok(out)
}
