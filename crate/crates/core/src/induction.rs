//! Rule learning: `learn_rule` with recursive exception learning, the binary
//! sequential-covering loop `fold_rpp`, and the multi-category driver
//! `fold_rm`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Value};
use crate::error::{Error, Result};
use crate::heuristics::{CodedLiteral, Encoded, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Exception ratio: exceptions are learned once the false positives of a
    /// rule's default part drop to at most `ratio` times its true positives.
    pub ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { ratio: 0.5 }
    }
}

impl TrainConfig {
    pub fn new(ratio: f64) -> Result<Self> {
        let cfg = TrainConfig { ratio };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.ratio) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "ratio must lie in [0, 1], got {}",
                self.ratio
            )))
        }
    }
}

/// A default rule with exceptions. Each exception is itself a rule; the
/// parent applies only when none of its exceptions apply.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LearnedRule {
    pub defaults: Vec<Literal>,
    pub exceptions: Vec<LearnedRule>,
}

impl LearnedRule {
    /// True when every default holds and no exception applies. A rule with
    /// no defaults covers nothing.
    pub fn covers(&self, row: &[Value]) -> bool {
        !self.defaults.is_empty()
            && self.defaults.iter().all(|l| l.holds(row))
            && !self.exceptions.iter().any(|e| e.covers(row))
    }

    /// Nesting depth of the exception tree (0 for a rule without exceptions).
    pub fn depth(&self) -> usize {
        self.exceptions
            .iter()
            .map(|e| 1 + e.depth())
            .max()
            .unwrap_or(0)
    }
}

/// A learned rule together with the class label it concludes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadedRule {
    pub head: String,
    pub rule: LearnedRule,
}

/// Loop counters of a training run, checked against the termination bounds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainStats {
    /// Iterations of the multi-category loop.
    pub rm_iterations: usize,
    /// Number of training examples; `rm_iterations` never exceeds it.
    pub examples: usize,
    pub learn_rule_calls: usize,
    /// Largest number of refining (non-final) literal additions in one
    /// `learn_rule` call.
    pub max_refinements: usize,
    /// `learn_rule` calls whose refinements exceeded their negative count.
    pub refinement_bound_violations: usize,
    /// `fold_rpp` calls that iterated more often than they had positives.
    pub rpp_bound_violations: usize,
    pub max_exception_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub rules: Vec<HeadedRule>,
    pub stats: TrainStats,
}

#[derive(Debug, Clone, Default)]
struct CodedRule {
    defaults: Vec<CodedLiteral>,
    exceptions: Vec<CodedRule>,
}

struct Learner<'a> {
    enc: &'a Encoded,
    ratio: f64,
    stats: TrainStats,
}

impl Learner<'_> {
    fn covers(&self, rule: &CodedRule, row: usize) -> bool {
        !rule.defaults.is_empty()
            && rule.defaults.iter().all(|&l| self.enc.holds(l, row))
            && !rule.exceptions.iter().any(|e| self.covers(e, row))
    }

    fn learn_rule(
        &mut self,
        pos: &[usize],
        neg: &[usize],
        used: &[CodedLiteral],
    ) -> CodedRule {
        self.stats.learn_rule_calls += 1;
        let neg_bound = neg.len();
        let mut pos = pos.to_vec();
        let mut neg = neg.to_vec();
        let mut excluded = used.to_vec();
        let mut rule = CodedRule::default();
        let mut refinements = 0;
        while let Some((lit, _)) = self.enc.best_literal(&pos, &neg, &excluded) {
            let next_pos: Vec<usize> =
                pos.iter().copied().filter(|&r| self.enc.holds(lit, r)).collect();
            let next_neg: Vec<usize> =
                neg.iter().copied().filter(|&r| self.enc.holds(lit, r)).collect();
            if next_neg.len() as f64 <= next_pos.len() as f64 * self.ratio {
                rule.defaults.push(lit);
                excluded.push(lit);
                rule.exceptions = self.fold_rpp(&next_neg, &next_pos, &excluded);
                break;
            }
            if next_neg.len() == neg.len() {
                // A literal that rules out no negative is not a refinement.
                break;
            }
            rule.defaults.push(lit);
            excluded.push(lit);
            pos = next_pos;
            neg = next_neg;
            refinements += 1;
        }
        self.stats.max_refinements = self.stats.max_refinements.max(refinements);
        if refinements > neg_bound {
            self.stats.refinement_bound_violations += 1;
        }
        rule
    }

    fn fold_rpp(
        &mut self,
        pos: &[usize],
        neg: &[usize],
        used: &[CodedLiteral],
    ) -> Vec<CodedRule> {
        let bound = pos.len();
        let mut pos = pos.to_vec();
        let mut rules = Vec::new();
        let mut iterations = 0;
        while !pos.is_empty() {
            iterations += 1;
            let rule = self.learn_rule(&pos, neg, used);
            let uncovered: Vec<usize> =
                pos.iter().copied().filter(|&r| !self.covers(&rule, r)).collect();
            if uncovered.len() == pos.len() {
                break;
            }
            pos = uncovered;
            rules.push(rule);
        }
        if iterations > bound {
            self.stats.rpp_bound_violations += 1;
        }
        rules
    }

    fn decode(&self, rule: &CodedRule) -> LearnedRule {
        LearnedRule {
            defaults: rule.defaults.iter().map(|&l| self.enc.decode(l)).collect(),
            exceptions: rule.exceptions.iter().map(|e| self.decode(e)).collect(),
        }
    }
}

fn encode_split<R: AsRef<[Value]>>(pos: &[R], neg: &[R]) -> Option<(Encoded, Vec<usize>, Vec<usize>)> {
    let n_features = pos.first().or(neg.first())?.as_ref().len();
    let enc = Encoded::from_rows(pos.iter().chain(neg).map(|r| r.as_ref()), n_features);
    Some((
        enc,
        (0..pos.len()).collect(),
        (pos.len()..pos.len() + neg.len()).collect(),
    ))
}

/// Learns one rule whose default part covers positives of `pos` while
/// excluding `neg`, with exceptions learned recursively. Literals in `used`
/// are never chosen.
pub fn learn_rule<R: AsRef<[Value]>>(
    pos: &[R],
    neg: &[R],
    used: &[Literal],
    cfg: &TrainConfig,
) -> LearnedRule {
    let Some((enc, p, n)) = encode_split(pos, neg) else {
        return LearnedRule::default();
    };
    let used: Vec<CodedLiteral> = used.iter().filter_map(|l| enc.encode(l)).collect();
    let mut learner = Learner {
        enc: &enc,
        ratio: cfg.ratio,
        stats: TrainStats::default(),
    };
    let rule = learner.learn_rule(&p, &n, &used);
    learner.decode(&rule)
}

/// Sequential covering for one target: learns rules until every positive is
/// covered or a new rule covers none.
pub fn fold_rpp<R: AsRef<[Value]>>(
    pos: &[R],
    neg: &[R],
    used: &[Literal],
    cfg: &TrainConfig,
) -> Vec<LearnedRule> {
    let Some((enc, p, n)) = encode_split(pos, neg) else {
        return Vec::new();
    };
    let used: Vec<CodedLiteral> = used.iter().filter_map(|l| enc.encode(l)).collect();
    let mut learner = Learner {
        enc: &enc,
        ratio: cfg.ratio,
        stats: TrainStats::default(),
    };
    let rules = learner.fold_rpp(&p, &n, &used);
    rules.iter().map(|r| learner.decode(r)).collect()
}

/// The most frequent label; ties go to the label seen first.
///
/// # Panics
/// If `labels` is empty.
pub fn most<S: AsRef<str>>(labels: &[S]) -> &str {
    assert!(!labels.is_empty(), "most called on no examples");
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        counts.entry(l.as_ref()).or_insert((0, i)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(l, _)| l)
        .unwrap()
}

/// Indices of examples whose label equals `target`, and of the rest.
pub fn split_by_literal<S: AsRef<str>>(labels: &[S], target: &str) -> (Vec<usize>, Vec<usize>) {
    (0..labels.len()).partition(|&i| labels[i].as_ref() == target)
}

/// Learns an ordered list of rules, one target label at a time.
pub fn fold_rm(data: &Dataset, cfg: &TrainConfig) -> LearnedModel {
    let enc = Encoded::from_rows(data.rows().iter().map(|r| r.as_slice()), data.n_features());
    let label_values = data.label_values();
    let label_ids: HashMap<&str, u32> = label_values
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();
    let labels: Vec<u32> = data.labels().iter().map(|l| label_ids[l.as_str()]).collect();

    let mut learner = Learner {
        enc: &enc,
        ratio: cfg.ratio,
        stats: TrainStats {
            examples: data.len(),
            ..TrainStats::default()
        },
    };
    let mut working: Vec<usize> = (0..data.len()).collect();
    let mut rules = Vec::new();
    while !working.is_empty() {
        learner.stats.rm_iterations += 1;
        let working_labels: Vec<&str> = working
            .iter()
            .map(|&i| label_values[labels[i] as usize].as_str())
            .collect();
        let target = most(&working_labels).to_string();
        let target_id = label_ids[target.as_str()];
        let (pos, neg): (Vec<usize>, Vec<usize>) =
            working.iter().partition(|&&i| labels[i] == target_id);
        let rule = learner.learn_rule(&pos, &neg, &[]);
        let covered: Vec<bool> = working
            .iter()
            .map(|&i| labels[i] == target_id && learner.covers(&rule, i))
            .collect();
        if !covered.iter().any(|&c| c) {
            break;
        }
        working = working
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| !c)
            .map(|(&i, _)| i)
            .collect();
        rules.push(HeadedRule {
            head: target,
            rule: learner.decode(&rule),
        });
    }
    let mut stats = learner.stats;
    stats.max_exception_depth = rules.iter().map(|r| r.rule.depth()).max().unwrap_or(0);
    LearnedModel { rules, stats }
}
