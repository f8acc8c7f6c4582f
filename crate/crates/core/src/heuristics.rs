//! Information gain and best-literal search.
//!
//! Candidate scoring works on a column encoding: every distinct cell of a
//! feature gets a code, numbers first in ascending order and then tokens in
//! lexicographic order, so code order equals [`Value`] order. Counts for
//! `≤`/`>` come from prefix sums over the numeric codes.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{compare, Op, Value};

/// A feature test `row[feature] op value`.
///
/// The derived ordering (feature, then operator `≤ > = ≠`, then constant) is
/// the tie-break order of the literal search.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    pub op: Op,
    pub value: Value,
}

impl Literal {
    pub fn new(feature: usize, op: Op, value: Value) -> Self {
        debug_assert!(!op.is_numeric() || value.is_num());
        Literal { feature, op, value }
    }

    pub fn holds(&self, row: &[Value]) -> bool {
        compare(&row[self.feature], self.op, &self.value)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{} {} {}", self.feature, self.op, self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl ConfusionCounts {
    pub fn gain(&self) -> f64 {
        ig(self.tp, self.fn_, self.tn, self.fp)
    }
}

/// A literal with its score. `literal == None` is the invalid sentinel and
/// always carries a gain of `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLiteral {
    pub literal: Option<Literal>,
    pub gain: f64,
}

impl ScoredLiteral {
    pub fn invalid() -> Self {
        ScoredLiteral {
            literal: None,
            gain: f64::NEG_INFINITY,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.literal.is_some()
    }
}

fn entropy_term(a: usize, b: usize) -> f64 {
    if a == 0 {
        0.0
    } else {
        let a = a as f64;
        a * (a / (a + b as f64)).ln()
    }
}

/// Negated conditional entropy (natural log) of the split a literal induces,
/// or `-inf` when the literal misclassifies more examples than it gets right.
///
/// # Panics
/// If all four counts are zero.
pub fn ig(tp: usize, fn_: usize, tn: usize, fp: usize) -> f64 {
    let total = tp + fn_ + tn + fp;
    assert!(total > 0, "ig called with all-zero counts");
    if fp + fn_ > tp + tn {
        return f64::NEG_INFINITY;
    }
    (entropy_term(tp, fp) + entropy_term(fp, tp) + entropy_term(tn, fn_) + entropy_term(fn_, tn))
        / total as f64
}

/// One encoded feature column.
#[derive(Debug, Clone)]
pub(crate) struct Column {
    /// Code of each row's cell.
    pub codes: Vec<u32>,
    /// Value of each code, numbers (sorted) then tokens (sorted).
    pub values: Vec<Value>,
    /// Number of numeric codes; codes below this are numbers.
    pub n_num: u32,
}

/// A literal whose constant is a code of its feature's column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct CodedLiteral {
    pub feature: usize,
    pub op: Op,
    pub code: u32,
}

/// Column-encoded rows.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub columns: Vec<Column>,
}

impl Encoded {
    pub fn from_rows<'a, I>(rows: I, n_features: usize) -> Self
    where
        I: IntoIterator<Item = &'a [Value]>,
        I::IntoIter: Clone,
    {
        let rows = rows.into_iter();
        let columns = (0..n_features)
            .map(|f| {
                let mut values: Vec<Value> = rows.clone().map(|r| r[f].clone()).collect();
                values.sort();
                values.dedup();
                let n_num = values.iter().filter(|v| v.is_num()).count() as u32;
                let index: HashMap<&Value, u32> =
                    values.iter().enumerate().map(|(i, v)| (v, i as u32)).collect();
                let codes = rows.clone().map(|r| index[&r[f]]).collect();
                Column {
                    codes,
                    values,
                    n_num,
                }
            })
            .collect();
        Encoded { columns }
    }

    pub fn holds(&self, lit: CodedLiteral, row: usize) -> bool {
        let col = &self.columns[lit.feature];
        let c = col.codes[row];
        match lit.op {
            Op::Le => c < col.n_num && c <= lit.code,
            Op::Gt => c < col.n_num && c > lit.code,
            Op::Eq => c == lit.code,
            Op::Ne => c != lit.code,
        }
    }

    pub fn decode(&self, lit: CodedLiteral) -> Literal {
        Literal::new(
            lit.feature,
            lit.op,
            self.columns[lit.feature].values[lit.code as usize].clone(),
        )
    }

    /// The coded form of `lit`, if its constant occurs in the column.
    pub fn encode(&self, lit: &Literal) -> Option<CodedLiteral> {
        let col = self.columns.get(lit.feature)?;
        let code = col.values.binary_search(&lit.value).ok()? as u32;
        Some(CodedLiteral {
            feature: lit.feature,
            op: lit.op,
            code,
        })
    }

    /// Calls `visit` for every candidate literal on `feature` in tie-break
    /// order: `≤ x` and `> x` for each number present, then `= c` and `≠ c`
    /// for each token present.
    pub fn for_each_candidate(
        &self,
        feature: usize,
        pos: &[usize],
        neg: &[usize],
        mut visit: impl FnMut(CodedLiteral, ConfusionCounts),
    ) {
        let col = &self.columns[feature];
        let n = col.values.len();
        let mut cpos = vec![0usize; n];
        let mut cneg = vec![0usize; n];
        for &r in pos {
            cpos[col.codes[r] as usize] += 1;
        }
        for &r in neg {
            cneg[col.codes[r] as usize] += 1;
        }
        let n_num = col.n_num as usize;
        let xp: usize = cpos[..n_num].iter().sum();
        let xn: usize = cneg[..n_num].iter().sum();
        let cp = pos.len() - xp;
        let cn = neg.len() - xn;

        // Prefix sums over the numeric codes, in place.
        for i in 1..n_num {
            cpos[i] += cpos[i - 1];
            cneg[i] += cneg[i - 1];
        }
        let present_num = |i: usize| {
            let (p, q) = if i == 0 {
                (cpos[0], cneg[0])
            } else {
                (cpos[i] - cpos[i - 1], cneg[i] - cneg[i - 1])
            };
            p + q > 0
        };
        let lit = |op, code: usize| CodedLiteral {
            feature,
            op,
            code: code as u32,
        };
        for op in [Op::Le, Op::Gt] {
            for x in (0..n_num).filter(|&i| present_num(i)) {
                let (p, q) = (cpos[x], cneg[x]);
                let counts = if op == Op::Le {
                    ConfusionCounts {
                        tp: p,
                        fn_: xp - p + cp,
                        tn: xn - q + cn,
                        fp: q,
                    }
                } else {
                    ConfusionCounts {
                        tp: xp - p,
                        fn_: p + cp,
                        tn: q + cn,
                        fp: xn - q,
                    }
                };
                visit(lit(op, x), counts);
            }
        }
        for op in [Op::Eq, Op::Ne] {
            for c in (n_num..n).filter(|&i| cpos[i] + cneg[i] > 0) {
                let (p, q) = (cpos[c], cneg[c]);
                let counts = if op == Op::Eq {
                    ConfusionCounts {
                        tp: p,
                        fn_: cp - p + xp,
                        tn: cn - q + xn,
                        fp: q,
                    }
                } else {
                    ConfusionCounts {
                        tp: cp - p + xp,
                        fn_: p,
                        tn: q,
                        fp: cn - q + xn,
                    }
                };
                visit(lit(op, c), counts);
            }
        }
    }

    /// Highest-gain candidate on `feature` not in `used`; the first one in
    /// tie-break order wins ties. `None` when nothing scores above `-inf`.
    pub fn best_in_feature(
        &self,
        feature: usize,
        pos: &[usize],
        neg: &[usize],
        used: &[CodedLiteral],
    ) -> Option<(CodedLiteral, f64)> {
        if pos.is_empty() && neg.is_empty() {
            return None;
        }
        let mut best: Option<(CodedLiteral, f64)> = None;
        self.for_each_candidate(feature, pos, neg, |lit, counts| {
            let g = counts.gain();
            if g > f64::NEG_INFINITY
                && best.is_none_or(|(_, bg)| g > bg)
                && !used.contains(&lit)
            {
                best = Some((lit, g));
            }
        });
        best
    }

    pub fn best_literal(
        &self,
        pos: &[usize],
        neg: &[usize],
        used: &[CodedLiteral],
    ) -> Option<(CodedLiteral, f64)> {
        let mut best: Option<(CodedLiteral, f64)> = None;
        for f in 0..self.columns.len() {
            if let Some((lit, g)) = self.best_in_feature(f, pos, neg, used) {
                if best.is_none_or(|(_, bg)| g > bg) {
                    best = Some((lit, g));
                }
            }
        }
        best
    }
}

fn encode_split<R: AsRef<[Value]>>(pos: &[R], neg: &[R]) -> Option<(Encoded, Vec<usize>, Vec<usize>)> {
    let n_features = pos.first().or(neg.first())?.as_ref().len();
    let enc = Encoded::from_rows(pos.iter().chain(neg).map(|r| r.as_ref()), n_features);
    let p: Vec<usize> = (0..pos.len()).collect();
    let n: Vec<usize> = (pos.len()..pos.len() + neg.len()).collect();
    Some((enc, p, n))
}

fn encode_used(enc: &Encoded, used: &[Literal]) -> Vec<CodedLiteral> {
    used.iter().filter_map(|l| enc.encode(l)).collect()
}

/// Every candidate literal on `feature` with its prefix-sum confusion
/// counts, in tie-break order.
pub fn candidate_counts<R: AsRef<[Value]>>(
    pos: &[R],
    neg: &[R],
    feature: usize,
) -> Vec<(Literal, ConfusionCounts)> {
    let Some((enc, p, n)) = encode_split(pos, neg) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    enc.for_each_candidate(feature, &p, &n, |lit, counts| out.push((enc.decode(lit), counts)));
    out
}

/// Best literal on one feature, excluding those in `used`.
pub fn best_info_gain<R: AsRef<[Value]>>(
    pos: &[R],
    neg: &[R],
    feature: usize,
    used: &[Literal],
) -> ScoredLiteral {
    let Some((enc, p, n)) = encode_split(pos, neg) else {
        return ScoredLiteral::invalid();
    };
    let used = encode_used(&enc, used);
    match enc.best_in_feature(feature, &p, &n, &used) {
        Some((lit, gain)) => ScoredLiteral {
            literal: Some(enc.decode(lit)),
            gain,
        },
        None => ScoredLiteral::invalid(),
    }
}

/// Best literal over all features, excluding those in `used`.
pub fn find_best_literal<R: AsRef<[Value]>>(pos: &[R], neg: &[R], used: &[Literal]) -> ScoredLiteral {
    let Some((enc, p, n)) = encode_split(pos, neg) else {
        return ScoredLiteral::invalid();
    };
    let used = encode_used(&enc, used);
    match enc.best_literal(&p, &n, &used) {
        Some((lit, gain)) => ScoredLiteral {
            literal: Some(enc.decode(lit)),
            gain,
        },
        None => ScoredLiteral::invalid(),
    }
}
