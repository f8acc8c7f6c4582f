//! Learned programs as ordered logic-program rules with abnormal predicates:
//! construction from a learned model, the mutually exclusive flattened
//! form, and the canonical text format with its JSON sidecar.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSchema, Op, Value};
use crate::error::{Error, Result};
use crate::heuristics::Literal;
use crate::induction::{HeadedRule, LearnedRule};

/// Version of the model text + sidecar format.
pub const FORMAT_VERSION: u32 = 1;

/// A rule body: feature tests, then negated abnormal predicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub defaults: Vec<Literal>,
    /// Ids of abnormal predicates, each used under negation.
    pub exceptions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub head: String,
    pub body: Clause,
}

/// `ab<id>(X) :- body.`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbnormalRule {
    pub id: usize,
    pub body: Clause,
}

/// Textually ordered rules: the first rule whose body holds decides.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub target: String,
    pub rules: Vec<Rule>,
    /// Sorted by id.
    pub abnormals: Vec<AbnormalRule>,
    pub schema: Vec<FeatureSchema>,
    pub label_values: Vec<String>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaFeature {
    pub name: String,
    pub kind: FeatureKind,
}

/// The JSON sidecar stored next to a model's text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: u32,
    pub target: String,
    pub label_values: Vec<String>,
    pub features: Vec<MetaFeature>,
    pub ratio: f64,
}

impl Meta {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads a sidecar, rejecting other format versions.
    pub fn from_json(text: &str) -> Result<Meta> {
        let meta: Meta = serde_json::from_str(text)?;
        if meta.version != FORMAT_VERSION {
            return Err(Error::Version {
                expected: FORMAT_VERSION,
                found: meta.version,
            });
        }
        Ok(meta)
    }

    pub fn schema(&self) -> Vec<FeatureSchema> {
        self.features
            .iter()
            .enumerate()
            .map(|(index, f)| FeatureSchema {
                name: f.name.clone(),
                index,
                kind: f.kind,
            })
            .collect()
    }
}

impl Program {
    /// Compiles learned rules. Abnormal ids are numbered from 1 in pre-order
    /// over the rules; structurally identical exceptions share one id.
    pub fn from_model(
        rules: &[HeadedRule],
        schema: Vec<FeatureSchema>,
        target: impl Into<String>,
        label_values: Vec<String>,
        ratio: f64,
    ) -> Program {
        struct Builder<'a> {
            ids: HashMap<&'a LearnedRule, usize>,
            abnormals: Vec<AbnormalRule>,
        }
        impl<'a> Builder<'a> {
            fn clause(&mut self, rule: &'a LearnedRule) -> Clause {
                let exceptions = rule.exceptions.iter().map(|e| self.abnormal(e)).collect();
                Clause {
                    defaults: rule.defaults.clone(),
                    exceptions,
                }
            }

            fn abnormal(&mut self, rule: &'a LearnedRule) -> usize {
                if let Some(&id) = self.ids.get(rule) {
                    return id;
                }
                let id = self.ids.len() + 1;
                self.ids.insert(rule, id);
                let body = self.clause(rule);
                self.abnormals.push(AbnormalRule { id, body });
                id
            }
        }

        let mut b = Builder {
            ids: HashMap::new(),
            abnormals: Vec::new(),
        };
        let rules = rules
            .iter()
            .map(|r| Rule {
                head: r.head.clone(),
                body: b.clause(&r.rule),
            })
            .collect();
        let mut abnormals = b.abnormals;
        abnormals.sort_by_key(|a| a.id);
        Program {
            target: target.into(),
            rules,
            abnormals,
            schema,
            label_values,
            ratio,
        }
    }

    pub fn meta(&self) -> Meta {
        Meta {
            version: FORMAT_VERSION,
            target: self.target.clone(),
            label_values: self.label_values.clone(),
            features: self
                .schema
                .iter()
                .map(|f| MetaFeature {
                    name: f.name.clone(),
                    kind: f.kind,
                })
                .collect(),
            ratio: self.ratio,
        }
    }

    pub fn abnormal(&self, id: usize) -> Option<&AbnormalRule> {
        self.abnormals
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.abnormals[i])
    }

    pub fn ab_holds(&self, id: usize, row: &[Value]) -> bool {
        self.abnormal(id).is_some_and(|a| self.clause_holds(&a.body, row))
    }

    /// Every default holds and no referenced abnormal predicate holds. A
    /// body without defaults never holds.
    pub fn clause_holds(&self, clause: &Clause, row: &[Value]) -> bool {
        !clause.defaults.is_empty()
            && clause.defaults.iter().all(|l| l.holds(row))
            && !clause.exceptions.iter().any(|&id| self.ab_holds(id, row))
    }

    /// Index of the first rule whose body holds.
    pub fn first_applicable(&self, row: &[Value]) -> Option<usize> {
        self.rules.iter().position(|r| self.clause_holds(&r.body, row))
    }

    pub fn flatten(&self) -> FlattenedProgram {
        let dispatch = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| Dispatch {
                label: r.head.clone(),
                helper: i + 1,
                guards: (1..=i).rev().collect(),
            })
            .collect();
        FlattenedProgram {
            target: self.target.clone(),
            schema: self.schema.clone(),
            dispatch,
            helpers: self.rules.iter().map(|r| r.body.clone()).collect(),
            abnormals: self.abnormals.clone(),
        }
    }

    /// The canonical text: rules in order, then abnormal rules by id, one
    /// per line.
    pub fn emit(&self) -> String {
        let names = Names::new(&self.schema, &self.target);
        let mut out = String::new();
        for r in &self.rules {
            let _ = writeln!(
                out,
                "{}(X,{}) :- {}.",
                names.target,
                label_atom(&r.head),
                names.body(&self.schema, &r.body)
            );
        }
        for a in &self.abnormals {
            let _ = writeln!(out, "ab{}(X) :- {}.", a.id, names.body(&self.schema, &a.body));
        }
        out
    }

    /// Reads text written by [`Program::emit`] against its sidecar.
    pub fn parse(text: &str, meta: &Meta) -> Result<Program> {
        if meta.version != FORMAT_VERSION {
            return Err(Error::Version {
                expected: FORMAT_VERSION,
                found: meta.version,
            });
        }
        let schema = meta.schema();
        let names = Names::new(&schema, &meta.target);
        let mut parser = Parser {
            tokens: tokenize(text)?,
            pos: 0,
            names: &names,
            schema: &schema,
            end_line: text.lines().count().max(1),
        };
        let mut rules = Vec::new();
        let mut abnormals = Vec::new();
        let mut refs: Vec<(usize, usize)> = Vec::new();
        while !parser.at_end() {
            let line = parser.line();
            match parser.clause()? {
                Parsed::Rule(r) => {
                    refs.extend(r.body.exceptions.iter().map(|&id| (id, line)));
                    rules.push(r);
                }
                Parsed::Abnormal(a) => {
                    if abnormals.iter().any(|b: &AbnormalRule| b.id == a.id) {
                        return Err(Error::Syntax {
                            line,
                            message: format!("ab{} is defined twice", a.id),
                        });
                    }
                    refs.extend(a.body.exceptions.iter().map(|&id| (id, line)));
                    abnormals.push(a);
                }
            }
        }
        let defined: HashSet<usize> = abnormals.iter().map(|a| a.id).collect();
        if let Some(&(id, line)) = refs.iter().find(|(id, _)| !defined.contains(id)) {
            return Err(Error::Syntax {
                line,
                message: format!("undefined abnormal predicate ab{id}"),
            });
        }
        abnormals.sort_by_key(|a| a.id);
        let program = Program {
            target: meta.target.clone(),
            rules,
            abnormals,
            schema,
            label_values: meta.label_values.clone(),
            ratio: meta.ratio,
        };
        if let Some(id) = program.abnormal_cycle() {
            return Err(Error::Syntax {
                line: 0,
                message: format!("abnormal predicate ab{id} depends on itself"),
            });
        }
        Ok(program)
    }

    fn abnormal_cycle(&self) -> Option<usize> {
        // 0 = unvisited, 1 = on stack, 2 = done
        fn visit(p: &Program, id: usize, state: &mut BTreeMap<usize, u8>) -> Option<usize> {
            match state.get(&id) {
                Some(1) => return Some(id),
                Some(2) => return None,
                _ => {}
            }
            state.insert(id, 1);
            if let Some(a) = p.abnormal(id) {
                for &child in &a.body.exceptions {
                    if let Some(c) = visit(p, child, state) {
                        return Some(c);
                    }
                }
            }
            state.insert(id, 2);
            None
        }
        let mut state = BTreeMap::new();
        self.abnormals.iter().find_map(|a| visit(self, a.id, &mut state))
    }

    /// `head :- body.` for rule `index`, each call annotated with its truth
    /// value on `row`.
    pub(crate) fn trace_rule(&self, index: usize, row: &[Value]) -> String {
        let names = Names::new(&self.schema, &self.target);
        let r = &self.rules[index];
        let head = if self.clause_holds(&r.body, row) { "[T]" } else { "[F]" };
        format!(
            "{head}{}(X,{}) :- {}.",
            names.target,
            label_atom(&r.head),
            names.annotated_body(&self.schema, &r.body, Some((self, row)))
        )
    }

    pub(crate) fn trace_abnormal(&self, a: &AbnormalRule, row: &[Value]) -> String {
        let names = Names::new(&self.schema, &self.target);
        let head = if self.clause_holds(&a.body, row) { "[T]" } else { "[F]" };
        format!(
            "{head}ab{}(X) :- {}.",
            a.id,
            names.annotated_body(&self.schema, &a.body, Some((self, row)))
        )
    }

    /// Predicate name used for each feature in the text format.
    pub fn predicate_names(&self) -> Vec<String> {
        Names::new(&self.schema, &self.target).features
    }

    /// Predicate name used for the class label.
    pub fn target_predicate(&self) -> String {
        Names::new(&self.schema, &self.target).target
    }
}

/// `<target>(X,label) :- <target>_helper(X), not <target>_g(X), ...`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub label: String,
    /// 1-based helper number.
    pub helper: usize,
    /// Helpers negated in this rule, descending.
    pub guards: Vec<usize>,
}

/// The mutually exclusive form: dispatch rules guarded by the negations of
/// all earlier rule bodies, one helper predicate per original rule, and the
/// unchanged abnormal rules.
#[derive(Debug, Clone, PartialEq)]
pub struct FlattenedProgram {
    pub target: String,
    pub schema: Vec<FeatureSchema>,
    pub dispatch: Vec<Dispatch>,
    /// Helper `k` is `helpers[k - 1]`.
    pub helpers: Vec<Clause>,
    pub abnormals: Vec<AbnormalRule>,
}

impl FlattenedProgram {
    fn as_program(&self) -> Program {
        Program {
            target: self.target.clone(),
            rules: Vec::new(),
            abnormals: self.abnormals.clone(),
            schema: self.schema.clone(),
            label_values: Vec::new(),
            ratio: 0.0,
        }
    }

    /// Indices of the dispatch rules whose whole body holds.
    pub fn firing(&self, row: &[Value]) -> Vec<usize> {
        let p = self.as_program();
        let helper: Vec<bool> = self.helpers.iter().map(|c| p.clause_holds(c, row)).collect();
        self.dispatch
            .iter()
            .enumerate()
            .filter(|(_, d)| helper[d.helper - 1] && d.guards.iter().all(|&g| !helper[g - 1]))
            .map(|(i, _)| i)
            .collect()
    }

    /// The label of the single firing dispatch rule.
    pub fn predict(&self, row: &[Value]) -> Option<&str> {
        self.firing(row)
            .first()
            .map(|&i| self.dispatch[i].label.as_str())
    }

    pub fn emit(&self) -> String {
        let names = Names::new(&self.schema, &self.target);
        let t = &names.target;
        let mut out = String::new();
        for d in &self.dispatch {
            let _ = write!(out, "{t}(X,{}) :- {t}_{}(X)", label_atom(&d.label), d.helper);
            for g in &d.guards {
                let _ = write!(out, ", not {t}_{g}(X)");
            }
            out.push_str(".\n");
        }
        for (k, c) in self.helpers.iter().enumerate() {
            let _ = writeln!(out, "{t}_{}(X) :- {}.", k + 1, names.body(&self.schema, c));
        }
        for a in &self.abnormals {
            let _ = writeln!(out, "ab{}(X) :- {}.", a.id, names.body(&self.schema, &a.body));
        }
        out
    }

    /// Predicates grouped into strata: every predicate depends only on
    /// predicates of strictly lower strata. `None` if the dependency graph
    /// has a cycle.
    pub fn strata(&self) -> Option<Vec<Vec<String>>> {
        let names = Names::new(&self.schema, &self.target);
        let t = &names.target;
        let mut deps: BTreeMap<String, HashSet<String>> = BTreeMap::new();
        let mut clause_deps = |head: String, c: &Clause| {
            let e = deps.entry(head).or_default();
            for l in &c.defaults {
                e.insert(names.features[l.feature].clone());
            }
            for id in &c.exceptions {
                e.insert(format!("ab{id}"));
            }
        };
        for (k, c) in self.helpers.iter().enumerate() {
            clause_deps(format!("{t}_{}", k + 1), c);
        }
        for a in &self.abnormals {
            clause_deps(format!("ab{}", a.id), &a.body);
        }
        for d in &self.dispatch {
            let e = deps.entry(t.clone()).or_default();
            e.insert(format!("{t}_{}", d.helper));
            e.extend(d.guards.iter().map(|g| format!("{t}_{g}")));
        }
        for f in &names.features {
            deps.entry(f.clone()).or_default();
        }
        let all: Vec<String> = deps.values().flatten().cloned().collect();
        for n in all {
            deps.entry(n).or_default();
        }

        let mut level: BTreeMap<String, usize> = BTreeMap::new();
        let mut remaining: Vec<String> = deps.keys().cloned().collect();
        while !remaining.is_empty() {
            let mut progressed = false;
            remaining.retain(|n| {
                let ds = &deps[n];
                if ds.iter().all(|d| level.contains_key(d)) {
                    let l = ds.iter().map(|d| level[d] + 1).max().unwrap_or(0);
                    level.insert(n.clone(), l);
                    progressed = true;
                    false
                } else {
                    true
                }
            });
            if !progressed {
                return None;
            }
        }
        let depth = level.values().copied().max().map_or(0, |m| m + 1);
        let mut strata = vec![Vec::new(); depth];
        for (n, l) in level {
            strata[l].push(n);
        }
        Some(strata)
    }
}

/// Lowercase, with anything outside `[a-z0-9_]` replaced by `_`, and a
/// prefix when the result would not start with a letter.
fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            let c = c.to_ascii_lowercase();
            if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if !s.starts_with(|c: char| c.is_ascii_lowercase()) {
        s.insert_str(0, "f_");
    }
    s
}

fn is_reserved(name: &str, target: &str) -> bool {
    let numbered = |prefix: &str| {
        name.strip_prefix(prefix)
            .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
    };
    name == target || name == "not" || numbered("ab") || numbered(&format!("{target}_"))
}

struct Names {
    target: String,
    features: Vec<String>,
}

impl Names {
    fn new(schema: &[FeatureSchema], target: &str) -> Names {
        let target = sanitize(target);
        let mut taken: HashSet<String> = HashSet::new();
        let features = schema
            .iter()
            .map(|f| {
                let base = sanitize(&f.name);
                let mut name = base.clone();
                let mut n = 1;
                while is_reserved(&name, &target) || taken.contains(&name) {
                    n += 1;
                    name = format!("{base}_f{n}");
                }
                taken.insert(name.clone());
                name
            })
            .collect();
        Names { target, features }
    }

    fn body(&self, schema: &[FeatureSchema], c: &Clause) -> String {
        self.annotated_body(schema, c, None)
    }

    /// The body text; with `eval`, every call is prefixed `[T]` or `[F]`.
    fn annotated_body(
        &self,
        schema: &[FeatureSchema],
        c: &Clause,
        eval: Option<(&Program, &[Value])>,
    ) -> String {
        let mark = |truth: bool| match (eval, truth) {
            (None, _) => "",
            (Some(_), true) => "[T]",
            (Some(_), false) => "[F]",
        };
        let mut parts = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for l in &c.defaults {
            let pred = &self.features[l.feature];
            let m = mark(eval.is_some_and(|(_, row)| l.holds(row)));
            if l.op.is_numeric() {
                let n = seen.entry(l.feature).or_insert(0);
                *n += 1;
                let var = if *n == 1 {
                    format!("N{}", schema[l.feature].index)
                } else {
                    format!("N{}_{}", schema[l.feature].index, n)
                };
                let op = if l.op == Op::Le { "=<" } else { ">" };
                parts.push(format!("{m}{pred}(X,{var}), {var}{op}{}", l.value));
            } else {
                // the call is the positive atom, so its mark is flipped for `not`
                let (neg, m) = if l.op == Op::Ne {
                    ("not ", mark(eval.is_some_and(|(_, row)| !l.holds(row))))
                } else {
                    ("", m)
                };
                parts.push(format!("{neg}{m}{pred}(X,{})", constant(&l.value)));
            }
        }
        for id in &c.exceptions {
            let m = mark(eval.is_some_and(|(p, row)| p.ab_holds(*id, row)));
            parts.push(format!("not {m}ab{id}(X)"));
        }
        parts.join(", ")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for ch in s.chars() {
        if ch == '\'' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('\'');
    out
}

/// Categorical constants are quoted; numbers are written bare.
pub(crate) fn constant(v: &Value) -> String {
    match v {
        Value::Num(x) => format!("{x}"),
        Value::Cat(s) => quote(s),
    }
}

fn is_plain_atom(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Head labels are written bare when they read as an atom, else quoted.
pub(crate) fn label_atom(label: &str) -> String {
    if is_plain_atom(label) {
        label.to_string()
    } else {
        quote(label)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Neck,
    Dot,
    Gt,
    Le,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Atom(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Num(x) => format!("`{x}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Le => "`=<`".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let err = |line, message: String| Err(Error::Syntax { line, message });
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' | ')' | ',' | '.' | '>' => {
                let t = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    _ => Tok::Gt,
                };
                out.push((t, line));
                i += 1;
            }
            ':' => {
                if chars.get(i + 1) == Some(&'-') {
                    out.push((Tok::Neck, line));
                    i += 2;
                } else {
                    return err(line, "expected `:-`".into());
                }
            }
            '=' => {
                if chars.get(i + 1) == Some(&'<') {
                    out.push((Tok::Le, line));
                    i += 2;
                } else {
                    return err(line, "expected `=<`".into());
                }
            }
            '\'' => {
                let start = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return err(start, "unterminated quoted constant".into()),
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(&ch) => s.push(ch),
                                None => return err(start, "unterminated quoted constant".into()),
                            }
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Str(s), start));
            }
            c if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    let mut j = i + 1;
                    if matches!(chars.get(j), Some('+' | '-')) {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                match s.parse::<f64>().ok().and_then(Value::num) {
                    Some(Value::Num(x)) => out.push((Tok::Num(x), line)),
                    _ => return err(line, format!("bad number `{s}`")),
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                if c.is_ascii_lowercase() {
                    out.push((Tok::Atom(s), line));
                } else {
                    out.push((Tok::Var(s), line));
                }
            }
            other => return err(line, format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

enum Parsed {
    Rule(Rule),
    Abnormal(AbnormalRule),
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a Names,
    schema: &'a [FeatureSchema],
    end_line: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.1)
            .unwrap_or(self.end_line)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            line: self.line(),
            message: message.into(),
        })
    }

    fn next(&mut self) -> Result<Tok> {
        match self.tokens.get(self.pos) {
            Some((t, _)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.fail("unexpected end of input"),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let line = self.line();
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(Error::Syntax {
                line,
                message: format!("expected {}, found {}", want.describe(), got.describe()),
            })
        }
    }

    fn atom(&mut self) -> Result<String> {
        let line = self.line();
        match self.next()? {
            Tok::Atom(s) => Ok(s),
            other => Err(Error::Syntax {
                line,
                message: format!("expected a predicate name, found {}", other.describe()),
            }),
        }
    }

    fn record_var(&mut self) -> Result<()> {
        let line = self.line();
        match self.next()? {
            Tok::Var(v) if v == "X" => Ok(()),
            other => Err(Error::Syntax {
                line,
                message: format!("expected `X`, found {}", other.describe()),
            }),
        }
    }

    fn ab_id(name: &str) -> Option<usize> {
        name.strip_prefix("ab")
            .filter(|r| !r.is_empty() && r.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|r| r.parse().ok())
            .filter(|&id| id > 0)
    }

    fn clause(&mut self) -> Result<Parsed> {
        let head_line = self.line();
        let name = self.atom()?;
        self.expect(Tok::LParen)?;
        self.record_var()?;
        let parsed_head = if let Some(id) = Self::ab_id(&name) {
            self.expect(Tok::RParen)?;
            Err(id)
        } else if name == self.names.target {
            self.expect(Tok::Comma)?;
            let label = match self.next()? {
                Tok::Atom(s) | Tok::Str(s) => s,
                Tok::Num(x) => x.to_string(),
                other => return self.fail(format!("bad class label {}", other.describe())),
            };
            self.expect(Tok::RParen)?;
            Ok(label)
        } else {
            return Err(Error::Syntax {
                line: head_line,
                message: format!("unknown head predicate `{name}`"),
            });
        };
        self.expect(Tok::Neck)?;
        let body = self.body()?;
        if body.defaults.is_empty() {
            return Err(Error::Syntax {
                line: head_line,
                message: "rule body has no feature test".into(),
            });
        }
        Ok(match parsed_head {
            Ok(head) => Parsed::Rule(Rule { head, body }),
            Err(id) => Parsed::Abnormal(AbnormalRule { id, body }),
        })
    }

    fn body(&mut self) -> Result<Clause> {
        let mut clause = Clause {
            defaults: Vec::new(),
            exceptions: Vec::new(),
        };
        loop {
            let negated = matches!(self.peek(), Some(Tok::Atom(a)) if a == "not")
                && matches!(self.tokens.get(self.pos + 1), Some((Tok::Atom(_), _)));
            if negated {
                self.pos += 1;
            }
            let name = self.atom()?;
            self.expect(Tok::LParen)?;
            self.record_var()?;
            if let Some(id) = Self::ab_id(&name) {
                self.expect(Tok::RParen)?;
                if !negated {
                    return self.fail(format!("ab{id} must be negated"));
                }
                clause.exceptions.push(id);
            } else {
                let Some(feature) = self.names.features.iter().position(|f| *f == name) else {
                    return self.fail(format!("unknown feature predicate `{name}`"));
                };
                let kind = self.schema[feature].kind;
                self.expect(Tok::Comma)?;
                let line = self.line();
                match self.next()? {
                    Tok::Str(s) => {
                        self.expect(Tok::RParen)?;
                        let op = if negated { Op::Ne } else { Op::Eq };
                        clause.defaults.push(Literal::new(feature, op, Value::cat(s)));
                    }
                    Tok::Num(x) => {
                        self.expect(Tok::RParen)?;
                        if kind != FeatureKind::Numerical {
                            return self.fail(format!("numeric constant for categorical `{name}`"));
                        }
                        let op = if negated { Op::Ne } else { Op::Eq };
                        clause.defaults.push(Literal::new(feature, op, Value::Num(x)));
                    }
                    Tok::Var(v) => {
                        self.expect(Tok::RParen)?;
                        if negated {
                            return self.fail("negated numeric comparison");
                        }
                        if kind != FeatureKind::Numerical {
                            return self.fail(format!("comparison on categorical `{name}`"));
                        }
                        self.expect(Tok::Comma)?;
                        self.expect(Tok::Var(v))?;
                        let op = match self.next()? {
                            Tok::Gt => Op::Gt,
                            Tok::Le => Op::Le,
                            other => {
                                return self.fail(format!(
                                    "expected `>` or `=<`, found {}",
                                    other.describe()
                                ))
                            }
                        };
                        let line = self.line();
                        let x = match self.next()? {
                            Tok::Num(x) => x,
                            other => {
                                return Err(Error::Syntax {
                                    line,
                                    message: format!("expected a number, found {}", other.describe()),
                                })
                            }
                        };
                        clause.defaults.push(Literal::new(feature, op, Value::Num(x)));
                    }
                    other => {
                        return Err(Error::Syntax {
                            line,
                            message: format!("expected a constant, found {}", other.describe()),
                        })
                    }
                }
            }
            match self.next()? {
                Tok::Comma => continue,
                Tok::Dot => return Ok(clause),
                other => return self.fail(format!("expected `,` or `.`, found {}", other.describe())),
            }
        }
    }
}
