#![allow(dead_code)]

use std::path::PathBuf;

use foldrm::{Dataset, FeatureKind, FeatureSchema, LabelColumn, NumericSpec, Value};
use proptest::prelude::*;

const TOKENS: [&str; 5] = ["a", "b", "c", "d", "?"];
const STRAY: [&str; 2] = ["?", "k"];

fn cell(numeric: bool, seed: (u8, u8)) -> Value {
    let (a, b) = seed;
    if numeric {
        if a % 8 == 0 {
            Value::cat(STRAY[(b % 2) as usize])
        } else {
            // small grid with repeats, negatives and halves
            Value::num((b % 13) as f64 / 2.0 - 2.0).unwrap()
        }
    } else {
        Value::cat(TOKENS[(b % 5) as usize])
    }
}

pub fn build(kinds: &[bool], cells: &[Vec<(u8, u8)>], labels: &[u8]) -> Dataset {
    let schema = kinds
        .iter()
        .enumerate()
        .map(|(index, &n)| FeatureSchema {
            name: format!("f{index}"),
            index,
            kind: if n { FeatureKind::Numerical } else { FeatureKind::Categorical },
        })
        .collect();
    let rows = cells
        .iter()
        .map(|r| r.iter().zip(kinds).map(|(&s, &n)| cell(n, s)).collect())
        .collect();
    let labels = labels.iter().map(|l| format!("k{l}")).collect();
    Dataset::new(schema, rows, labels, "label").unwrap()
}

/// Random mixed datasets with 1..=`max_rows` rows and 1..=`max_features`
/// features.
pub fn arb_dataset(max_rows: usize, max_features: usize, max_classes: u8) -> impl Strategy<Value = Dataset> {
    (1..=max_features, 1..=max_rows, 1..=max_classes).prop_flat_map(|(nf, nr, nc)| {
        (
            prop::collection::vec(any::<bool>(), nf),
            prop::collection::vec(prop::collection::vec(any::<(u8, u8)>(), nf), nr),
            prop::collection::vec(0..nc, nr),
        )
            .prop_map(|(kinds, cells, labels)| build(&kinds, &cells, &labels))
    })
}

/// Random datasets plus degenerate shapes: every row identical, a single
/// class, and labels independent of the features.
pub fn arb_any_dataset(max_rows: usize, max_features: usize) -> impl Strategy<Value = Dataset> {
    let identical = (1..=max_features, 1..=max_rows).prop_flat_map(|(nf, nr)| {
        (
            prop::collection::vec(any::<bool>(), nf),
            prop::collection::vec(any::<(u8, u8)>(), nf),
            prop::collection::vec(0..3u8, nr),
        )
            .prop_map(|(kinds, row, labels)| {
                let cells = vec![row; labels.len()];
                build(&kinds, &cells, &labels)
            })
    });
    let single_class = arb_dataset(max_rows, max_features, 1);
    let noise = arb_dataset(max_rows, max_features, 6);
    prop_oneof![
        arb_dataset(max_rows, max_features, 4),
        identical,
        single_class,
        noise,
    ]
}

pub fn data_dir() -> PathBuf {
    std::env::var_os("FOLDRM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load(name: &str, label: &str) -> Option<Dataset> {
    let path = data_dir().join(name);
    let file = std::fs::File::open(path).ok()?;
    Some(Dataset::parse_csv(file, &LabelColumn::Name(label.into()), &NumericSpec::Auto).unwrap())
}

/// Single-feature rows.
pub fn column(values: &[Value]) -> Vec<Vec<Value>> {
    values.iter().map(|v| vec![v.clone()]).collect()
}

/// The eight positive and seven negative cells of the worked example.
pub fn worked_example() -> (Vec<Vec<Value>>, Vec<Vec<Value>>) {
    let n = |x: f64| Value::num(x).unwrap();
    let c = Value::cat;
    (
        column(&[n(1.0), n(2.0), n(2.0), n(4.0), n(5.0), c("x"), c("x"), c("y")]),
        column(&[n(1.0), n(3.0), n(4.0), c("y"), c("y"), c("y"), c("z")]),
    )
}

/// Habitat facts as boolean columns: charlie, john, smoky, nemo, kitty.
pub fn habitat() -> Dataset {
    let features = ["mammal", "cat", "whale", "bear", "dog", "fish", "clownfish"];
    let facts: [(&str, &[&str], &str); 5] = [
        ("charlie", &["mammal", "dog"], "land"),
        ("john", &["mammal", "whale"], "water"),
        ("smoky", &["mammal", "bear"], "land"),
        ("nemo", &["fish", "clownfish"], "water"),
        ("kitty", &["mammal", "cat"], "land"),
    ];
    let schema = features
        .iter()
        .enumerate()
        .map(|(index, f)| FeatureSchema {
            name: f.to_string(),
            index,
            kind: FeatureKind::Categorical,
        })
        .collect();
    let rows = facts
        .iter()
        .map(|(_, has, _)| {
            features
                .iter()
                .map(|f| Value::cat(if has.contains(f) { "true" } else { "false" }))
                .collect()
        })
        .collect();
    let labels = facts.iter().map(|(_, _, l)| l.to_string()).collect();
    Dataset::new(schema, rows, labels, "habitat").unwrap()
}
