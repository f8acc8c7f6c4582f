//! Synthetic datasets for benchmarks.

use foldrm::{Dataset, FeatureKind, FeatureSchema, Value};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `rows` examples over alternating numerical and categorical features with
/// `classes` labels. Labels depend on the first two features plus 10% noise,
/// so there is structure to learn.
pub fn synthetic(rows: usize, features: usize, classes: usize, seed: u64) -> Dataset {
    assert!(features >= 2 && classes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema: Vec<FeatureSchema> = (0..features)
        .map(|index| FeatureSchema {
            name: format!("f{index}"),
            index,
            kind: if index % 2 == 0 {
                FeatureKind::Numerical
            } else {
                FeatureKind::Categorical
            },
        })
        .collect();
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row: Vec<Value> = schema
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numerical if rng.gen_bool(0.05) => Value::cat("?"),
                FeatureKind::Numerical => Value::num(rng.gen_range(0..1000) as f64 / 10.0).unwrap(),
                FeatureKind::Categorical => Value::cat(format!("v{}", rng.gen_range(0..8))),
            })
            .collect();
        let x = row[0].as_num().unwrap_or(0.0);
        let c = row[1].as_cat().map_or(0, |s| s.len() + s.as_bytes()[s.len() - 1] as usize);
        let class = if rng.gen_bool(0.1) {
            rng.gen_range(0..classes)
        } else {
            ((x / 25.0) as usize + c) % classes
        };
        labels.push(format!("c{class}"));
        data.push(row);
    }
    Dataset::new(schema, data, labels, "label").expect("consistent synthetic data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = synthetic(100, 4, 3, 1);
        assert_eq!(a.len(), 100);
        assert_eq!(a.n_features(), 4);
        assert!(a.label_values().len() <= 3);
        assert_eq!(a, synthetic(100, 4, 3, 1));
        assert_ne!(a, synthetic(100, 4, 3, 2));
    }
}
