//! Cross-validates a CSV with default settings.
//!
//! `cargo run --release --example cv -- data/wine.csv class`

use foldrm::{run_cv, CvConfig, Dataset, LabelColumn, NumericSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: cv <csv> <label>");
    let label = args.next().expect("usage: cv <csv> <label>");
    let data = Dataset::parse_csv(
        std::fs::File::open(&path).expect("open"),
        &LabelColumn::Name(label),
        &NumericSpec::Auto,
    )
    .expect("parse");
    let report = run_cv(&data, &CvConfig::default()).expect("cv");
    println!("{}", foldrm::format_table(&[(path, report.mean)]));
}
