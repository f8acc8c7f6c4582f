//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero when a
//! criterion fails on data that is present; a criterion whose dataset is
//! missing is reported as FAIL (unavailable) without failing the run.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use foldrm::{
    candidate_counts, find_best_literal, fold_rm, ig, parse_csv_with_schema, predict, run_cv,
    CvConfig, FeatureKind, Literal, Meta, Op, Program, TrainConfig, Value,
};
use proptest::test_runner::{Config, TestCaseError, TestRunner};

enum Failure {
    Check(String),
    Unavailable(String),
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure::Check(msg)
    }
}

type Outcome = Result<String, Failure>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a == f64::NEG_INFINITY && b == f64::NEG_INFINITY) || (a - b).abs() <= 0.001
}

fn c1_information_gain() -> Outcome {
    let g = ig(1, 7, 7, 0);
    check(close(g, -0.647), format!("ig(1,7,7,0) = {g:.4}"))?;
    let ninf = f64::NEG_INFINITY;
    let expected: Vec<(Op, &str, f64)> = vec![
        (Op::Le, "1", ninf),
        (Op::Le, "2", -0.655),
        (Op::Le, "3", -0.686),
        (Op::Le, "4", -0.688),
        (Op::Le, "5", -0.672),
        (Op::Gt, "1", -0.667),
        (Op::Gt, "2", ninf),
        (Op::Gt, "3", -0.682),
        (Op::Gt, "4", -0.647),
        (Op::Gt, "5", ninf),
        (Op::Eq, "x", -0.598),
        (Op::Eq, "y", ninf),
        (Op::Eq, "z", ninf),
        (Op::Ne, "x", ninf),
        (Op::Ne, "y", -0.631),
        (Op::Ne, "z", -0.637),
    ];
    let (pos, neg) = common::worked_example();
    let got: BTreeMap<(Op, String), f64> = candidate_counts(&pos, &neg, 0)
        .into_iter()
        .map(|(l, c)| ((l.op, l.value.to_string()), c.gain()))
        .collect();
    check(got.len() == 16, format!("{} candidates, expected 16", got.len()))?;
    for (op, v, want) in &expected {
        let have = got[&(*op, v.to_string())];
        check(close(have, *want), format!("{op} {v}: {have:.4} vs {want}"))?;
    }
    Ok(format!("ig(1,7,7,0) = {g:.3}; all 16 grid entries within 0.001"))
}

fn c2_best_literal() -> Outcome {
    let (pos, neg) = common::worked_example();
    let best = find_best_literal(&pos, &neg, &[]);
    let want = Literal::new(0, Op::Eq, Value::cat("x"));
    check(best.literal.as_ref() == Some(&want), format!("selected {:?}", best.literal))?;
    check(close(best.gain, -0.598), format!("gain {:.4}", best.gain))?;
    Ok(format!("(0, =, x) with gain {:.3}", best.gain))
}

fn c3_habitat() -> Outcome {
    let data = common::habitat();
    let model = fold_rm(&data, &TrainConfig::default());
    let program = Program::from_model(
        &model.rules,
        data.schema().to_vec(),
        data.label_name(),
        data.label_values(),
        0.5,
    );
    let heads: Vec<&str> = program.rules.iter().map(|r| r.head.as_str()).collect();
    check(heads == ["land", "water", "water"], format!("heads {heads:?}"))?;
    let mammal = data.schema().iter().position(|f| f.name == "mammal").unwrap();
    let whale = data.schema().iter().position(|f| f.name == "whale").unwrap();
    let first = &program.rules[0].body;
    check(
        first.defaults == vec![Literal::new(mammal, Op::Eq, Value::cat("true"))]
            && first.exceptions == vec![1],
        format!("first rule {first:?}"),
    )?;
    check(program.abnormals.len() == 1, "expected exactly one abnormal rule")?;
    check(
        program.abnormals[0].body.defaults == vec![Literal::new(whale, Op::Eq, Value::cat("true"))],
        format!("ab1 {:?}", program.abnormals[0]),
    )?;

    // Decision-list equivalence with the reference program over every
    // individual the background facts can describe: one species, plus the
    // class that species implies.
    let reference = |row: &[Value]| -> Option<&str> {
        let is = |name: &str| {
            let i = data.schema().iter().position(|f| f.name == name).unwrap();
            row[i] == Value::cat("true")
        };
        if is("mammal") && !is("whale") {
            Some("land")
        } else if is("fish") || is("whale") {
            Some("water")
        } else {
            None
        }
    };
    let species = [("cat", "mammal"), ("whale", "mammal"), ("bear", "mammal"), ("dog", "mammal"), ("clownfish", "fish")];
    for (s, class) in species {
        let row: Vec<Value> = data
            .schema()
            .iter()
            .map(|f| Value::cat(if f.name == s || f.name == class { "true" } else { "false" }))
            .collect();
        let got = predict(&program, &row).unwrap().label;
        check(got.as_deref() == reference(&row), format!("{s}: {got:?} vs {:?}", reference(&row)))?;
    }
    for i in 0..data.len() {
        let got = predict(&program, data.row(i)).unwrap().label;
        check(got.as_deref() == Some(data.label(i)), format!("training fact {i}: {got:?}"))?;
    }

    let flat = program.flatten();
    let guards: Vec<Vec<usize>> = flat.dispatch.iter().map(|d| d.guards.clone()).collect();
    check(guards == vec![vec![], vec![1], vec![2, 1]], format!("guards {guards:?}"))?;
    let helpers: Vec<usize> = flat.dispatch.iter().map(|d| d.helper).collect();
    check(helpers == vec![1, 2, 3], format!("helpers {helpers:?}"))?;
    let text = flat.emit();
    let lines = text.lines().count();
    check(lines == 7, format!("flattened program has {lines} rules"))?;
    check(
        text.lines().nth(2) == Some("habitat(X,water) :- habitat_3(X), not habitat_2(X), not habitat_1(X)."),
        format!("third dispatch rule: {:?}", text.lines().nth(2)),
    )?;
    check(flat.strata().is_some(), "flattened program is not stratified")?;
    Ok(format!(
        "3 rules + ab1, 7-rule flattened form, 5/5 facts; rules: {}",
        program.emit().trim().replace('\n', " ")
    ))
}

fn c4_oracles() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&common::arb_dataset(200, 6, 4), |data| {
            let target = data.label(0).to_string();
            let (pos, neg): (Vec<Vec<Value>>, Vec<Vec<Value>>) = {
                let mut p = Vec::new();
                let mut n = Vec::new();
                for i in 0..data.len() {
                    if data.label(i) == target {
                        p.push(data.row(i).to_vec());
                    } else {
                        n.push(data.row(i).to_vec());
                    }
                }
                (p, n)
            };
            for f in 0..data.n_features() {
                let mut values: Vec<Value> = data.rows().iter().map(|r| r[f].clone()).collect();
                values.sort();
                values.dedup();
                let mut expected: Vec<Literal> = Vec::new();
                for ops in [[Op::Le, Op::Gt], [Op::Eq, Op::Ne]] {
                    for op in ops {
                        for v in values.iter().filter(|v| v.is_num() == op.is_numeric()) {
                            expected.push(Literal::new(f, op, v.clone()));
                        }
                    }
                }
                let candidates = candidate_counts(&pos, &neg, f);
                let listed: Vec<Literal> = candidates.iter().map(|(l, _)| l.clone()).collect();
                if listed != expected {
                    return Err(TestCaseError::fail(format!("candidate set differs on feature {f}")));
                }
                for (lit, counts) in candidates {
                    let tp = pos.iter().filter(|r| lit.holds(r)).count();
                    let fp = neg.iter().filter(|r| lit.holds(r)).count();
                    if (counts.tp, counts.fn_, counts.tn, counts.fp)
                        != (tp, pos.len() - tp, neg.len() - fp, fp)
                    {
                        return Err(TestCaseError::fail(format!("counts differ for {lit}")));
                    }
                }
            }
            let model = fold_rm(&data, &TrainConfig::default());
            let program = Program::from_model(
                &model.rules,
                data.schema().to_vec(),
                data.label_name(),
                data.label_values(),
                0.5,
            );
            let flat = program.flatten();
            for row in data.rows() {
                let a = predict(&program, row).unwrap().label;
                let firing = flat.firing(row);
                if firing.len() > 1 {
                    return Err(TestCaseError::fail("two dispatch rules fire"));
                }
                if a.as_deref() != flat.predict(row) {
                    return Err(TestCaseError::fail("flattened prediction differs"));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 random datasets: counts match brute force, flatten agrees, <=1 dispatch fires".into())
}

fn accuracy_run(file: &str, label: &str) -> Result<(f64, f64, f64), Failure> {
    let data = common::load(file, label).ok_or_else(|| {
        Failure::Unavailable(format!("{file} not found in {}", common::data_dir().display()))
    })?;
    let start = Instant::now();
    let report = run_cv(&data, &CvConfig::default()).map_err(|e| e.to_string())?;
    Ok((
        report.mean.accuracy,
        report.mean.rule_count,
        start.elapsed().as_secs_f64(),
    ))
}

fn c5_accuracy(file: &str, label: &str, ok: impl Fn(f64) -> bool, band: &str) -> Outcome {
    let (acc, _, secs) = accuracy_run(file, label)?;
    check(secs <= 60.0, format!("took {secs:.1} s"))?;
    check(ok(acc), format!("accuracy {acc:.3}, expected {band}"))?;
    Ok(format!("accuracy {acc:.3} ({band}), {secs:.2} s"))
}

fn c6_rules(file: &str, label: &str, max: f64) -> Outcome {
    let (_, rules, _) = accuracy_run(file, label)?;
    check(rules <= max, format!("{rules:.1} rules > {max}"))?;
    Ok(format!("{rules:.1} rules on average (<= {max})"))
}

fn c7_termination() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&common::arb_any_dataset(120, 5), |data| {
            let m = fold_rm(&data, &TrainConfig::default());
            let s = &m.stats;
            if s.rm_iterations > s.examples
                || s.refinement_bound_violations != 0
                || s.rpp_bound_violations != 0
            {
                return Err(TestCaseError::fail(format!("bounds violated: {s:?}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 datasets (incl. identical rows, single class, noise) halt within bounds".into())
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace-insensitive, and the trailing bindings line case-insensitive.
fn same_listing(got: &str, want: &str) -> bool {
    let split = |s: &str| {
        let s = s.trim_end();
        let (body, last) = s.rsplit_once('\n').unwrap_or(("", s));
        (squash(body), squash(last).to_lowercase())
    };
    split(got) == split(want)
}

fn c8_justification() -> Outcome {
    let read = |n: &str| std::fs::read_to_string(common::fixture(n)).unwrap();
    let meta: Meta = serde_json::from_str(&read("anneal.meta.json")).unwrap();
    let program = Program::parse(&read("anneal.asp"), &meta).map_err(|e| e.to_string())?;
    check(
        program.rules.len() + program.abnormals.len() == 20,
        "program does not have 20 rules",
    )?;
    check(
        meta.features[32].name == "thick" && meta.features[32].kind == FeatureKind::Numerical,
        "thick is not numerical feature 32",
    )?;
    let table = parse_csv_with_schema(
        std::fs::File::open(common::fixture("anneal_example8.csv")).unwrap(),
        &program.schema,
        &program.target,
    )
    .map_err(|e| e.to_string())?;
    let row = &table.rows[0];
    let proof = foldrm::justify(&program, row, 8).map_err(|e| e.to_string())?.render();
    check(
        same_listing(&proof, &read("anneal_example8_proof.txt")),
        format!("proof tree differs:\n{proof}"),
    )?;
    let trace = foldrm::trace(&program, row).map_err(|e| e.to_string())?;
    check(
        same_listing(&trace, &read("anneal_example8_trace.txt")),
        format!("trace differs:\n{trace}"),
    )?;
    let reparsed = Program::parse(&program.emit(), &meta).map_err(|e| e.to_string())?;
    check(reparsed == program, "emitted program does not parse back identically")?;
    Ok("proof tree and [T]/[F] trace match".into())
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 information gain values", Box::new(c1_information_gain)),
        ("2 best literal on the worked example", Box::new(c2_best_literal)),
        ("3 habitat program and flattening", Box::new(c3_habitat)),
        ("4 oracle equivalence", Box::new(c4_oracles)),
        ("5 accuracy wine >= 0.89", Box::new(|| c5_accuracy("wine.csv", "class", |a| a >= 0.89, ">= 0.89"))),
        ("5 accuracy ecoli >= 0.75", Box::new(|| c5_accuracy("ecoli.csv", "class", |a| a >= 0.75, ">= 0.75"))),
        ("5 accuracy glass 0.63 +/- 0.07", Box::new(|| {
            c5_accuracy("glass.csv", "type", |a| (a - 0.63).abs() <= 0.07, "0.56..0.70")
        })),
        ("5 accuracy nursery >= 0.92", Box::new(|| c5_accuracy("nursery.csv", "class", |a| a >= 0.92, ">= 0.92"))),
        ("6 rule count wine <= 15", Box::new(|| c6_rules("wine.csv", "class", 15.0))),
        ("6 rule count ecoli <= 60", Box::new(|| c6_rules("ecoli.csv", "class", 60.0))),
        ("7 termination bounds", Box::new(c7_termination)),
        ("8 justification golden test", Box::new(c8_justification)),
    ];
    let mut failed = 0;
    let mut unavailable = 0;
    for (name, run) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                Err(Failure::Check(
                    p.downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panicked".into()),
                ))
            });
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(Failure::Check(why)) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
            Err(Failure::Unavailable(why)) => {
                unavailable += 1;
                println!("FAIL  criterion {name}: unavailable, {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed, {failed} failed, {unavailable} unavailable",
        criteria.len() - failed - unavailable,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
