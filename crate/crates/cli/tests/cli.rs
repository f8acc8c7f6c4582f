use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HABITAT: &str = "\
name,mammal,cat,whale,bear,dog,fish,clownfish,habitat
charlie,true,false,false,false,true,false,false,land
john,true,false,true,false,false,false,false,water
smoky,true,false,false,true,false,false,false,land
nemo,false,false,false,false,false,true,true,water
kitty,true,true,false,false,false,false,false,land
";

fn foldrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foldrm"))
        .args(args)
        .env_remove("FOLDRM_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_file(name: &str) -> Option<PathBuf> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    p.exists().then_some(p)
}

/// Habitat facts without the identifier column.
fn habitat(dir: &Path) -> PathBuf {
    let path = dir.join("habitat.csv");
    let text: String = HABITAT
        .lines()
        .map(|l| format!("{}\n", l.split_once(',').unwrap().1))
        .collect();
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_then_predict_reproduces_the_facts() {
    let dir = tempfile::tempdir().unwrap();
    let data = habitat(dir.path());
    let prefix = dir.path().join("habitat");
    let o = foldrm(&["train", "--data", s(&data), "--label", "habitat", "--out", s(&prefix)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("learned 3 rules"));

    let asp = std::fs::read_to_string(dir.path().join("habitat.asp")).unwrap();
    assert!(asp.starts_with('%'), "order header missing");
    assert!(asp.contains("ab1(X)"));
    assert!(dir.path().join("habitat.meta.json").exists());
    assert!(!dir.path().join("habitat.flat.asp").exists());

    let o = foldrm(&["predict", "--model", s(&prefix), "--data", s(&data)]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "row,habitat\n0,land\n1,water\n2,land\n3,water\n4,land\n"
    );
}

#[test]
fn flatten_writes_the_exclusive_form() {
    let dir = tempfile::tempdir().unwrap();
    let data = habitat(dir.path());
    let prefix = dir.path().join("m");
    let o = foldrm(&["train", "--data", s(&data), "--label", "habitat", "--out", s(&prefix), "--flatten"]);
    assert!(o.status.success());
    let flat = std::fs::read_to_string(dir.path().join("m.flat.asp")).unwrap();
    assert!(flat.contains("not habitat_1(X)"), "{flat}");
    // the ordered model stays loadable
    let o = foldrm(&["predict", "--model", dir.path().join("m.asp").to_str().unwrap(), "--data", s(&data)]);
    assert!(o.status.success());
}

#[test]
fn empty_data_gives_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = habitat(dir.path());
    let prefix = dir.path().join("m");
    assert!(foldrm(&["train", "--data", s(&data), "--label", "habitat", "--out", s(&prefix)]).status.success());
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = foldrm(&["predict", "--model", s(&prefix), "--data", s(&empty)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "");
}

#[test]
fn schema_mismatch_names_the_feature() {
    let dir = tempfile::tempdir().unwrap();
    let data = habitat(dir.path());
    let prefix = dir.path().join("m");
    assert!(foldrm(&["train", "--data", s(&data), "--label", "habitat", "--out", s(&prefix)]).status.success());
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "mammal,cat\ntrue,false\n").unwrap();
    let o = foldrm(&["predict", "--model", s(&prefix), "--data", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("whale"));
}

#[test]
fn explain_prints_tree_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = habitat(dir.path());
    let prefix = dir.path().join("m");
    assert!(foldrm(&["train", "--data", s(&data), "--label", "habitat", "--out", s(&prefix)]).status.success());
    let o = foldrm(&["explain", "--model", s(&prefix), "--data", s(&data), "--row", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("Proof Tree for example number 1 :\nthe value of habitat is water DOES HOLD because\n"), "{text}");
    assert!(text.contains("[T]habitat(X,water)"), "{text}");

    let o = foldrm(&["explain", "--model", s(&prefix), "--data", s(&data), "--row", "9"]);
    assert_eq!(o.status.code(), Some(2));
    let o = foldrm(&["explain", "--model", s(&prefix), "--data", s(&data), "--row", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unexplained_row_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.csv");
    std::fs::write(&data, "c,y\na,p\na,p\nb,q\nb,q\n").unwrap();
    let prefix = dir.path().join("m");
    assert!(foldrm(&["train", "--data", s(&data), "--label", "y", "--out", s(&prefix)]).status.success());
    let odd = dir.path().join("odd.csv");
    std::fs::write(&odd, "c\nz\n").unwrap();
    let o = foldrm(&["predict", "--model", s(&prefix), "--data", s(&odd)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "row,y\n0,\n");
    let o = foldrm(&["explain", "--model", s(&prefix), "--data", s(&odd), "--row", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("the value of y is p DOES NOT HOLD because"), "{text}");
    assert!(text.contains("the value of y is q DOES NOT HOLD because"), "{text}");
    assert!(text.contains("[F]y(X,q) :- [F]c(X,'b').\n"), "{text}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = habitat(dir.path());
    let out = dir.path().join("m");
    let o = foldrm(&["train", "--data", s(&data), "--label", "colour", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    let o = foldrm(&["train", "--data", s(&data), "--label", "habitat", "--ratio", "1.5", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = foldrm(&["eval", "--data", s(&data), "--label", "habitat", "--folds", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = foldrm(&["train", "--data", s(&dir.path().join("missing.csv")), "--label", "habitat", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_is_deterministic_and_writes_csv() {
    let Some(wine) = data_file("wine.csv") else {
        eprintln!("wine.csv not available, skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("report.csv");
    let run = |extra: &[&str]| {
        let mut args = vec!["eval", "--data", s(&wine), "--label", "class", "--repeats", "3"];
        args.extend_from_slice(extra);
        let o = foldrm(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    // drop the timing column
    let strip = |t: String| -> Vec<String> {
        t.lines().map(|l| l.rsplit_once(' ').unwrap().0.trim_end().to_string()).collect()
    };
    let a = strip(run(&["--out", s(&csv)]));
    assert_eq!(a, strip(run(&[])));
    assert_ne!(a, strip(run(&["--seed", "7"])));
    let report = std::fs::read_to_string(&csv).unwrap();
    assert!(report.starts_with("dataset,acc,p,r,f1,rules,train_ms\nwine,"));

    let o = Command::new(env!("CARGO_BIN_EXE_foldrm"))
        .args(["eval", "--data", s(&wine), "--label", "class", "--repeats", "3"])
        .env("FOLDRM_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(strip(stdout(&o)), strip(run(&["--seed", "7"])));
}

#[test]
fn ecoli_eval_lands_near_reported_accuracy() {
    let Some(ecoli) = data_file("ecoli.csv") else {
        eprintln!("ecoli.csv not available, skipping");
        return;
    };
    let o = foldrm(&["eval", "--data", s(&ecoli), "--label", "class", "--folds", "10", "--seed", "42"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let acc: f64 = text.lines().nth(1).unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(acc >= 0.75, "{acc}");
}
