use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hieroclf::dataset::{load_corpus, parse_formatted, OutputStyle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn hieroclf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hieroclf")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .to_string()
}

/// MdC lines over codes X0..X{n_codes}; codes below `n_clf` are always classifiers.
fn write_synthetic(path: &Path, seed: u64, n: usize, n_codes: usize, n_clf: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut lines = Vec::new();
    while lines.len() < n {
        let len = rng.gen_range(1..=6);
        let idx: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n_codes)).collect();
        if seen.insert(idx.clone()) {
            let signs: Vec<String> =
                idx.iter().map(|&i| if i < n_clf { format!("~X{i}~") } else { format!("X{i}") }).collect();
            lines.push(signs.join("-"));
        }
    }
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn parse_rows_and_errors() {
    let dir = TempDir::new().unwrap();
    let o = hieroclf(&["parse", "~D54~"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "D54 1\n");

    let o = hieroclf(&["parse", "U33-Z4-D21-Z1-D21-Z1-~D56~-~D54~"], dir.path());
    let rows: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[5..], ["Z1 0", "D56 1", "D54 1"]);

    fs::write(dir.path().join("in.txt"), "A1-B1\n~A1\n").unwrap();
    let o = hieroclf(&["parse", "--input", "in.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("byte"), "{err}");
}

#[test]
fn usage_exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(hieroclf(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(hieroclf(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(hieroclf(&["stats"], dir.path()).status.code(), Some(1));
    assert_eq!(hieroclf(&["stats", "missing.txt"], dir.path()).status.code(), Some(2));
    assert_eq!(hieroclf(&["split", "x", "--out-dir", "o", "--dev-ratio", "0.7", "--test-ratio", "0.7"], dir.path()).status.code(), Some(1));
}

#[test]
fn stats_and_split() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.txt"), "A1\nA1\n~A1~-B2\nB2-~C3~-~D4~\n").unwrap();
    let o = stdout(&hieroclf(&["stats", "c.txt"], dir.path()));
    for line in ["tokens\t4", "types\t3", "sign_vocab\t4", "clf_count.0\t1", "clf_count.1\t1", "clf_count.2\t1"] {
        assert!(o.lines().any(|l| l == line), "{line} missing from\n{o}");
    }

    write_synthetic(&dir.path().join("big.txt"), 1, 300, 20, 5);
    let run = |out: &str| {
        let o = hieroclf(&["split", "big.txt", "--out-dir", out, "--seed", "4"], dir.path());
        assert!(o.status.success());
        stdout(&o)
    };
    let report = run("a");
    run("b");
    assert!(report.contains("train\t240\ndev\t30\ntest\t30"), "{report}");
    for f in ["train.txt", "dev.txt", "test.txt"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    assert!(fs::read_to_string(dir.path().join("a/split.conf")).unwrap().contains("seed=4"));
}

#[test]
fn baseline_matches_brute_force_pipeline() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut corpus_lines = |n: usize| -> String {
        (0..n)
            .map(|_| {
                let len = rng.gen_range(1..5);
                (0..len)
                    .map(|_| {
                        let c = rng.gen_range(0..8);
                        if rng.gen_bool(0.3) { format!("~S{c}~") } else { format!("S{c}") }
                    })
                    .collect::<Vec<_>>()
                    .join("-")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    fs::write(dir.path().join("train.txt"), corpus_lines(60)).unwrap();
    fs::write(dir.path().join("dev.txt"), corpus_lines(20)).unwrap();

    let o = hieroclf(&["baseline", "--train", "train.txt", "--dev", "dev.txt", "--rule", "clf-only"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);

    // independent recomputation: tally, mark, count mismatches
    let train = load_corpus(dir.path().join("train.txt")).unwrap();
    let dev = load_corpus(dir.path().join("dev.txt")).unwrap();
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in &train.points {
        for (s, &l) in p.signs.iter().zip(&p.labels) {
            let e = tally.entry(s.to_string()).or_default();
            if l { e.0 += 1 } else { e.1 += 1 }
        }
    }
    let marked: BTreeSet<&String> = tally.iter().filter(|(_, &(c, n))| c > 0 && n == 0).map(|(s, _)| s).collect();
    let errors: usize = dev
        .points
        .iter()
        .flat_map(|p| p.signs.iter().zip(&p.labels))
        .filter(|(s, &l)| marked.contains(&s.to_string()) != l)
        .count();
    assert_eq!(kv(&out, "clf_only.dev.total_sign_errors"), errors.to_string());
    assert_eq!(kv(&out, "clf_only.dev.mean_errors_per_point"), format!("{:.6}", errors as f64 / dev.len() as f64));
    assert!(out.contains("CLF only"));

    let o = hieroclf(
        &["baseline", "--train", "train.txt", "--dev", "dev.txt", "--rule", "top-n", "--top-n-candidates", "5"],
        dir.path(),
    );
    let out = stdout(&o);
    assert_eq!(kv(&out, "top_n.selected"), "5");
    assert!(out.contains("Top-5 CLF"));
}

#[test]
fn predict_with_baseline_table() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("empty.tsv"), "sign\tclf_count\tnon_clf_count\n").unwrap();
    let o = hieroclf(&["predict", "--table", "empty.tsv", "A1"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "A1 0\n");
    assert!(String::from_utf8_lossy(&o.stderr).contains("# table=empty.tsv"));

    fs::write(dir.path().join("t.tsv"), "sign\tclf_count\tnon_clf_count\nD54\t3\t0\nZ1\t1\t4\n").unwrap();
    let o = hieroclf(&["predict", "--table", "t.tsv", "--format", "tilde-suffix", "U33-Z1-D54"], dir.path());
    let line = stdout(&o);
    assert_eq!(line.trim(), "U33 Z1 D54~");
    let back = parse_formatted(line.trim(), OutputStyle::TildeSuffix).unwrap();
    assert_eq!(back.labels, [false, false, true]);

    let o = hieroclf(&["predict", "--table", "t.tsv", "--rule", "top-n", "A1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    write_synthetic(&dir.path().join("c.txt"), 2, 50, 10, 3);
    fs::write(dir.path().join("run.conf"), "# split settings\ncorpus = c.txt\nout_dir = out\nseed = 5\n").unwrap();
    let o = hieroclf(&["--config", "run.conf", "split", "--seed", "7"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("# seed=7") && out.contains("# corpus=c.txt"), "{out}");
    fs::write(dir.path().join("bad.conf"), "seed 5\n").unwrap();
    assert_eq!(hieroclf(&["--config", "bad.conf", "split"], dir.path()).status.code(), Some(1));
}

#[test]
fn train_is_deterministic_and_learns() {
    let dir = TempDir::new().unwrap();
    write_synthetic(&dir.path().join("c.txt"), 3, 2000, 40, 12);
    assert!(hieroclf(&["split", "c.txt", "--out-dir", "s"], dir.path()).status.success());
    // same arguments, separate working directories
    let train = |run: &str| {
        let cwd = dir.path().join(run);
        fs::create_dir(&cwd).unwrap();
        let o = hieroclf(
            &["train", "--train", "../s/train.txt", "--dev", "../s/dev.txt", "--test", "../s/test.txt", "--out", "m.ckpt", "--seed", "1"],
            &cwd,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let report = train("a");
    assert_eq!(train("b"), report);
    assert!(report.contains("LSTM sign"));
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a/m.ckpt"), read("b/m.ckpt"));
    assert_eq!(read("a/m.ckpt.history.tsv"), read("b/m.ckpt.history.tsv"));

    let o = hieroclf(&["eval", "--checkpoint", "a/m.ckpt", "--gold", "s/test.txt"], dir.path());
    let err: f64 = kv(&stdout(&o), "eval.mean_errors_per_point").parse().unwrap();
    assert!(err <= 0.05, "test error {err}");

    let o = hieroclf(&["predict", "--checkpoint", "a/m.ckpt", "--format", "binary", "X0-X20"], dir.path());
    assert_eq!(stdout(&o), "1 0\n");
}
