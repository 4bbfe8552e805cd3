//! Test-only generators and brute-force oracles, kept independent of the
//! library code paths they check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hieroclf::dataset::{Corpus, DataPoint};
use hieroclf::mdc::SignCode;
use rand::seq::SliceRandom;
use rand::Rng;

/// A grammar-generated MdC string with the hieroglyphs (code, classifier) it contains.
#[derive(Debug, Clone)]
pub struct Sample {
    pub text: String,
    pub signs: Vec<(String, bool)>,
}

const DELIMS: [&str; 13] = ["-", ":", "\\", "\\\\", "\\\\\\\\", "_GROUPING_", "^", "&", "{", "}", ",", "*", "_"];
const MARKERS: [&str; 6] = ["#b-..#e", "#b", "#e", "[&", "&]", "."];

/// Random derivations of the MdC grammar, written straight from the production rules.
pub struct GrammarSampler<'r, R: Rng> {
    rng: &'r mut R,
    out: String,
    signs: Vec<(String, bool)>,
    max_depth: usize,
}

impl<'r, R: Rng> GrammarSampler<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        GrammarSampler { rng, out: String::new(), signs: Vec::new(), max_depth: 3 }
    }

    pub fn sample(mut self) -> Sample {
        // token : sequence (delimiters sequence)*
        self.sequence(0, false);
        for _ in 0..self.rng.gen_range(0..4) {
            self.delimiters();
            self.sequence(0, false);
        }
        Sample { text: self.out, signs: self.signs }
    }

    fn sequence(&mut self, depth: usize, inside: bool) {
        let choice = if depth >= self.max_depth { 3 } else { self.rng.gen_range(0..8) };
        match choice {
            0 => {
                self.out.push('(');
                self.sequence(depth + 1, inside);
                self.out.push(')');
            }
            1 => {
                self.out.push('~');
                self.sequence(depth + 1, !inside);
                self.out.push('~');
            }
            2 => {
                self.sequence(depth + 1, inside);
                self.delimiters();
                self.sequence(depth + 1, inside);
            }
            _ => self.classified_sign(inside),
        }
    }

    fn classified_sign(&mut self, inside: bool) {
        let tilde = self.rng.gen_bool(0.3);
        let code = self.code();
        if tilde {
            self.out.push('~');
        }
        self.out.push_str(&code);
        if tilde {
            self.out.push('~');
        }
        if !MARKERS.contains(&code.as_str()) {
            self.signs.push((code, inside ^ tilde));
        }
        if self.rng.gen_bool(0.2) {
            self.suffix();
        }
    }

    fn code(&mut self) -> String {
        let letters = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
        match self.rng.gen_range(0..10) {
            0 => MARKERS.choose(self.rng).unwrap().to_string(),
            1 => self.rng.gen_range(0..1000).to_string(),
            _ => {
                let mut s = String::new();
                for _ in 0..self.rng.gen_range(1..=2) {
                    s.push(*letters.choose(self.rng).unwrap() as char);
                }
                for _ in 0..self.rng.gen_range(0..=3) {
                    s.push(char::from(b'0' + self.rng.gen_range(0..10)));
                }
                if self.rng.gen_bool(0.2) {
                    s.push(*letters.choose(self.rng).unwrap() as char);
                }
                s
            }
        }
    }

    fn suffix(&mut self) {
        let lig = format!("{{{{{},{},{}}}}}", self.rng.gen_range(0..9), self.rng.gen_range(0..9), self.rng.gen_range(0..9));
        let dmg = format!("#{}", self.rng.gen_range(0..20));
        let s = match self.rng.gen_range(0..4) {
            0 => lig,
            1 => dmg,
            2 => lig + &dmg,
            _ => dmg + &lig,
        };
        self.out.push_str(&s);
    }

    fn delimiters(&mut self) {
        for _ in 0..self.rng.gen_range(1..=2) {
            let mut d = *DELIMS.choose(self.rng).unwrap();
            // `{{` would start a ligature suffix
            while d == "{" && self.out.ends_with('{') {
                d = DELIMS.choose(self.rng).unwrap();
            }
            self.out.push_str(d);
        }
    }
}

/// Turns a valid string into one the grammar rejects.
pub fn mutate_invalid<R: Rng>(rng: &mut R, valid: &str) -> String {
    let mut s = valid.to_string();
    match rng.gen_range(0..6) {
        // every derivation has an even number of tildes
        0 => match s.rfind('~') {
            Some(i) => {
                s.remove(i);
            }
            None => s.insert(rng.gen_range(0..=s.len()), '~'),
        },
        // parentheses only come in pairs
        1 => match s.find('(') {
            Some(i) if rng.gen_bool(0.5) => {
                s.remove(i);
            }
            _ => s.push_str(if rng.gen_bool(0.5) { "-(" } else { ")" }),
        },
        2 => {
            let bad = ["$", "@", "!", "%", "|", ";", "?", "=", "+", "'"].choose(rng).unwrap();
            let positions: Vec<usize> = (0..=s.len()).filter(|&i| s.is_char_boundary(i)).collect();
            s.insert_str(*positions.choose(rng).unwrap(), bad);
        }
        3 => s.push('-'),
        4 => s.insert(0, ':'),
        _ => s.push_str("--~"),
    }
    s
}

pub fn code(text: &str) -> SignCode {
    SignCode::new(text).unwrap()
}

/// Distinct data points over `n_codes` sign codes `X0..`; codes below `n_clf` are always classifiers.
pub fn synthetic_corpus<R: Rng>(rng: &mut R, n_types: usize, n_codes: usize, n_clf: usize, max_len: usize) -> Corpus {
    let mut seen = BTreeSet::new();
    let mut points = Vec::new();
    while points.len() < n_types {
        let len = rng.gen_range(1..=max_len);
        let idx: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n_codes)).collect();
        if !seen.insert(idx.clone()) {
            continue;
        }
        let signs = idx.iter().map(|i| code(&format!("X{i}"))).collect();
        let labels = idx.iter().map(|&i| i < n_clf).collect();
        points.push(DataPoint::from_parts(signs, labels));
    }
    Corpus::new("synthetic", points)
}

/// Points with random codes and random labels, duplicates allowed.
pub fn random_corpus<R: Rng>(rng: &mut R, n_points: usize, n_codes: usize, max_len: usize) -> Corpus {
    let points = (0..n_points)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let signs = (0..len).map(|_| code(&format!("S{}", rng.gen_range(0..n_codes)))).collect();
            let labels = (0..len).map(|_| rng.gen_bool(0.4)).collect();
            DataPoint::from_parts(signs, labels)
        })
        .collect();
    Corpus::new("random", points)
}

/// Brute-force tally: for every sign text, (classifier count, non-classifier count).
pub fn tally(corpus: &Corpus) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in &corpus.points {
        for i in 0..p.signs.len() {
            let e = out.entry(p.signs[i].as_str().to_string()).or_insert((0, 0));
            if p.labels[i] {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    out
}

/// Top-N by repeated selection of the remaining maximum (smallest code on ties).
pub fn oracle_top_n(t: &BTreeMap<String, (usize, usize)>, n: usize) -> BTreeSet<String> {
    let mut chosen = BTreeSet::new();
    for _ in 0..n {
        let mut best: Option<(&String, usize)> = None;
        for (s, &(clf, _)) in t {
            if clf == 0 || chosen.contains(s) {
                continue;
            }
            match best {
                Some((_, b)) if clf <= b => {}
                _ => best = Some((s, clf)),
            }
        }
        match best {
            Some((s, _)) => {
                chosen.insert(s.clone());
            }
            None => break,
        }
    }
    chosen
}

pub fn oracle_clf_only(t: &BTreeMap<String, (usize, usize)>) -> BTreeSet<String> {
    t.iter().filter(|(_, &(c, n))| c > 0 && n == 0).map(|(s, _)| s.clone()).collect()
}

pub fn oracle_clf_majority(t: &BTreeMap<String, (usize, usize)>) -> BTreeSet<String> {
    t.iter().filter(|(_, &(c, n))| c > n).map(|(s, _)| s.clone()).collect()
}

/// Per-point Hamming distances between gold labels and predictions.
pub fn oracle_hamming(gold: &Corpus, predictions: &[Vec<bool>]) -> Vec<usize> {
    let mut out = Vec::new();
    for (p, pred) in gold.points.iter().zip(predictions) {
        out.push((0..p.labels.len()).filter(|&i| p.labels[i] != pred[i]).count());
    }
    out
}
