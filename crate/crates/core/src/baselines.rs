//! Sign-frequency baselines: Top-N, CLF-only and CLF-majority.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::Corpus;
use crate::eval::{self, EvalReport};
use crate::mdc::SignCode;

pub const DEFAULT_TOP_N_CANDIDATES: [usize; 6] = [5, 10, 20, 30, 50, 100];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SignCounts {
    pub clf: usize,
    pub non_clf: usize,
}

/// Per-sign tallies of classifier and non-classifier occurrences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignFrequencyTable {
    counts: BTreeMap<SignCode, SignCounts>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("frequency table line {line}: {reason}")]
pub struct TableFormatError {
    pub line: usize,
    pub reason: String,
}

impl SignFrequencyTable {
    pub fn fit(train: &Corpus) -> Self {
        let mut counts: BTreeMap<SignCode, SignCounts> = BTreeMap::new();
        for p in &train.points {
            for (sign, &label) in p.signs.iter().zip(&p.labels) {
                let c = counts.entry(sign.clone()).or_default();
                if label {
                    c.clf += 1;
                } else {
                    c.non_clf += 1;
                }
            }
        }
        SignFrequencyTable { counts }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (SignCode, SignCounts)>) -> Self {
        SignFrequencyTable { counts: counts.into_iter().collect() }
    }

    pub fn get(&self, sign: &SignCode) -> SignCounts {
        self.counts.get(sign).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SignCode, &SignCounts)> {
        self.counts.iter()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Tab-separated `sign clf_count non_clf_count`, sorted by sign.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sign\tclf_count\tnon_clf_count\n");
        for (s, c) in &self.counts {
            writeln!(out, "{s}\t{}\t{}", c.clf, c.non_clf).unwrap();
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, TableFormatError> {
        let mut counts = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let err = |reason: &str| TableFormatError { line: idx + 1, reason: reason.into() };
            if idx == 0 && line.starts_with("sign\t") || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [sign, clf, non] = fields[..] else {
                return Err(err("expected three tab-separated fields"));
            };
            let sign = SignCode::new(sign).map_err(|e| err(&e.to_string()))?;
            let clf = clf.parse().map_err(|_| err("bad clf_count"))?;
            let non_clf = non.parse().map_err(|_| err("bad non_clf_count"))?;
            counts.insert(sign, SignCounts { clf, non_clf });
        }
        Ok(SignFrequencyTable { counts })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineRule {
    TopN(usize),
    ClfOnly,
    ClfMajority,
}

impl BaselineRule {
    pub fn name(&self) -> String {
        match self {
            BaselineRule::TopN(n) => format!("Top-{n} CLF"),
            BaselineRule::ClfOnly => "CLF only".into(),
            BaselineRule::ClfMajority => "CLF majority".into(),
        }
    }
}

/// Marks a sign as a classifier iff it belongs to `marked`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselinePredictor {
    pub rule: BaselineRule,
    pub marked: BTreeSet<SignCode>,
}

impl BaselinePredictor {
    pub fn new(rule: BaselineRule, table: &SignFrequencyTable) -> Self {
        match rule {
            BaselineRule::TopN(n) => top_n(table, n),
            BaselineRule::ClfOnly => clf_only(table),
            BaselineRule::ClfMajority => clf_majority(table),
        }
    }

    pub fn predict(&self, signs: &[SignCode]) -> Vec<bool> {
        signs.iter().map(|s| self.marked.contains(s)).collect()
    }

    pub fn predict_corpus(&self, corpus: &Corpus) -> Vec<Vec<bool>> {
        corpus.points.iter().map(|p| self.predict(&p.signs)).collect()
    }

    pub fn evaluate(&self, corpus: &Corpus) -> EvalReport {
        eval::score(corpus, &self.predict_corpus(corpus)).expect("baseline predictions match gold lengths")
    }
}

/// The `n` signs with the highest classifier count; ties go to the lexicographically smaller code.
/// Signs never seen as classifiers are not marked.
pub fn top_n(table: &SignFrequencyTable, n: usize) -> BaselinePredictor {
    let mut ranked: Vec<(&SignCode, usize)> =
        table.counts.iter().filter(|(_, c)| c.clf > 0).map(|(s, c)| (s, c.clf)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    BaselinePredictor {
        rule: BaselineRule::TopN(n),
        marked: ranked.into_iter().take(n).map(|(s, _)| s.clone()).collect(),
    }
}

pub fn clf_only(table: &SignFrequencyTable) -> BaselinePredictor {
    BaselinePredictor {
        rule: BaselineRule::ClfOnly,
        marked: table.counts.iter().filter(|(_, c)| c.clf > 0 && c.non_clf == 0).map(|(s, _)| s.clone()).collect(),
    }
}

pub fn clf_majority(table: &SignFrequencyTable) -> BaselinePredictor {
    BaselinePredictor {
        rule: BaselineRule::ClfMajority,
        marked: table.counts.iter().filter(|(_, c)| c.clf > c.non_clf).map(|(s, _)| s.clone()).collect(),
    }
}

/// Candidate with the lowest dev error; ties go to the smaller N.
pub fn select_top_n(table: &SignFrequencyTable, dev: &Corpus, candidates: &[usize]) -> usize {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, usize)> = None;
    for n in sorted {
        let errors = top_n(table, n).evaluate(dev).total_sign_errors;
        if best.is_none_or(|(_, e)| errors < e) {
            best = Some((n, errors));
        }
    }
    best.expect("at least one Top-N candidate").0
}

/// A rule family before Top-N has been tuned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleChoice {
    TopN(Vec<usize>),
    ClfOnly,
    ClfMajority,
}

impl std::str::FromStr for RuleChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top-n" | "top_n" => Ok(RuleChoice::TopN(DEFAULT_TOP_N_CANDIDATES.to_vec())),
            "clf-only" | "clf_only" => Ok(RuleChoice::ClfOnly),
            "clf-majority" | "clf_majority" => Ok(RuleChoice::ClfMajority),
            other => Err(format!("unknown baseline rule `{other}`")),
        }
    }
}

/// Fixes the rule, picking N on `dev` for Top-N.
pub fn resolve_rule(choice: &RuleChoice, table: &SignFrequencyTable, dev: &Corpus) -> BaselineRule {
    match choice {
        RuleChoice::TopN(candidates) => BaselineRule::TopN(select_top_n(table, dev, candidates)),
        RuleChoice::ClfOnly => BaselineRule::ClfOnly,
        RuleChoice::ClfMajority => BaselineRule::ClfMajority,
    }
}
