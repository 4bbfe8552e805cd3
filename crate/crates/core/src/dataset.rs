//! Annotated corpora: loading, type deduplication, seeded splits and statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdc::{self, ParseError, SignCode};

/// One wordform with per-sign classifier labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPoint {
    pub id: Option<String>,
    pub raw: String,
    pub signs: Vec<SignCode>,
    pub labels: Vec<bool>,
}

impl DataPoint {
    /// Parses an annotated MdC string.
    pub fn from_mdc(raw: &str) -> Result<Self, ParseError> {
        let (signs, labels) = mdc::flatten(raw)?.into_iter().unzip();
        Ok(DataPoint { id: None, raw: raw.trim().to_string(), signs, labels })
    }

    /// A point built directly from aligned signs and labels; `raw` is the tilde-pair rendering.
    pub fn from_parts(signs: Vec<SignCode>, labels: Vec<bool>) -> Self {
        assert_eq!(signs.len(), labels.len(), "signs and labels must align");
        let raw = signs
            .iter()
            .zip(&labels)
            .map(|(s, &l)| if l { format!("~{s}~") } else { s.to_string() })
            .collect::<Vec<_>>()
            .join("-");
        DataPoint { id: None, raw, signs, labels }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn classifier_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub points: Vec<DataPoint>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {source}")]
    Format { line: usize, source: ParseError },
    #[error("line {line}: no signs left after removing markers")]
    Empty { line: usize },
    #[error("cannot read `{token}` as a labelled sign")]
    Labelled { token: String },
    #[error("invalid split ratios {0:?}: each must be positive and they must sum to 1")]
    Ratios([f64; 3]),
}

impl Corpus {
    pub fn new(name: impl Into<String>, points: Vec<DataPoint>) -> Self {
        Corpus { name: name.into(), points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses corpus text: one record per line, `<mdc>` or `<id>\t<mdc>`; blank lines are skipped.
    pub fn parse_str(name: impl Into<String>, text: &str) -> Result<Self, DatasetError> {
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (id, mdc_text) = match line.split_once('\t') {
                Some((id, rest)) => (Some(id.trim().to_string()), rest),
                None => (None, line),
            };
            let mut point = DataPoint::from_mdc(mdc_text).map_err(|source| DatasetError::Format { line: line_no, source })?;
            if point.is_empty() {
                return Err(DatasetError::Empty { line: line_no });
            }
            point.id = id;
            points.push(point);
        }
        Ok(Corpus::new(name, points))
    }

    /// Writes the corpus back in the line format read by [`load_corpus`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            match &p.id {
                Some(id) => writeln!(out, "{id}\t{}", p.raw),
                None => writeln!(out, "{}", p.raw),
            }
            .unwrap();
        }
        out
    }

    pub fn total_classifiers(&self) -> usize {
        self.points.iter().map(DataPoint::classifier_count).sum()
    }

    pub fn total_signs(&self) -> usize {
        self.points.iter().map(DataPoint::len).sum()
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let name = path.file_stem().map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned());
    Corpus::parse_str(name, &text)
}

/// Keeps the first occurrence of every distinct (signs, labels) pair.
pub fn dedup_types(corpus: &Corpus) -> Corpus {
    let mut seen = HashSet::new();
    let points = corpus
        .points
        .iter()
        .filter(|p| seen.insert((&p.signs, &p.labels)))
        .cloned()
        .collect();
    Corpus::new(corpus.name.clone(), points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { seed: 0, ratios: [0.8, 0.1, 0.1] }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let ok = self.ratios.iter().all(|r| r.is_finite() && *r > 0.0)
            && (self.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(DatasetError::Ratios(self.ratios))
        }
    }

    /// (train, dev, test) sizes for `n` points: dev and test are floored, the remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let dev = (n as f64 * self.ratios[1]).floor() as usize;
        let test = (n as f64 * self.ratios[2]).floor() as usize;
        (n - dev - test, dev, test)
    }
}

pub struct Split {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

/// Uniformly shuffles with a ChaCha generator seeded from `spec.seed` and cuts into three parts.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split, DatasetError> {
    spec.validate()?;
    let (n_train, n_dev, _) = spec.sizes(corpus.len());
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let take = |range: &[usize], part: &str| {
        Corpus::new(
            format!("{}.{part}", corpus.name),
            range.iter().map(|&i| corpus.points[i].clone()).collect(),
        )
    };
    Ok(Split {
        train: take(&order[..n_train], "train"),
        dev: take(&order[n_train..n_train + n_dev], "dev"),
        test: take(&order[n_train + n_dev..], "test"),
    })
}

/// Number of points with exactly k classifiers, for every k from 0 to the maximum observed.
pub fn clf_histogram(corpus: &Corpus) -> BTreeMap<usize, usize> {
    let counts: Vec<usize> = corpus.points.iter().map(DataPoint::classifier_count).collect();
    let mut hist: BTreeMap<usize, usize> = match counts.iter().max() {
        Some(&max) => (0..=max).map(|k| (k, 0)).collect(),
        None => BTreeMap::new(),
    };
    for k in counts {
        *hist.entry(k).or_default() += 1;
    }
    hist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputStyle {
    /// `U33 ~D56~`
    TildePair,
    /// `U33 D56~`
    TildeSuffix,
    /// `0 1`
    Binary,
}

impl std::str::FromStr for OutputStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tilde-pair" | "tilde_pair" => Ok(OutputStyle::TildePair),
            "tilde-suffix" | "tilde_suffix" => Ok(OutputStyle::TildeSuffix),
            "binary" => Ok(OutputStyle::Binary),
            other => Err(format!("unknown output style `{other}`")),
        }
    }
}

pub fn format_labels(signs: &[SignCode], labels: &[bool], style: OutputStyle) -> String {
    let fields: Vec<String> = signs
        .iter()
        .zip(labels)
        .map(|(s, &l)| match (style, l) {
            (OutputStyle::Binary, l) => u8::from(l).to_string(),
            (OutputStyle::TildePair, true) => format!("~{s}~"),
            (OutputStyle::TildeSuffix, true) => format!("{s}~"),
            (_, false) => s.to_string(),
        })
        .collect();
    fields.join(" ")
}

pub fn format_output(point: &DataPoint, style: OutputStyle) -> String {
    format_labels(&point.signs, &point.labels, style)
}

/// Reads back the output of [`format_labels`] for the two styles that carry sign codes.
pub fn parse_formatted(text: &str, style: OutputStyle) -> Result<DataPoint, DatasetError> {
    let mut signs = Vec::new();
    let mut labels = Vec::new();
    for token in text.split_whitespace() {
        let bad = || DatasetError::Labelled { token: token.to_string() };
        let (code, label) = match style {
            OutputStyle::Binary => return Err(bad()),
            OutputStyle::TildePair => match token.strip_prefix('~').and_then(|t| t.strip_suffix('~')) {
                Some(inner) => (inner, true),
                None => (token, false),
            },
            OutputStyle::TildeSuffix => match token.strip_suffix('~') {
                Some(inner) => (inner, true),
                None => (token, false),
            },
        };
        signs.push(SignCode::new(code).map_err(|_| bad())?);
        labels.push(label);
    }
    Ok(DataPoint::from_parts(signs, labels))
}

/// Summary printed by the `stats` command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub tokens: usize,
    pub types: usize,
    pub signs: usize,
    pub classifiers: usize,
    pub sign_vocab: usize,
    pub histogram: BTreeMap<usize, usize>,
}

impl CorpusStats {
    /// Statistics over the raw corpus; the histogram is computed over types.
    pub fn compute(corpus: &Corpus) -> Self {
        let types = dedup_types(corpus);
        let vocab: HashSet<&SignCode> = corpus.points.iter().flat_map(|p| &p.signs).collect();
        CorpusStats {
            tokens: corpus.len(),
            types: types.len(),
            signs: types.total_signs(),
            classifiers: types.total_classifiers(),
            sign_vocab: vocab.len(),
            histogram: clf_histogram(&types),
        }
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tokens\t{}", self.tokens)?;
        writeln!(f, "types\t{}", self.types)?;
        writeln!(f, "signs\t{}", self.signs)?;
        writeln!(f, "classifiers\t{}", self.classifiers)?;
        writeln!(f, "sign_vocab\t{}", self.sign_vocab)?;
        for (k, n) in &self.histogram {
            writeln!(f, "clf_count.{k}\t{n}")?;
        }
        Ok(())
    }
}
