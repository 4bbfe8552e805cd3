//! Char-level and sign-level vocabularies for the sequence models.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::Corpus;
use crate::mdc::SignCode;

pub const PAD: u32 = 0;
pub const SOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Stands between signs in char-level input so sign boundaries survive tokenisation.
pub const SIGN_SEPARATOR: &str = "_";

const FORMAT_TAG: &str = "hieroclf-vocab";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VocabKind {
    Char,
    Sign,
}

impl VocabKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VocabKind::Char => "char",
            VocabKind::Sign => "sign",
        }
    }
}

impl FromStr for VocabKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" => Ok(VocabKind::Char),
            "sign" => Ok(VocabKind::Sign),
            other => Err(format!("unknown vocabulary kind `{other}`")),
        }
    }
}

/// What to emit for out-of-vocabulary input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Unk,
    /// Maps unknown tokens to SOS, as the original experiments did.
    Sos,
}

impl FromStr for OovPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unk" => Ok(OovPolicy::Unk),
            "sos" => Ok(OovPolicy::Sos),
            other => Err(format!("unknown OOV policy `{other}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("token id {id} out of range for vocabulary of size {size}")]
    Range { id: u32, size: usize },
    #[error("malformed vocabulary file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    kind: VocabKind,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn empty(kind: VocabKind) -> Self {
        let mut v = Vocabulary { kind, tokens: Vec::new(), index: HashMap::new() };
        for t in RESERVED {
            v.insert(t);
        }
        v
    }

    fn insert(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Tokens in order of first occurrence over the training corpus.
    pub fn build(train: &Corpus, kind: VocabKind) -> Self {
        let mut v = Vocabulary::empty(kind);
        for point in &train.points {
            for piece in v.pieces(&point.signs) {
                v.insert(&piece);
            }
        }
        v
    }

    /// Surface tokens for a sign sequence, before id lookup.
    fn pieces(&self, signs: &[SignCode]) -> Vec<String> {
        match self.kind {
            VocabKind::Sign => signs.iter().map(|s| s.to_string()).collect(),
            VocabKind::Char => {
                let mut out = Vec::new();
                for (i, s) in signs.iter().enumerate() {
                    if i > 0 {
                        out.push(SIGN_SEPARATOR.to_string());
                    }
                    out.extend(s.as_str().chars().map(String::from));
                }
                out
            }
        }
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `SOS tokens... EOS`, with unknown tokens mapped according to `oov`.
    pub fn encode(&self, signs: &[SignCode], oov: OovPolicy) -> Vec<u32> {
        let fallback = match oov {
            OovPolicy::Unk => UNK,
            OovPolicy::Sos => SOS,
        };
        let mut ids = vec![SOS];
        ids.extend(self.pieces(signs).iter().map(|p| self.id(p).unwrap_or(fallback)));
        ids.push(EOS);
        ids
    }

    pub fn decode(&self, ids: &[u32]) -> Result<Vec<String>, VocabError> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .map(str::to_string)
                    .ok_or(VocabError::Range { id, size: self.len() })
            })
            .collect()
    }

    /// Decodes and regroups into sign codes, dropping reserved tokens.
    pub fn decode_signs(&self, ids: &[u32]) -> Result<Vec<String>, VocabError> {
        let tokens = self.decode(ids)?;
        let content = ids.iter().zip(tokens).filter(|(&id, _)| id > UNK).map(|(_, t)| t);
        Ok(match self.kind {
            VocabKind::Sign => content.collect(),
            VocabKind::Char => {
                let joined: String = content.collect();
                joined.split(SIGN_SEPARATOR).filter(|s| !s.is_empty()).map(str::to_string).collect()
            }
        })
    }

    /// Header line `hieroclf-vocab 1 <kind> <size>`, then one token per line in id order.
    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_TAG} {FORMAT_VERSION} {} {}\n", self.kind.as_str(), self.len());
        for t in &self.tokens {
            writeln!(out, "{t}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let bad = |m: &str| VocabError::Format(m.to_string());
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("missing header"))?.split(' ').collect();
        let [tag, version, kind, size] = header[..] else {
            return Err(bad("header must have four fields"));
        };
        if tag != FORMAT_TAG || version != FORMAT_VERSION.to_string() {
            return Err(bad("unsupported tag or version"));
        }
        let kind: VocabKind = kind.parse().map_err(|e: String| bad(&e))?;
        let size: usize = size.parse().map_err(|_| bad("size is not a number"))?;
        let mut v = Vocabulary { kind, tokens: Vec::new(), index: HashMap::new() };
        for line in lines.take(size) {
            if v.insert(line) as usize != v.len() - 1 {
                return Err(bad(&format!("duplicate token `{line}`")));
            }
        }
        if v.len() != size {
            return Err(bad("fewer tokens than declared"));
        }
        if v.tokens[..RESERVED.len()] != RESERVED {
            return Err(bad("reserved tokens out of place"));
        }
        Ok(v)
    }
}
