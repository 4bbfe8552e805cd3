//! Manuel de Codage (MdC) wordform parser.
//!
//! The accepted language is a small context-free grammar that separates
//! sign codes from layout delimiters, damage/ligature suffixes and the
//! `~...~` classifier annotation used by iClassifier exports:
//!
//! ```text
//! token       : sequence (delimiters sequence)*
//! sequence    : "(" sequence ")" | "~" sequence "~"
//!             | sequence delimiters sequence | classified_sign
//! classified_sign : code suffix? | "~" code "~" suffix?
//! suffix      : ligature | damage | ligature damage | damage ligature
//! ```
//!
//! Parentheses are always read as grouping brackets and must balance.
//! Whitespace separates sequences the same way a delimiter does.

use std::fmt;

use thiserror::Error;

/// Special codes that are part of the grammar but are not hieroglyphs.
pub const SPECIAL_CODES: [&str; 6] = ["#b-..#e", "#b", "#e", "[&", "&]", "."];

/// Text of one `code` in the grammar, e.g. `D54`, `nTr`, `100` or a marker such as `#b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignCode(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a valid sign code")]
pub struct InvalidSignCode(pub String);

impl SignCode {
    pub fn new(text: impl Into<String>) -> Result<Self, InvalidSignCode> {
        let text = text.into();
        if SPECIAL_CODES.contains(&text.as_str()) || alnum_code_len(text.as_bytes()) == text.len() && !text.is_empty() {
            Ok(SignCode(text))
        } else {
            Err(InvalidSignCode(text))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True for the position and editorial markers (`#b`, `#e`, `[&`, `&]`, `.`, `#b-..#e`).
    pub fn is_special(&self) -> bool {
        SPECIAL_CODES.contains(&self.0.as_str())
    }
}

impl fmt::Display for SignCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for SignCode {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Length of the longest prefix matching `[a-zA-Z]+[0-9]*[a-zA-Z]*` or `[0-9]+`; 0 if none.
fn alnum_code_len(bytes: &[u8]) -> usize {
    let run = |from: usize, pred: fn(&u8) -> bool| from + bytes[from..].iter().take_while(|b| pred(b)).count();
    if bytes.first().is_some_and(u8::is_ascii_alphabetic) {
        let letters = run(0, u8::is_ascii_alphabetic);
        let digits = run(letters, u8::is_ascii_digit);
        run(digits, u8::is_ascii_alphabetic)
    } else {
        run(0, u8::is_ascii_digit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delimiter {
    Hyphen,
    Colon,
    Backslash,
    DoubleBackslash,
    QuadrupleBackslash,
    Grouping,
    Caret,
    LeftParen,
    RightParen,
    Ampersand,
    LeftBrace,
    RightBrace,
    Comma,
    Star,
    Underscore,
}

impl Delimiter {
    pub const ALL: [Delimiter; 15] = [
        Delimiter::Hyphen,
        Delimiter::Colon,
        Delimiter::Backslash,
        Delimiter::DoubleBackslash,
        Delimiter::QuadrupleBackslash,
        Delimiter::Grouping,
        Delimiter::Caret,
        Delimiter::LeftParen,
        Delimiter::RightParen,
        Delimiter::Ampersand,
        Delimiter::LeftBrace,
        Delimiter::RightBrace,
        Delimiter::Comma,
        Delimiter::Star,
        Delimiter::Underscore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Delimiter::Hyphen => "-",
            Delimiter::Colon => ":",
            Delimiter::Backslash => "\\",
            Delimiter::DoubleBackslash => "\\\\",
            Delimiter::QuadrupleBackslash => "\\\\\\\\",
            Delimiter::Grouping => "_GROUPING_",
            Delimiter::Caret => "^",
            Delimiter::LeftParen => "(",
            Delimiter::RightParen => ")",
            Delimiter::Ampersand => "&",
            Delimiter::LeftBrace => "{",
            Delimiter::RightBrace => "}",
            Delimiter::Comma => ",",
            Delimiter::Star => "*",
            Delimiter::Underscore => "_",
        }
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ligature position and/or damage marker attached to a sign.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Suffix {
    ligature: Option<[u32; 3]>,
    damage: Option<u32>,
    damage_first: bool,
}

impl Suffix {
    pub fn ligature(pos: [u32; 3]) -> Self {
        Suffix { ligature: Some(pos), damage: None, damage_first: false }
    }

    pub fn damage(level: u32) -> Self {
        Suffix { ligature: None, damage: Some(level), damage_first: false }
    }

    /// Both parts; `damage_first` records the written order.
    pub fn both(pos: [u32; 3], level: u32, damage_first: bool) -> Self {
        Suffix { ligature: Some(pos), damage: Some(level), damage_first }
    }

    pub fn ligature_pos(&self) -> Option<[u32; 3]> {
        self.ligature
    }

    pub fn damage_level(&self) -> Option<u32> {
        self.damage
    }
}

impl fmt::Display for Suffix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lig = |f: &mut fmt::Formatter<'_>| match self.ligature {
            Some([a, b, c]) => write!(f, "{{{{{a},{b},{c}}}}}"),
            None => Ok(()),
        };
        let dmg = |f: &mut fmt::Formatter<'_>| match self.damage {
            Some(d) => write!(f, "#{d}"),
            None => Ok(()),
        };
        if self.damage_first {
            dmg(f)?;
            lig(f)
        } else {
            lig(f)?;
            dmg(f)
        }
    }
}

/// A `classified_sign`: a code, optionally wrapped in its own tilde pair, plus suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignNode {
    pub code: SignCode,
    pub suffix: Option<Suffix>,
    pub tilde: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Paren,
    Tilde,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Sign(SignNode),
    Group { kind: GroupKind, inner: Sequence },
}

/// Elements separated by delimiter runs. An empty run stands for whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub first: Box<Element>,
    pub rest: Vec<(Vec<Delimiter>, Element)>,
}

impl Sequence {
    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        std::iter::once(self.first.as_ref()).chain(self.rest.iter().map(|(_, e)| e))
    }
}

/// Parse tree of one wordform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedToken {
    pub root: Sequence,
}

/// A sign in document order with its resolved classifier flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSign {
    pub code: SignCode,
    pub suffix: Option<Suffix>,
    pub is_classifier: bool,
}

impl ParsedToken {
    /// All signs, including special markers, in document order.
    ///
    /// A sign is a classifier when it sits inside an odd number of tilde scopes.
    pub fn signs(&self) -> Vec<ParsedSign> {
        fn walk(seq: &Sequence, inside: bool, out: &mut Vec<ParsedSign>) {
            for el in seq.elements() {
                match el {
                    Element::Sign(s) => out.push(ParsedSign {
                        code: s.code.clone(),
                        suffix: s.suffix.clone(),
                        is_classifier: inside ^ s.tilde,
                    }),
                    Element::Group { kind, inner } => walk(inner, inside ^ (*kind == GroupKind::Tilde), out),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, false, &mut out);
        out
    }

    /// Hieroglyph codes with classifier flags; markers, delimiters and suffixes are dropped.
    pub fn flatten(&self) -> Vec<(SignCode, bool)> {
        self.signs()
            .into_iter()
            .filter(|s| !s.code.is_special())
            .map(|s| (s.code, s.is_classifier))
            .collect()
    }

    /// Canonical MdC text of the tree.
    pub fn serialise(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.first)?;
        for (delims, el) in &self.rest {
            if delims.is_empty() {
                f.write_str(" ")?;
            }
            for d in delims {
                f.write_str(d.as_str())?;
            }
            write!(f, "{el}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Sign(s) => {
                if s.tilde {
                    write!(f, "~{}~", s.code)?;
                } else {
                    write!(f, "{}", s.code)?;
                }
                if let Some(suffix) = &s.suffix {
                    write!(f, "{suffix}")?;
                }
                Ok(())
            }
            Element::Group { kind: GroupKind::Paren, inner } => write!(f, "({inner})"),
            Element::Group { kind: GroupKind::Tilde, inner } => write!(f, "~{inner}~"),
        }
    }
}

impl fmt::Display for ParsedToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// First grammar violation in an input string.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
}

pub fn parse(text: &str) -> Result<ParsedToken, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens: &tokens, pos: 0, end: text.len(), tilde_depth: 0 };
    parser.skip_space();
    let root = parser.sequence()?;
    parser.skip_space();
    match parser.peek() {
        None => Ok(ParsedToken { root }),
        Some(_) => Err(parser.error(&["delimiter", "end of input"])),
    }
}

/// Parse and flatten in one step.
pub fn flatten(text: &str) -> Result<Vec<(SignCode, bool)>, ParseError> {
    parse(text).map(|t| t.flatten())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Space,
    Tilde,
    Open,
    Close,
    Delim(Delimiter),
    Code(SignCode),
    Damage(u32),
    Ligature([u32; 3]),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Space => "whitespace".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Open => "`(`".into(),
            Tok::Close => "`)`".into(),
            Tok::Delim(d) => format!("delimiter `{d}`"),
            Tok::Code(c) => format!("sign `{c}`"),
            Tok::Damage(d) => format!("damage `#{d}`"),
            Tok::Ligature([a, b, c]) => format!("ligature `{{{{{a},{b},{c}}}}}`"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, expected: &[&'static str]| ParseError {
        offset,
        expected: expected.to_vec(),
        found: text[offset..].chars().next().map_or("end of input".into(), |c| format!("`{c}`")),
    };
    while i < bytes.len() {
        let rest = &text[i..];
        let (len, tok) = match bytes[i] {
            b if b.is_ascii_whitespace() => {
                (rest.bytes().take_while(u8::is_ascii_whitespace).count(), Tok::Space)
            }
            b'~' => (1, Tok::Tilde),
            b'(' => (1, Tok::Open),
            b')' => (1, Tok::Close),
            b'#' => {
                if let Some(m) = ["#b-..#e", "#b", "#e"].into_iter().find(|m| rest.starts_with(m)) {
                    (m.len(), Tok::Code(SignCode(m.to_string())))
                } else {
                    let digits = rest[1..].bytes().take_while(u8::is_ascii_digit).count();
                    if digits == 0 {
                        return Err(err(i + 1, &["damage digits", "`b`", "`e`"]));
                    }
                    let level = rest[1..1 + digits].parse().map_err(|_| err(i + 1, &["damage level within u32"]))?;
                    (1 + digits, Tok::Damage(level))
                }
            }
            b'{' => match lex_ligature(rest) {
                Some((len, pos)) => (len, Tok::Ligature(pos)),
                None => (1, Tok::Delim(Delimiter::LeftBrace)),
            },
            b'[' => {
                if rest.starts_with("[&") {
                    (2, Tok::Code(SignCode("[&".into())))
                } else {
                    return Err(err(i + 1, &["`&`"]));
                }
            }
            b'&' if rest.starts_with("&]") => (2, Tok::Code(SignCode("&]".into()))),
            b'.' => (1, Tok::Code(SignCode(".".into()))),
            b'\\' => {
                let d = if rest.starts_with("\\\\\\\\") {
                    Delimiter::QuadrupleBackslash
                } else if rest.starts_with("\\\\") {
                    Delimiter::DoubleBackslash
                } else {
                    Delimiter::Backslash
                };
                (d.as_str().len(), Tok::Delim(d))
            }
            b'_' if rest.starts_with("_GROUPING_") => (10, Tok::Delim(Delimiter::Grouping)),
            b if b.is_ascii_alphanumeric() => {
                let len = alnum_code_len(rest.as_bytes());
                (len, Tok::Code(SignCode(rest[..len].to_string())))
            }
            _ => {
                let d = Delimiter::ALL
                    .into_iter()
                    .filter(|d| !matches!(d, Delimiter::LeftParen | Delimiter::RightParen))
                    .find(|d| d.as_str().len() == 1 && rest.starts_with(d.as_str()));
                match d {
                    Some(d) => (1, Tok::Delim(d)),
                    None => return Err(err(i, &["sign code", "delimiter", "`~`", "`(`", "`)`", "suffix"])),
                }
            }
        };
        out.push((i, tok));
        i += len;
    }
    Ok(out)
}

/// `{{a,b,c}}` with decimal fields.
fn lex_ligature(rest: &str) -> Option<(usize, [u32; 3])> {
    let body = rest.strip_prefix("{{")?;
    let close = body.find("}}")?;
    let mut fields = body[..close].split(',');
    let mut pos = [0u32; 3];
    for slot in &mut pos {
        let f = fields.next()?;
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        *slot = f.parse().ok()?;
    }
    fields.next().is_none().then_some((close + 4, pos))
}

struct Parser<'a> {
    tokens: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    tilde_depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn skip_space(&mut self) {
        while self.peek() == Some(&Tok::Space) {
            self.pos += 1;
        }
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.to_vec(),
            found: self.peek().map_or("end of input".into(), Tok::describe),
        }
    }

    fn sequence(&mut self) -> Result<Sequence, ParseError> {
        let first = Box::new(self.element()?);
        let mut rest = Vec::new();
        loop {
            let save = self.pos;
            let mut delims = Vec::new();
            let mut spaced = false;
            while let Some(tok) = self.peek() {
                match tok {
                    Tok::Space => spaced = true,
                    Tok::Delim(d) => delims.push(*d),
                    _ => break,
                }
                self.pos += 1;
            }
            let at_boundary = matches!(self.peek(), None | Some(Tok::Close));
            if delims.is_empty() && (!spaced || at_boundary) {
                self.pos = save;
                break;
            }
            // Inside a tilde scope, whitespace before a tilde is trailing space before the closer.
            if delims.is_empty() && self.peek() == Some(&Tok::Tilde) && self.tilde_depth > 0 {
                self.pos = save;
                break;
            }
            rest.push((delims, self.element()?));
        }
        Ok(Sequence { first, rest })
    }

    fn element(&mut self) -> Result<Element, ParseError> {
        self.skip_space();
        match self.peek() {
            Some(Tok::Code(code)) => {
                let code = code.clone();
                self.pos += 1;
                let suffix = self.suffix()?;
                Ok(Element::Sign(SignNode { code, suffix, tilde: false }))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let inner = self.sequence()?;
                self.skip_space();
                if self.peek() != Some(&Tok::Close) {
                    return Err(self.error(&["delimiter", "`)`"]));
                }
                self.pos += 1;
                Ok(Element::Group { kind: GroupKind::Paren, inner })
            }
            Some(Tok::Tilde) => {
                self.pos += 1;
                self.tilde_depth += 1;
                let inner = self.sequence();
                self.tilde_depth -= 1;
                let inner = inner?;
                self.skip_space();
                if self.peek() != Some(&Tok::Tilde) {
                    return Err(self.error(&["delimiter", "`~`"]));
                }
                self.pos += 1;
                match inner {
                    Sequence { first, rest } if rest.is_empty() => match *first {
                        Element::Sign(SignNode { code, suffix: None, tilde: false }) => {
                            let suffix = self.suffix()?;
                            Ok(Element::Sign(SignNode { code, suffix, tilde: true }))
                        }
                        other => Ok(Element::Group {
                            kind: GroupKind::Tilde,
                            inner: Sequence { first: Box::new(other), rest },
                        }),
                    },
                    inner => Ok(Element::Group { kind: GroupKind::Tilde, inner }),
                }
            }
            _ => Err(self.error(&["sign code", "`(`", "`~`"])),
        }
    }

    fn suffix(&mut self) -> Result<Option<Suffix>, ParseError> {
        let mut ligature = None;
        let mut damage = None;
        let mut damage_first = false;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Ligature(pos) if ligature.is_none() => ligature = Some(*pos),
                Tok::Damage(d) if damage.is_none() => {
                    damage = Some(*d);
                    damage_first = ligature.is_none();
                }
                Tok::Ligature(_) | Tok::Damage(_) => return Err(self.error(&["delimiter", "end of sign"])),
                _ => break,
            }
            self.pos += 1;
        }
        Ok(match (ligature, damage) {
            (None, None) => None,
            (l, d) => Some(Suffix { ligature: l, damage: d, damage_first: damage_first && l.is_some() }),
        })
    }
}
