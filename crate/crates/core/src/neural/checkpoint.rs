//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "HIEROCLF"
//! version    u32 LE   1
//! header_len u32 LE
//! header     UTF-8    key=value lines (config, tensor shapes, meta.*),
//!                     a `[vocab]` line, then the vocabulary text
//! tensors    f32 LE   every tensor in declared order, row-major
//! ```

use std::fs;
use std::path::Path;

use super::model::{ModelConfig, Params, Seq2Seq, OUTPUT_TOKENS};
use super::tagger::Tagger;
use super::NeuralError;
use crate::scalar::Scalar;
use crate::vocab::Vocabulary;

pub const MAGIC: &[u8; 8] = b"HIEROCLF";
pub const VERSION: u32 = 1;

const VOCAB_MARKER: &str = "[vocab]";

/// A loaded checkpoint with the provenance entries stored alongside it.
pub struct Checkpoint<T> {
    pub tagger: Tagger<T>,
    pub meta: Vec<(String, String)>,
}

pub fn to_bytes<T: Scalar>(tagger: &Tagger<T>, meta: &[(String, String)]) -> Vec<u8> {
    let cfg = tagger.model.config();
    let mut header = format!(
        "kind={}\nlayers={}\nhidden={}\nembedding_dim={}\nvocab_size={}\noutput_vocab={}\n",
        cfg.kind.as_str(),
        cfg.layers,
        cfg.hidden,
        cfg.embedding_dim,
        cfg.vocab_size,
        OUTPUT_TOKENS.join(" ")
    );
    for (name, rows, cols) in cfg.tensor_shapes() {
        header.push_str(&format!("tensor.{name}={rows}x{cols}\n"));
    }
    for (k, v) in meta {
        header.push_str(&format!("meta.{k}={v}\n"));
    }
    header.push_str(VOCAB_MARKER);
    header.push('\n');
    header.push_str(&tagger.vocab.to_text());

    let params = tagger.model.params().tensors();
    let n_values: usize = params.iter().map(|t| t.len()).sum();
    let mut out = Vec::with_capacity(16 + header.len() + 4 * n_values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for t in params {
        for v in &t.data {
            out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    out
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>, NeuralError> {
    let bad = |m: String| NeuralError::Checkpoint(m);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_end = 16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header".into()))?;
    let header = std::str::from_utf8(&bytes[16..header_end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let (fields, vocab_text) = header
        .split_once(&format!("{VOCAB_MARKER}\n"))
        .ok_or_else(|| bad("missing vocabulary section".into()))?;

    let mut pairs = Vec::new();
    for line in fields.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
        pairs.push((k, v));
    }
    let get = |key: &str| {
        pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| bad(format!("missing `{key}`")))
    };
    let num = |key: &str| -> Result<usize, NeuralError> { get(key)?.parse().map_err(|_| bad(format!("`{key}` is not a number"))) };
    let config = ModelConfig {
        kind: get("kind")?.parse().map_err(bad)?,
        layers: num("layers")?,
        hidden: num("hidden")?,
        embedding_dim: num("embedding_dim")?,
        vocab_size: num("vocab_size")?,
    };
    config.validate()?;
    if get("output_vocab")? != OUTPUT_TOKENS.join(" ") {
        return Err(bad("unexpected output vocabulary".into()));
    }
    let shapes = config.tensor_shapes();
    for (name, rows, cols) in &shapes {
        if get(&format!("tensor.{name}"))? != format!("{rows}x{cols}") {
            return Err(bad(format!("shape of `{name}` disagrees with config")));
        }
    }
    let meta = pairs
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v.to_string())))
        .collect();
    let vocab = Vocabulary::from_text(vocab_text).map_err(|e| bad(e.to_string()))?;

    let mut params = Params::<T>::zeros(&config);
    let body = &bytes[header_end..];
    let expected: usize = shapes.iter().map(|(_, r, c)| r * c * 4).sum();
    if body.len() != expected {
        return Err(bad(format!("tensor section has {} bytes, expected {expected}", body.len())));
    }
    let mut values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    for t in params.tensors_mut() {
        for v in &mut t.data {
            *v = T::from_f32(values.next().unwrap()).unwrap();
        }
    }
    let tagger = Tagger::new(Seq2Seq::new(config, params)?, vocab)?;
    Ok(Checkpoint { tagger, meta })
}

pub fn save<T: Scalar>(path: impl AsRef<Path>, tagger: &Tagger<T>, meta: &[(String, String)]) -> Result<(), NeuralError> {
    fs::write(path, to_bytes(tagger, meta))?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>, NeuralError> {
    from_bytes(&fs::read(path)?)
}
