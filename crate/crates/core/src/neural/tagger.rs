use super::model::{render_output, DecodeMode, Example, Seq2Seq};
use super::NeuralError;
use crate::dataset::Corpus;
use crate::eval::{self, EvalReport};
use crate::mdc::SignCode;
use crate::scalar::Scalar;
use crate::vocab::{OovPolicy, Vocabulary};

/// A model together with the input vocabulary it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagger<T> {
    pub model: Seq2Seq<T>,
    pub vocab: Vocabulary,
}

impl<T: Scalar> Tagger<T> {
    pub fn new(model: Seq2Seq<T>, vocab: Vocabulary) -> Result<Self, NeuralError> {
        let cfg = model.config();
        if cfg.vocab_size != vocab.len() || cfg.kind != vocab.kind() {
            return Err(NeuralError::Dimension(format!(
                "model expects a {} vocabulary of size {}, got {} of size {}",
                cfg.kind.as_str(),
                cfg.vocab_size,
                vocab.kind().as_str(),
                vocab.len()
            )));
        }
        Ok(Tagger { model, vocab })
    }

    /// Per-sign labels, coerced to the input length.
    pub fn predict(&self, signs: &[SignCode], mode: DecodeMode, oov: OovPolicy) -> Result<Vec<bool>, NeuralError> {
        let ids = self.vocab.encode(signs, oov);
        let out = self.model.decode(&ids, signs.len(), mode)?;
        Ok(eval::postprocess(&render_output(&out), signs.len()))
    }

    pub fn predict_corpus(&self, corpus: &Corpus, mode: DecodeMode, oov: OovPolicy) -> Result<Vec<Vec<bool>>, NeuralError> {
        corpus.points.iter().map(|p| self.predict(&p.signs, mode, oov)).collect()
    }

    pub fn evaluate(&self, corpus: &Corpus, mode: DecodeMode, oov: OovPolicy) -> Result<EvalReport, NeuralError> {
        let predictions = self.predict_corpus(corpus, mode, oov)?;
        Ok(eval::score(corpus, &predictions).expect("predictions are postprocessed to gold length"))
    }

    pub fn examples(&self, corpus: &Corpus, oov: OovPolicy) -> Vec<Example> {
        corpus
            .points
            .iter()
            .map(|p| Example::from_labels(self.vocab.encode(&p.signs, oov), &p.labels))
            .collect()
    }
}
