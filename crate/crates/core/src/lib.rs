//! Identification of classifier signs in Manuel de Codage hieroglyphic
//! transcriptions: parsing, corpus handling, frequency baselines, an
//! encoder-decoder LSTM labeller and the misclassified-signs metric.

pub mod baselines;
pub mod dataset;
pub mod eval;
pub mod mdc;
pub mod neural;
pub mod scalar;
pub mod vocab;

pub use scalar::Scalar;

pub type Seq2SeqF32 = neural::Seq2Seq<f32>;
pub type Seq2SeqF64 = neural::Seq2Seq<f64>;
pub type ParamsF32 = neural::Params<f32>;
pub type ParamsF64 = neural::Params<f64>;
pub type TaggerF32 = neural::Tagger<f32>;
pub type TaggerF64 = neural::Tagger<f64>;
