//! Encoder-decoder LSTM without attention.
//!
//! The encoder reads the input ids left to right; its final `(h, c)` per
//! layer initialises the decoder. The decoder embeds the previous output
//! token and emits logits over a five-symbol label vocabulary.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::lstm::{LstmLayer, LstmState, StepCache};
use super::tensor::{self, Tensor};
use super::NeuralError;
use crate::scalar::Scalar;
use crate::vocab::VocabKind;

pub const OUTPUT_TOKENS: [&str; 5] = ["<pad>", "<s>", "</s>", "0", "1"];
pub const OUT_PAD: u32 = 0;
pub const OUT_SOS: u32 = 1;
pub const OUT_EOS: u32 = 2;
pub const OUT_ZERO: u32 = 3;
pub const OUT_ONE: u32 = 4;

/// Extra steps allowed past the input length in free decoding.
pub const FREE_DECODE_MARGIN: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub kind: VocabKind,
    pub layers: usize,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub vocab_size: usize,
}

impl ModelConfig {
    /// One layer, hidden size 64.
    pub fn desk(kind: VocabKind, vocab_size: usize) -> Self {
        ModelConfig { kind, layers: 1, hidden: 64, embedding_dim: 32, vocab_size }
    }

    /// Three layers, hidden size 512.
    pub fn paper_scale(kind: VocabKind, vocab_size: usize) -> Self {
        ModelConfig { kind, layers: 3, hidden: 512, embedding_dim: 256, vocab_size }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.layers == 0 || self.hidden == 0 || self.embedding_dim == 0 {
            return Err(NeuralError::Config("layers, hidden and embedding_dim must be at least 1".into()));
        }
        if self.vocab_size < OUTPUT_TOKENS.len() {
            return Err(NeuralError::Config(format!("vocab_size {} is below 5", self.vocab_size)));
        }
        Ok(())
    }

    /// `(name, rows, cols)` of every parameter tensor in declared order.
    pub fn tensor_shapes(&self) -> Vec<(String, usize, usize)> {
        let (h, e) = (self.hidden, self.embedding_dim);
        let mut shapes = vec![("encoder.embedding".to_string(), self.vocab_size, e)];
        for side in ["encoder", "decoder"] {
            if side == "decoder" {
                shapes.push(("decoder.embedding".into(), OUTPUT_TOKENS.len(), e));
            }
            for l in 0..self.layers {
                let input = if l == 0 { e } else { h };
                shapes.push((format!("{side}.lstm{l}.weight"), 4 * h, input + h));
                shapes.push((format!("{side}.lstm{l}.bias"), 4 * h, 1));
            }
        }
        shapes.push(("output.weight".into(), OUTPUT_TOKENS.len(), h));
        shapes.push(("output.bias".into(), OUTPUT_TOKENS.len(), 1));
        shapes
    }
}

/// All trainable tensors. Also used for gradients of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub encoder_embedding: Tensor<T>,
    pub encoder: Vec<LstmLayer<T>>,
    pub decoder_embedding: Tensor<T>,
    pub decoder: Vec<LstmLayer<T>>,
    pub output_weight: Tensor<T>,
    pub output_bias: Tensor<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let layer = |l: usize| LstmLayer::zeros(if l == 0 { config.embedding_dim } else { config.hidden }, config.hidden);
        Params {
            encoder_embedding: Tensor::zeros(config.vocab_size, config.embedding_dim),
            encoder: (0..config.layers).map(layer).collect(),
            decoder_embedding: Tensor::zeros(OUTPUT_TOKENS.len(), config.embedding_dim),
            decoder: (0..config.layers).map(layer).collect(),
            output_weight: Tensor::zeros(OUTPUT_TOKENS.len(), config.hidden),
            output_bias: Tensor::zeros(OUTPUT_TOKENS.len(), 1),
        }
    }

    /// Weights uniform in `±scale`; biases zero except forget gates at 1.
    pub fn init<R: Rng>(config: &ModelConfig, scale: f64, rng: &mut R) -> Self {
        let mut p = Params::zeros(config);
        let dist = Uniform::new_inclusive(-scale, scale);
        for t in p.tensors_mut() {
            for v in &mut t.data {
                *v = T::lit(dist.sample(rng));
            }
        }
        let h = config.hidden;
        for layer in p.encoder.iter_mut().chain(p.decoder.iter_mut()) {
            for (r, b) in layer.b.data.iter_mut().enumerate() {
                *b = if (h..2 * h).contains(&r) { T::one() } else { T::zero() };
            }
        }
        p.output_bias.data.iter_mut().for_each(|b| *b = T::zero());
        p
    }

    /// Tensors in the order given by [`ModelConfig::tensor_shapes`].
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = vec![&self.encoder_embedding];
        for l in &self.encoder {
            out.extend([&l.w, &l.b]);
        }
        out.push(&self.decoder_embedding);
        for l in &self.decoder {
            out.extend([&l.w, &l.b]);
        }
        out.extend([&self.output_weight, &self.output_bias]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.encoder_embedding];
        for l in &mut self.encoder {
            out.extend([&mut l.w, &mut l.b]);
        }
        out.push(&mut self.decoder_embedding);
        for l in &mut self.decoder {
            out.extend([&mut l.w, &mut l.b]);
        }
        out.extend([&mut self.output_weight, &mut self.output_bias]);
        out
    }

    pub fn matches(&self, config: &ModelConfig) -> bool {
        let shapes = config.tensor_shapes();
        let tensors = self.tensors();
        shapes.len() == tensors.len()
            && shapes.iter().zip(tensors).all(|((_, r, c), t)| t.rows == *r && t.cols == *c && t.data.len() == r * c)
    }

    pub fn norm(&self) -> T {
        self.tensors().iter().map(|t| t.sum_squares()).sum::<T>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Params<T>, scale: T) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            tensor::axpy(scale, &src.data, &mut dst.data);
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Same values in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let conv = |t: &Tensor<T>| Tensor {
            rows: t.rows,
            cols: t.cols,
            data: t.data.iter().map(|v| U::from_f64(v.to_f64().unwrap()).unwrap()).collect(),
        };
        let conv_layer = |l: &LstmLayer<T>| LstmLayer { w: conv(&l.w), b: conv(&l.b) };
        Params {
            encoder_embedding: conv(&self.encoder_embedding),
            encoder: self.encoder.iter().map(conv_layer).collect(),
            decoder_embedding: conv(&self.decoder_embedding),
            decoder: self.decoder.iter().map(conv_layer).collect(),
            output_weight: conv(&self.output_weight),
            output_bias: conv(&self.output_bias),
        }
    }
}

/// One training pair: encoder input ids and decoder target ids (labels then EOS).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub input_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
}

impl Example {
    pub fn from_labels(input_ids: Vec<u32>, labels: &[bool]) -> Self {
        let mut target_ids: Vec<u32> = labels.iter().map(|&l| if l { OUT_ONE } else { OUT_ZERO }).collect();
        target_ids.push(OUT_EOS);
        Example { input_ids, target_ids }
    }

    /// Teacher-forced decoder inputs: SOS followed by all targets but the last.
    pub fn decoder_inputs(&self) -> Vec<u32> {
        let mut ids = vec![OUT_SOS];
        ids.extend_from_slice(&self.target_ids[..self.target_ids.len().saturating_sub(1)]);
        ids
    }
}

/// Activations needed by [`Seq2Seq::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    input_ids: Vec<u32>,
    decoder_inputs: Vec<u32>,
    encoder: Vec<Vec<StepCache<T>>>,
    decoder: Vec<Vec<StepCache<T>>>,
    top_outputs: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Until EOS or the input length plus [`FREE_DECODE_MARGIN`].
    Free,
    /// Exactly one step per input sign, choosing between the two labels.
    #[default]
    Constrained,
}

impl std::str::FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(DecodeMode::Free),
            "constrained" => Ok(DecodeMode::Constrained),
            other => Err(format!("unknown decode mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2Seq<T> {
    config: ModelConfig,
    params: Params<T>,
}

impl<T: Scalar> Seq2Seq<T> {
    pub fn new(config: ModelConfig, params: Params<T>) -> Result<Self, NeuralError> {
        config.validate()?;
        if !params.matches(&config) {
            return Err(NeuralError::Dimension("parameter shapes do not match the model config".into()));
        }
        Ok(Seq2Seq { config, params })
    }

    pub fn init<R: Rng>(config: ModelConfig, scale: f64, rng: &mut R) -> Result<Self, NeuralError> {
        config.validate()?;
        let params = Params::init(&config, scale, rng);
        Ok(Seq2Seq { config, params })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let params = Params::zeros(&config);
        Ok(Seq2Seq { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    fn check_ids(&self, input_ids: &[u32], decoder_inputs: &[u32]) -> Result<(), NeuralError> {
        if let Some(id) = input_ids.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(NeuralError::Dimension(format!(
                "input id {id} outside vocabulary of size {}",
                self.config.vocab_size
            )));
        }
        if let Some(id) = decoder_inputs.iter().find(|&&id| id as usize >= OUTPUT_TOKENS.len()) {
            return Err(NeuralError::Dimension(format!("decoder id {id} outside output vocabulary")));
        }
        Ok(())
    }

    fn encode(&self, input_ids: &[u32]) -> (Vec<LstmState<T>>, Vec<Vec<StepCache<T>>>) {
        let mut xs: Vec<Vec<T>> = input_ids.iter().map(|&id| self.params.encoder_embedding.row(id as usize).to_vec()).collect();
        let mut finals = Vec::with_capacity(self.config.layers);
        let mut caches = Vec::with_capacity(self.config.layers);
        for layer in &self.params.encoder {
            let (outputs, layer_caches, last) = layer.forward(&xs, LstmState::zeros(self.config.hidden));
            finals.push(last);
            caches.push(layer_caches);
            xs = outputs;
        }
        (finals, caches)
    }

    fn project(&self, h: &[T]) -> Vec<T> {
        self.params.output_weight.affine(h, &self.params.output_bias.data)
    }

    /// Teacher-forced pass; returns one logit row per decoder input.
    pub fn forward(&self, input_ids: &[u32], decoder_inputs: &[u32]) -> Result<(Vec<Vec<T>>, ForwardCache<T>), NeuralError> {
        self.check_ids(input_ids, decoder_inputs)?;
        let (finals, encoder) = self.encode(input_ids);
        let mut xs: Vec<Vec<T>> =
            decoder_inputs.iter().map(|&id| self.params.decoder_embedding.row(id as usize).to_vec()).collect();
        let mut decoder = Vec::with_capacity(self.config.layers);
        for (layer, init) in self.params.decoder.iter().zip(finals) {
            let (outputs, layer_caches, _) = layer.forward(&xs, init);
            decoder.push(layer_caches);
            xs = outputs;
        }
        let logits = xs.iter().map(|h| self.project(h)).collect();
        let cache = ForwardCache {
            input_ids: input_ids.to_vec(),
            decoder_inputs: decoder_inputs.to_vec(),
            encoder,
            decoder,
            top_outputs: xs,
        };
        Ok((logits, cache))
    }

    /// Accumulates parameter gradients for the given logit gradients into `grad`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_logits: &[Vec<T>], grad: &mut Params<T>) {
        let hs = self.config.hidden;
        let mut d_xs: Vec<Vec<T>> = Vec::with_capacity(d_logits.len());
        for (dz, h) in d_logits.iter().zip(&cache.top_outputs) {
            grad.output_weight.add_outer(dz, h);
            for (gb, &d) in grad.output_bias.data.iter_mut().zip(dz) {
                *gb += d;
            }
            let mut dh = vec![T::zero(); hs];
            self.params.output_weight.add_transposed_product(dz, &mut dh);
            d_xs.push(dh);
        }

        let mut d_encoder_final = vec![LstmState::zeros(hs); self.config.layers];
        for l in (0..self.config.layers).rev() {
            let (d_in, d_init) =
                self.params.decoder[l].backward(&cache.decoder[l], &d_xs, LstmState::zeros(hs), &mut grad.decoder[l]);
            d_encoder_final[l] = d_init;
            d_xs = d_in;
        }
        for (&id, dx) in cache.decoder_inputs.iter().zip(&d_xs) {
            tensor::axpy(T::one(), dx, grad.decoder_embedding.row_mut(id as usize));
        }

        let steps = cache.input_ids.len();
        let mut d_xs = vec![vec![T::zero(); hs]; steps];
        for l in (0..self.config.layers).rev() {
            let d_final = std::mem::replace(&mut d_encoder_final[l], LstmState::zeros(0));
            let (d_in, _) = self.params.encoder[l].backward(&cache.encoder[l], &d_xs, d_final, &mut grad.encoder[l]);
            d_xs = d_in;
        }
        for (&id, dx) in cache.input_ids.iter().zip(&d_xs) {
            tensor::axpy(T::one(), dx, grad.encoder_embedding.row_mut(id as usize));
        }
    }

    /// Mean cross-entropy over all non-PAD targets in the batch.
    pub fn loss(&self, batch: &[Example]) -> Result<T, NeuralError> {
        let count = target_count(batch)?;
        let mut total = T::zero();
        for ex in batch {
            let (logits, _) = self.forward(&ex.input_ids, &ex.decoder_inputs())?;
            for (row, &target) in logits.iter().zip(&ex.target_ids) {
                if target != OUT_PAD {
                    total += tensor::cross_entropy(row, target as usize);
                }
            }
        }
        let loss = total / T::lit(count as f64);
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(NeuralError::NonFinite("loss".into()))
        }
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, batch: &[Example]) -> Result<(T, Params<T>), NeuralError> {
        let count = T::lit(target_count(batch)? as f64);
        let mut grad = Params::zeros(&self.config);
        let mut total = T::zero();
        for ex in batch {
            let (logits, cache) = self.forward(&ex.input_ids, &ex.decoder_inputs())?;
            let d_logits: Vec<Vec<T>> = logits
                .iter()
                .zip(&ex.target_ids)
                .map(|(row, &target)| {
                    if target == OUT_PAD {
                        return vec![T::zero(); row.len()];
                    }
                    total += tensor::cross_entropy(row, target as usize);
                    let mut d = tensor::softmax(row);
                    d[target as usize] -= T::one();
                    d.iter_mut().for_each(|v| *v = *v / count);
                    d
                })
                .collect();
            self.backward(&cache, &d_logits, &mut grad);
        }
        let loss = total / count;
        if !loss.is_finite() {
            return Err(NeuralError::NonFinite("loss".into()));
        }
        if !grad.all_finite() {
            return Err(NeuralError::NonFinite("gradient".into()));
        }
        Ok((loss, grad))
    }

    /// Greedy decoding; returns the emitted output ids (without the leading SOS).
    pub fn decode(&self, input_ids: &[u32], n_signs: usize, mode: DecodeMode) -> Result<Vec<u32>, NeuralError> {
        self.check_ids(input_ids, &[])?;
        let (mut states, _) = self.encode(input_ids);
        let steps = match mode {
            DecodeMode::Free => n_signs + FREE_DECODE_MARGIN,
            DecodeMode::Constrained => n_signs,
        };
        let mut prev = OUT_SOS;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut x = self.params.decoder_embedding.row(prev as usize).to_vec();
            for (layer, state) in self.params.decoder.iter().zip(states.iter_mut()) {
                let (next, _) = layer.step(&x, state);
                x = next.h.clone();
                *state = next;
            }
            let logits = self.project(&x);
            let choice = match mode {
                DecodeMode::Free => argmax(&logits),
                DecodeMode::Constrained => {
                    if logits[OUT_ONE as usize] > logits[OUT_ZERO as usize] {
                        OUT_ONE as usize
                    } else {
                        OUT_ZERO as usize
                    }
                }
            } as u32;
            if mode == DecodeMode::Free && choice == OUT_EOS {
                break;
            }
            out.push(choice);
            prev = choice;
        }
        Ok(out)
    }
}

fn target_count(batch: &[Example]) -> Result<usize, NeuralError> {
    let count = batch.iter().flat_map(|e| &e.target_ids).filter(|&&t| t != OUT_PAD).count();
    if count == 0 {
        Err(NeuralError::Dimension("batch has no targets".into()))
    } else {
        Ok(count)
    }
}

/// First index of the maximum.
fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Output ids as whitespace-separated label text.
pub fn render_output(ids: &[u32]) -> String {
    ids.iter()
        .map(|&id| OUTPUT_TOKENS.get(id as usize).copied().unwrap_or("<unk>"))
        .collect::<Vec<_>>()
        .join(" ")
}
