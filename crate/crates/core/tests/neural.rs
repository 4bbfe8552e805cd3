mod common;

use hieroclf::dataset::{split, Corpus, SplitSpec};
use hieroclf::neural::checkpoint;
use hieroclf::neural::model::{render_output, OUT_EOS, OUT_ONE, OUT_SOS, OUT_ZERO};
use hieroclf::neural::tensor::softmax;
use hieroclf::neural::{
    grid_search, train, DecodeMode, Example, GridSpec, ModelConfig, NeuralError, Params, Seq2Seq, Tagger, TrainConfig,
};
use hieroclf::vocab::{OovPolicy, VocabKind, Vocabulary};
use hieroclf::{eval, Seq2SeqF64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config(layers: usize, hidden: usize, vocab: usize) -> ModelConfig {
    ModelConfig { kind: VocabKind::Sign, layers, hidden, embedding_dim: 3, vocab_size: vocab }
}

fn random_model(config: ModelConfig, seed: u64) -> Seq2SeqF64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Seq2Seq::init(config, 0.5, &mut rng).unwrap();
    // non-trivial biases everywhere
    for t in model.params_mut().tensors_mut() {
        if t.cols == 1 {
            t.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
        }
    }
    model
}

/// Straight-line LSTM arithmetic over a 1-layer model, written gate by gate.
fn reference_logits(p: &Params<f64>, hidden: usize, input: &[u32], dec_in: &[u32]) -> Vec<Vec<f64>> {
    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }
    fn run(w: &[f64], b: &[f64], cols: usize, hidden: usize, x: &[f64], h: &mut Vec<f64>, c: &mut Vec<f64>) {
        let pre = |row: usize| -> f64 {
            let mut s = b[row];
            for (k, xv) in x.iter().chain(h.iter()).enumerate() {
                s += w[row * cols + k] * xv;
            }
            s
        };
        let mut h_new = vec![0.0; hidden];
        let mut c_new = vec![0.0; hidden];
        for j in 0..hidden {
            let i_gate = sig(pre(j));
            let f_gate = sig(pre(hidden + j));
            let g_cand = pre(2 * hidden + j).tanh();
            let o_gate = sig(pre(3 * hidden + j));
            c_new[j] = f_gate * c[j] + i_gate * g_cand;
            h_new[j] = o_gate * c_new[j].tanh();
        }
        *h = h_new;
        *c = c_new;
    }
    let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
    let enc = &p.encoder[0];
    for &id in input {
        let x = p.encoder_embedding.row(id as usize).to_vec();
        run(&enc.w.data, &enc.b.data, enc.w.cols, hidden, &x, &mut h, &mut c);
    }
    let dec = &p.decoder[0];
    let mut out = Vec::new();
    for &id in dec_in {
        let x = p.decoder_embedding.row(id as usize).to_vec();
        run(&dec.w.data, &dec.b.data, dec.w.cols, hidden, &x, &mut h, &mut c);
        let logits = (0..5)
            .map(|r| p.output_bias.data[r] + (0..hidden).map(|k| p.output_weight.data[r * hidden + k] * h[k]).sum::<f64>())
            .collect();
        out.push(logits);
    }
    out
}

#[test]
fn forward_matches_reference_arithmetic() {
    let model = random_model(tiny_config(1, 2, 6), 11);
    let input = [OUT_SOS, 4, 5, OUT_EOS];
    let dec_in = [OUT_SOS, OUT_ZERO, OUT_ONE];
    let (logits, _) = model.forward(&input, &dec_in).unwrap();
    let expected = reference_logits(model.params(), 2, &input, &dec_in);
    for (row, exp) in logits.iter().zip(&expected) {
        for (a, b) in row.iter().zip(exp) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn distributions_and_zero_weights() {
    let model = random_model(tiny_config(2, 3, 7), 5);
    let (logits, _) = model.forward(&[1, 5, 6, 2], &[1, 3, 4]).unwrap();
    for row in &logits {
        assert!((softmax(row).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let zero = Seq2SeqF64::zeros(tiny_config(2, 3, 7)).unwrap();
    let (logits, _) = zero.forward(&[1, 5, 6, 2], &[1, 3, 4]).unwrap();
    for row in &logits {
        assert!(softmax(row).iter().all(|p| (p - 0.2).abs() < 1e-15));
    }
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences over every parameter, compared per tensor.
fn check_gradients(config: ModelConfig, batch: &[Example]) {
    let model = random_model(config.clone(), 3);
    let (_, grad) = model.loss_and_gradients(batch).unwrap();
    let step = 1e-5;
    let shapes = config.tensor_shapes();
    for (ti, (name, _, _)) in shapes.iter().enumerate() {
        let len = model.params().tensors()[ti].len();
        let mut numeric = vec![0.0; len];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let mut probe = model.clone();
            probe.params_mut().tensors_mut()[ti].data[k] += step;
            let up = probe.loss(batch).unwrap();
            probe.params_mut().tensors_mut()[ti].data[k] -= 2.0 * step;
            let down = probe.loss(batch).unwrap();
            *slot = (up - down) / (2.0 * step);
        }
        let analytic = &grad.tensors()[ti].data;
        let err = relative_error(analytic, &numeric);
        assert!(err < 1e-4, "{name}: relative error {err}");
    }
}

#[test]
fn gradients_match_finite_differences_two_layers() {
    let batch = vec![
        Example::from_labels(vec![1, 4, 5, 6, 2], &[false, true, true]),
        Example::from_labels(vec![1, 7, 2], &[true]),
    ];
    check_gradients(tiny_config(2, 3, 8), &batch);
}

#[test]
fn loss_approaches_zero_for_confident_correct_logits() {
    let mut model = Seq2SeqF64::zeros(tiny_config(1, 2, 6)).unwrap();
    model.params_mut().output_bias.data[OUT_EOS as usize] = 60.0;
    let batch = [Example { input_ids: vec![1, 4, 2], target_ids: vec![OUT_EOS] }];
    assert!(model.loss(&batch).unwrap() < 1e-20);
}

#[test]
fn duplicated_example_leaves_mean_loss_unchanged() {
    let model = random_model(tiny_config(1, 4, 9), 8);
    let ex = Example::from_labels(vec![1, 4, 8, 2], &[true, false]);
    let (l1, g1) = model.loss_and_gradients(std::slice::from_ref(&ex)).unwrap();
    let (l2, g2) = model.loss_and_gradients(&[ex.clone(), ex]).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
        assert!(relative_error(&a.data, &b.data) < 1e-12);
    }
}

#[test]
fn invalid_inputs_and_non_finite_values() {
    let mut model = random_model(tiny_config(1, 2, 6), 1);
    assert!(matches!(model.forward(&[1, 6, 2], &[1]), Err(NeuralError::Dimension(_))));
    assert!(matches!(model.forward(&[1, 2], &[7]), Err(NeuralError::Dimension(_))));
    model.params_mut().output_weight.data[0] = f64::NAN;
    let batch = [Example::from_labels(vec![1, 4, 2], &[true])];
    assert!(matches!(model.loss_and_gradients(&batch), Err(NeuralError::NonFinite(_))));
    assert!(Seq2SeqF64::zeros(tiny_config(0, 2, 6)).is_err());
    assert!(Seq2SeqF64::zeros(tiny_config(1, 2, 4)).is_err());
}

fn synthetic_split(seed: u64, n_types: usize) -> (Corpus, Corpus, Vocabulary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = common::synthetic_corpus(&mut rng, n_types, 12, 4, 4);
    let s = split(&corpus, &SplitSpec { seed, ratios: [0.8, 0.1, 0.1] }).unwrap();
    let vocab = Vocabulary::build(&s.train, VocabKind::Sign);
    (s.train, s.dev, vocab)
}

fn small_model(vocab: &Vocabulary) -> ModelConfig {
    ModelConfig { kind: VocabKind::Sign, layers: 1, hidden: 16, embedding_dim: 8, vocab_size: vocab.len() }
}

#[test]
fn decoding_modes() {
    let (train_c, _, vocab) = synthetic_split(2, 60);
    let zero = Tagger::new(Seq2Seq::<f32>::zeros(small_model(&vocab)).unwrap(), vocab).unwrap();
    for p in &train_c.points {
        let constrained = zero.predict(&p.signs, DecodeMode::Constrained, OovPolicy::Unk).unwrap();
        assert_eq!(constrained.len(), p.len());
        let free = zero.predict(&p.signs, DecodeMode::Free, OovPolicy::Unk).unwrap();
        assert_eq!(free, vec![false; p.len()]);
    }
    let ids = zero.model.decode(&[1, 2], 3, DecodeMode::Free).unwrap();
    assert_eq!(eval::postprocess(&render_output(&ids), 3).len(), 3);
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let (train_c, dev, vocab) = synthetic_split(4, 150);
    let mconfig = small_model(&vocab);
    let tconfig = TrainConfig { max_epochs: 4, seed: 9, ..Default::default() };
    let a = train::<f32>(&train_c, &dev, &vocab, &mconfig, &tconfig).unwrap();
    let b = train::<f32>(&train_c, &dev, &vocab, &mconfig, &tconfig).unwrap();
    assert_eq!(a.history, b.history);
    let meta = vec![("seed".to_string(), "9".to_string())];
    let bytes = checkpoint::to_bytes(&a.tagger, &meta);
    assert_eq!(bytes, checkpoint::to_bytes(&b.tagger, &meta));

    let loaded = checkpoint::from_bytes::<f32>(&bytes).unwrap();
    assert_eq!(loaded.meta, meta);
    assert_eq!(loaded.tagger, a.tagger);
    let input = a.tagger.vocab.encode(&train_c.points[0].signs, OovPolicy::Unk);
    let (l1, _) = a.tagger.model.forward(&input, &[1, 3, 4]).unwrap();
    let (l2, _) = loaded.tagger.model.forward(&input, &[1, 3, 4]).unwrap();
    assert_eq!(l1, l2);

    assert!(checkpoint::from_bytes::<f32>(&bytes[..bytes.len() - 1]).is_err());
    assert!(checkpoint::from_bytes::<f32>(b"HIEROCLF\x02\0\0\0\0\0\0\0").is_err());
    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'X';
    assert!(checkpoint::from_bytes::<f32>(&wrong_magic).is_err());
}

#[test]
fn early_stopping_without_improvement_stops_at_epoch_two() {
    let (train_c, dev, vocab) = synthetic_split(5, 60);
    let tconfig = TrainConfig { learning_rate: 0.0, patience: 1, max_epochs: 50, ..Default::default() };
    let out = train::<f32>(&train_c, &dev, &vocab, &small_model(&vocab), &tconfig).unwrap();
    assert_eq!(out.history.records.len(), 2);
    assert_eq!(out.history.best_epoch, 1);
}

#[test]
fn training_loss_decreases() {
    let (train_c, dev, vocab) = synthetic_split(6, 300);
    let tconfig = TrainConfig { max_epochs: 4, patience: 10, ..Default::default() };
    let out = train::<f32>(&train_c, &dev, &vocab, &small_model(&vocab), &tconfig).unwrap();
    let losses: Vec<f64> = out.history.records.iter().map(|r| r.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0] + 1e-3), "{losses:?}");
    assert!(losses[3] < losses[0]);
}

#[test]
fn grid_search_selection_rules() {
    let (train_c, dev, vocab) = synthetic_split(7, 120);
    let mconfig = small_model(&vocab);
    let base = TrainConfig { max_epochs: 3, patience: 2, ..Default::default() };

    let one = GridSpec { batch_sizes: vec![4], learning_rates: vec![0.3] };
    let g = grid_search::<f32>(&train_c, &dev, &vocab, &mconfig, &base, &one).unwrap();
    assert_eq!((g.config.batch_size, g.config.learning_rate), (4, 0.3));

    let with_divergent = GridSpec { batch_sizes: vec![8], learning_rates: vec![1e30, 0.5] };
    let base_unclipped = TrainConfig { clip_norm: None, ..base.clone() };
    let g = grid_search::<f32>(&train_c, &dev, &vocab, &mconfig, &base_unclipped, &with_divergent).unwrap();
    assert_eq!(g.config.learning_rate, 0.5);
    assert!(g.cells[0].result.is_err());

    let grid = GridSpec { batch_sizes: vec![4, 16], learning_rates: vec![0.5, 0.05] };
    let g = grid_search::<f32>(&train_c, &dev, &vocab, &mconfig, &base, &grid).unwrap();
    let chosen = g.outcome.history.best_metric().unwrap();
    for cell in &g.cells {
        assert!(chosen <= *cell.result.as_ref().unwrap());
    }
    let chosen_cell = g
        .cells
        .iter()
        .find(|c| c.batch_size == g.config.batch_size && c.learning_rate == g.config.learning_rate)
        .unwrap();
    assert_eq!(chosen_cell.result, Ok(chosen));
}
