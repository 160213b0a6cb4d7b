use std::collections::BTreeSet;

use adforge_core::ad::{Ad, Domain};
use adforge_core::seq2seq::*;
use adforge_core::textproc::split_tokens;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_params(seed: u64, dims: Dims, scale: f64) -> ModelParams {
    ModelParams::uniform(dims, scale, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn logsumexp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// forward

mod oracle {
    //! Step-by-step LSTM written directly from the cell equations, sharing
    //! nothing with the library's implementation beyond parameter storage.
    use adforge_core::seq2seq::{LstmLayer, ModelParams};

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn gate(layer: &LstmLayer, which: usize, k: usize, x: &[f64], h: &[f64]) -> f64 {
        let hd = h.len();
        let r = which * hd + k;
        let mut a = layer.b[r];
        for (j, xj) in x.iter().enumerate() {
            a += layer.w_ih.get(r, j) * xj;
        }
        for (j, hj) in h.iter().enumerate() {
            a += layer.w_hh.get(r, j) * hj;
        }
        a
    }

    fn cell(layer: &LstmLayer, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = h.len();
        let mut h2 = vec![0.0; hd];
        let mut c2 = vec![0.0; hd];
        for k in 0..hd {
            let i = sig(gate(layer, 0, k, x, h));
            let f = sig(gate(layer, 1, k, x, h));
            let g = gate(layer, 2, k, x, h).tanh();
            let o = sig(gate(layer, 3, k, x, h));
            c2[k] = f * c[k] + i * g;
            h2[k] = o * c2[k].tanh();
        }
        (h2, c2)
    }

    pub fn run(p: &ModelParams, src: &[usize], tgt: &[usize]) -> Vec<Vec<f64>> {
        let hd = p.dims.d_hid;
        let mut h = vec![vec![0.0; hd]; 2];
        let mut c = vec![vec![0.0; hd]; 2];
        for &tok in src {
            let x0 = p.src_embed.row(tok).to_vec();
            let (h0, c0) = cell(&p.encoder[0], &x0, &h[0], &c[0]);
            let (h1, c1) = cell(&p.encoder[1], &h0, &h[1], &c[1]);
            h = vec![h0, h1];
            c = vec![c0, c1];
        }
        let mut rows = Vec::new();
        for &tok in &tgt[..tgt.len() - 1] {
            let x0 = p.tgt_embed.row(tok).to_vec();
            let (h0, c0) = cell(&p.decoder[0], &x0, &h[0], &c[0]);
            let (h1, c1) = cell(&p.decoder[1], &h0, &h[1], &c[1]);
            let v = p.dims.tgt_vocab;
            let logits: Vec<f64> = (0..v)
                .map(|j| p.out_b[j] + (0..hd).map(|k| h1[k] * p.out_w.get(k, j)).sum::<f64>())
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            rows.push(logits.iter().map(|l| (l.exp() / z).ln()).collect());
            h = vec![h0, h1];
            c = vec![c0, c1];
        }
        rows
    }
}

#[test]
fn forward_matches_independent_recomputation() {
    let dims = Dims { d_emb: 4, d_hid: 4, src_vocab: 8, tgt_vocab: 8 };
    let p = tiny_params(11, dims, 0.5);
    let src = [SOS, 4, 5, 7, EOS];
    let tgt = [SOS, 6, 4, 5, EOS];
    let (rows, _) = forward(&p, &src, &tgt, true).unwrap();
    let expect = oracle::run(&p, &src, &tgt);
    assert_eq!(rows.len(), expect.len());
    for (r, e) in rows.iter().zip(&expect) {
        for (a, b) in r.iter().zip(e) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn zero_params_give_uniform_rows() {
    let dims = Dims { d_emb: 3, d_hid: 5, src_vocab: 6, tgt_vocab: 8 };
    let p = ModelParams::zeros(dims);
    let tgt = [SOS, 4, 5, EOS];
    let (rows, _) = forward(&p, &[SOS, 4, EOS], &tgt, true).unwrap();
    for row in &rows {
        for v in row {
            assert!((v + 8f64.ln()).abs() < 1e-12);
        }
    }
    assert!((loss(&rows, &tgt).unwrap() - 8f64.ln()).abs() < 1e-12);
    assert!((8f64.ln() - 2.0794).abs() < 1e-4);
}

#[test]
fn forward_rejects_bad_shapes() {
    let dims = Dims { d_emb: 3, d_hid: 4, src_vocab: 6, tgt_vocab: 6 };
    let mut p = ModelParams::zeros(dims);
    assert!(matches!(forward(&p, &[SOS, 9], &[SOS, EOS], true), Err(Seq2SeqError::ShapeMismatch(_))));
    assert!(matches!(forward(&p, &[SOS], &[SOS], true), Err(Seq2SeqError::EmptyTarget)));
    p.out_b.pop();
    assert!(matches!(forward(&p, &[SOS], &[SOS, EOS], true), Err(Seq2SeqError::ShapeMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_are_normalized(seed in any::<u64>(), scale in 0.0f64..3.0, src_len in 1usize..8, tgt_len in 2usize..8, tf in any::<bool>()) {
        let dims = Dims { d_emb: 3, d_hid: 4, src_vocab: 7, tgt_vocab: 9 };
        let p = tiny_params(seed, dims, scale);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let src: Vec<usize> = (0..src_len).map(|_| rng.gen_range(0..7)).collect();
        let tgt: Vec<usize> = (0..tgt_len).map(|_| rng.gen_range(0..9)).collect();
        let (rows, _) = forward(&p, &src, &tgt, tf).unwrap();
        prop_assert_eq!(rows.len(), tgt_len - 1);
        for row in &rows {
            prop_assert!(logsumexp(row).abs() < 1e-6);
        }
    }

    #[test]
    fn decoding_is_bounded(seed in any::<u64>(), max_len in 0usize..12, src in proptest::collection::vec(0usize..7, 0..10)) {
        let dims = Dims { d_emb: 3, d_hid: 4, src_vocab: 7, tgt_vocab: 9 };
        let p = tiny_params(seed, dims, 2.0);
        let out = greedy_decode(&p, &src, max_len);
        prop_assert!(out.len() <= max_len);
        prop_assert!(out.iter().all(|&t| t != PAD && t != SOS && t != EOS && t < 9));
    }
}

// ---------------------------------------------------------------------------
// loss

#[test]
fn loss_matches_scalar_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = 6;
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|_| {
            let logits: Vec<f64> = (0..v).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let z = logsumexp(&logits);
            logits.iter().map(|l| l - z).collect()
        })
        .collect();
    let tgt = [SOS, 4, PAD, 5, 2, PAD];
    let mut sum = 0.0;
    let mut n = 0.0;
    for pos in 1..tgt.len() {
        if tgt[pos] != PAD {
            sum += -rows[pos - 1][tgt[pos]];
            n += 1.0;
        }
    }
    assert!((loss(&rows, &tgt).unwrap() - sum / n).abs() < 1e-12);

    let one_hot: Vec<Vec<f64>> = tgt[1..]
        .iter()
        .map(|&y| (0..v).map(|j| if j == y { 0.0 } else { -1e9 }).collect())
        .collect();
    assert!(loss(&one_hot, &tgt).unwrap().abs() < 1e-9);
    assert!(matches!(loss(&rows, &[SOS, PAD, PAD]), Err(Seq2SeqError::EmptyTarget)));
}

// ---------------------------------------------------------------------------
// backward

/// Largest relative error between analytic and central-difference gradients
/// over every weight, with its tensor name.
fn max_gradient_error(p: &ModelParams, src: &[usize], tgt: &[usize]) -> (f64, String) {
    let (_, cache) = forward(p, src, tgt, true).unwrap();
    let grads = backward(p, &cache, tgt).unwrap();
    let names = ModelParams::tensor_names();
    let h = 1e-4;
    let mut worst = (0.0, String::new());
    let mut probe = p.clone();
    for (ti, analytic) in grads.tensors().iter().enumerate() {
        for i in 0..analytic.len() {
            let orig = probe.tensors()[ti][i];
            probe.tensors_mut()[ti][i] = orig + h;
            let (rows, _) = forward(&probe, src, tgt, true).unwrap();
            let plus = loss(&rows, tgt).unwrap();
            probe.tensors_mut()[ti][i] = orig - h;
            let (rows, _) = forward(&probe, src, tgt, true).unwrap();
            let minus = loss(&rows, tgt).unwrap();
            probe.tensors_mut()[ti][i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic[i] - numeric).abs() / numeric.abs().max(1e-8);
            if err > worst.0 {
                worst = (err, format!("{}[{i}] analytic {} numeric {numeric}", names[ti], analytic[i]));
            }
        }
    }
    worst
}

#[test]
fn gradient_check_tiny_net() {
    let dims = Dims { d_emb: 5, d_hid: 6, src_vocab: 12, tgt_vocab: 14 };
    for seed in 0..3 {
        let p = tiny_params(seed, dims, 0.5);
        let src = [SOS, 4, 9, 5, 11, EOS];
        let tgt = [SOS, 7, 13, PAD, 4, EOS];
        let (err, at) = max_gradient_error(&p, &src, &tgt);
        assert!(err <= 1e-3, "seed {seed}: {err:e} at {at}");
    }
}

#[test]
fn gradient_tensor_order_matches_names() {
    let dims = Dims { d_emb: 2, d_hid: 3, src_vocab: 5, tgt_vocab: 6 };
    let p = ModelParams::zeros(dims);
    assert_eq!(p.tensors().len(), ModelParams::tensor_names().len());
    assert_eq!(p.tensors()[0].len(), 10);
    assert_eq!(p.tensors().last().unwrap().len(), 6);
}

#[test]
fn clipping_to_unit_norm() {
    let dims = Dims { d_emb: 2, d_hid: 2, src_vocab: 5, tgt_vocab: 5 };
    let mut g = ModelParams::zeros(dims);
    g.out_b[0] = 6.0;
    g.out_b[1] = 8.0;
    let before = clip_global_norm(&mut g, 1.0).unwrap();
    assert!((before - 10.0).abs() < 1e-12);
    assert!((g.global_norm() - 1.0).abs() < 1e-9);

    let mut small = ModelParams::zeros(dims);
    small.out_b[0] = 0.5;
    clip_global_norm(&mut small, 1.0).unwrap();
    assert_eq!(small.out_b[0], 0.5);

    small.out_b[1] = f64::NAN;
    assert!(matches!(clip_global_norm(&mut small, 1.0), Err(Seq2SeqError::NonFinite)));
}

#[test]
fn adam_zero_gradient_leaves_params() {
    let dims = Dims { d_emb: 3, d_hid: 3, src_vocab: 5, tgt_vocab: 5 };
    let mut p = tiny_params(1, dims, 0.1);
    let before = p.clone();
    let mut state = AdamState::new(&p);
    let zero = p.zeros_like();
    adam_step(&mut p, &zero, &mut state, &AdamConfig::default());
    assert_eq!(p, before);
    assert_eq!(state.t, 1);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let dims = Dims { d_emb: 2, d_hid: 2, src_vocab: 5, tgt_vocab: 5 };
    let mut p = ModelParams::zeros(dims);
    let mut g = p.zeros_like();
    g.out_b[2] = 0.3;
    g.out_b[3] = -7.0;
    let mut state = AdamState::new(&p);
    adam_step(&mut p, &g, &mut state, &AdamConfig::default());
    // bias-corrected first step is lr * g / (|g| + eps)
    assert!((p.out_b[2] + 1e-3).abs() < 1e-10);
    assert!((p.out_b[3] - 1e-3).abs() < 1e-10);
}

// ---------------------------------------------------------------------------
// pairs

fn ad(id: &str, query: &str, impressions: u64, clicks: u64) -> Ad {
    Ad {
        id: id.into(),
        query: query.into(),
        domain: Domain::MedicalSymptoms,
        titles: vec![format!("Title {id}")],
        descriptions: vec![format!("About {query}.")],
        impressions,
        clicks,
        url: None,
    }
}

#[test]
fn translation_pairs_small_cases() {
    let three = [ad("a", "q", 100, 1), ad("b", "q", 100, 2), ad("c", "q", 100, 3)];
    assert_eq!(translation_pair_indices(&three).unwrap().len(), 3);
    let tie = [ad("a", "q", 100, 2), ad("b", "q", 200, 4)];
    assert!(matches!(translation_pair_indices(&tie), Err(Seq2SeqError::NoPairs)));
    let unseen = [ad("a", "q", 0, 0), ad("b", "q", 10, 1)];
    assert!(matches!(translation_pair_indices(&unseen), Err(Seq2SeqError::NoImpressions(_))));
}

/// All ordered pairs (i, j) over the whole corpus with the same query and a
/// strictly lower CTR at i, computed with floating-point CTRs.
fn brute_force_pairs(ads: &[Ad]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..ads.len() {
        for j in 0..ads.len() {
            let (a, b) = (&ads[i], &ads[j]);
            if a.query == b.query && a.ctr().unwrap() < b.ctr().unwrap() {
                out.insert((i, j));
            }
        }
    }
    out
}

fn corpus_strategy() -> impl Strategy<Value = Vec<Ad>> {
    proptest::collection::vec((0usize..5, 1u64..50, 0u64..50), 1..100).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (q, imp, clk))| ad(&format!("ad{i}"), &format!("q{q}"), imp, clk.min(imp)))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairs_equal_brute_force(ads in corpus_strategy()) {
        let expect = brute_force_pairs(&ads);
        match translation_pair_indices(&ads) {
            Ok(pairs) => {
                let got: BTreeSet<_> = pairs.iter().cloned().collect();
                prop_assert_eq!(got.len(), pairs.len());
                prop_assert_eq!(got, expect);
            }
            Err(Seq2SeqError::NoPairs) => prop_assert!(expect.is_empty()),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn best_ad_tie_rules() {
    let ads = [ad("x", "q", 100, 1), ad("y", "q", 100, 5)];
    assert_eq!(best_ad(&ads).unwrap().id, "y");
    let tie = [ad("a", "q", 300, 15), ad("b", "q", 900, 45)];
    assert_eq!(best_ad(&tie).unwrap().id, "b");
    let full_tie = [ad("b", "q", 100, 5), ad("a", "q", 100, 5)];
    assert_eq!(best_ad(&full_tie).unwrap().id, "a");
    assert!(best_ad(&[]).is_none());
}

// ---------------------------------------------------------------------------
// training

pub fn toy_pairs() -> Vec<TextPair> {
    include_str!("fixtures/toy_pairs.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let (s, t) = l.split_once('\t').unwrap();
            TextPair { source: s.into(), target: t.into(), query_id: format!("q{i}") }
        })
        .collect()
}

fn overfit_config() -> TrainConfig {
    TrainConfig {
        d_emb: 16,
        d_hid: 32,
        epochs: 2000,
        lr: 5e-3,
        min_freq: 1,
        stop_at_loss: Some(0.01),
        seed: 7,
        ..TrainConfig::default()
    }
}

#[test]
fn overfits_toy_corpus() {
    let pairs = toy_pairs();
    assert_eq!(pairs.len(), 20);
    let (model, losses) = Seq2Seq::fit(&pairs, &overfit_config()).unwrap();
    let last = *losses.last().unwrap();
    assert!(losses.len() <= 2000 && last <= 0.1, "loss {last} after {} epochs", losses.len());
    for p in &pairs {
        let want = adforge_core::textproc::detokenize(&split_tokens(&p.target));
        assert_eq!(model.translate(&p.source), want);
    }
}

#[test]
fn training_is_deterministic() {
    let pairs = &toy_pairs()[..5];
    let cfg = TrainConfig { d_emb: 4, d_hid: 6, epochs: 3, min_freq: 1, teacher_forcing: 0.5, ..TrainConfig::default() };
    let (a, la) = Seq2Seq::fit(pairs, &cfg).unwrap();
    let (b, lb) = Seq2Seq::fit(pairs, &cfg).unwrap();
    assert_eq!(la.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), lb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a, b);
    let other = TrainConfig { seed: 1, ..cfg };
    let (_, lc) = Seq2Seq::fit(pairs, &other).unwrap();
    assert_ne!(la, lc);
}

#[test]
fn zero_epochs_returns_initialization() {
    let cfg = TrainConfig { d_emb: 3, d_hid: 4, epochs: 0, seed: 42, ..TrainConfig::default() };
    let pairs = vec![TrainingPair { source: vec![SOS, 4, EOS], target: vec![SOS, 5, EOS], query_id: "q".into() }];
    let out = train(&pairs, 6, 7, &cfg).unwrap();
    assert!(out.losses.is_empty());
    let dims = Dims { d_emb: 3, d_hid: 4, src_vocab: 6, tgt_vocab: 7 };
    assert_eq!(out.params, init_params(dims, &cfg));
    assert!(out.params.tensors().iter().flat_map(|t| t.iter()).all(|v| v.abs() <= 0.08));
}

#[test]
fn config_validation() {
    assert!(TrainConfig { teacher_forcing: 1.5, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { d_hid: 0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { lr: 0.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig::default().validate().is_ok());
    let parsed: TrainConfig = serde_json::from_str(r#"{"d_hid": 32, "epochs": 5}"#).unwrap();
    assert_eq!(parsed.d_hid, 32);
    assert_eq!(parsed.d_emb, 64);
    assert!(matches!(train(&[], 5, 5, &TrainConfig::default()), Err(Seq2SeqError::NoPairs)));
}

#[test]
fn checkpoint_roundtrip() {
    let pairs = &toy_pairs()[..4];
    let cfg = TrainConfig { d_emb: 4, d_hid: 5, epochs: 2, min_freq: 1, ..TrainConfig::default() };
    let (model, _) = Seq2Seq::fit(pairs, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("models/ms.bin");
    model.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"ADF1");
    assert!(vocab_path(&path).exists());
    let loaded = Seq2Seq::load(&path).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(loaded.translate(&pairs[0].source), model.translate(&pairs[0].source));

    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(Seq2Seq::load(&path), Err(Seq2SeqError::BadCheckpoint(_))));
    std::fs::write(&path, b"nope").unwrap();
    assert!(matches!(Seq2Seq::load(&path), Err(Seq2SeqError::BadCheckpoint(_))));
}

#[test]
fn translate_handles_unknown_and_empty_input() {
    let pairs = &toy_pairs()[..3];
    let cfg = TrainConfig { d_emb: 4, d_hid: 5, epochs: 1, min_freq: 1, max_len: 6, ..TrainConfig::default() };
    let (model, _) = Seq2Seq::fit(pairs, &cfg).unwrap();
    for input in ["", "zzz qqq", "<ORG> <ORG> <ORG>"] {
        let out = model.translate(input);
        assert!(split_tokens(&out).len() <= 6);
        assert!(!out.contains("<pad>") && !out.contains("<sos>"));
    }
}
