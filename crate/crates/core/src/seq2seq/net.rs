use super::params::{Gradients, LstmLayer, ModelParams, LAYERS};
use super::vocab::{PAD, SOS};
use super::Seq2SeqError;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one LSTM cell application.
#[derive(Debug, Clone)]
struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates i, f, g, o stacked (4H).
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

fn cell_forward(layer: &LstmLayer, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> CellCache {
    let hd = layer.hidden();
    let mut a = layer.b.clone();
    layer.w_ih.matvec_add(&mut a, x);
    layer.w_hh.matvec_add(&mut a, h_prev);
    for k in 0..hd {
        a[k] = sigmoid(a[k]);
        a[hd + k] = sigmoid(a[hd + k]);
        a[2 * hd + k] = a[2 * hd + k].tanh();
        a[3 * hd + k] = sigmoid(a[3 * hd + k]);
    }
    let c: Vec<f64> = (0..hd)
        .map(|k| a[hd + k] * c_prev[k] + a[k] * a[2 * hd + k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..hd).map(|k| a[3 * hd + k] * tanh_c[k]).collect();
    CellCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: a,
        tanh_c,
        c,
        h,
    }
}

/// Backpropagates `dh`/`dc` (gradients w.r.t. this cell's h and c outputs)
/// and accumulates weight gradients into `grad`. Returns (dx, dh_prev, dc_prev).
fn cell_backward(
    layer: &LstmLayer,
    grad: &mut LstmLayer,
    cache: &CellCache,
    dh: &[f64],
    dc: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = layer.hidden();
    let g = &cache.gates;
    let mut da = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for k in 0..hd {
        let (i, f, gg, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
        let tc = cache.tanh_c[k];
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        da[k] = dct * gg * i * (1.0 - i);
        da[hd + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        da[2 * hd + k] = dct * i * (1.0 - gg * gg);
        da[3 * hd + k] = dh[k] * tc * o * (1.0 - o);
        dc_prev[k] = dct * f;
    }
    grad.w_ih.outer_add(&da, &cache.x);
    grad.w_hh.outer_add(&da, &cache.h_prev);
    grad.b.iter_mut().zip(&da).for_each(|(b, d)| *b += d);
    let mut dx = vec![0.0; cache.x.len()];
    layer.w_ih.matvec_t_add(&mut dx, &da);
    let mut dh_prev = vec![0.0; hd];
    layer.w_hh.matvec_t_add(&mut dh_prev, &da);
    (dx, dh_prev, dc_prev)
}

/// Runs one time step through the layer stack, updating `h`/`c` in place.
fn stack_step(
    layers: &[LstmLayer],
    x: &[f64],
    h: &mut [Vec<f64>],
    c: &mut [Vec<f64>],
) -> Vec<CellCache> {
    let mut caches = Vec::with_capacity(LAYERS);
    let mut input = x.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let cache = cell_forward(layer, &input, &h[l], &c[l]);
        h[l] = cache.h.clone();
        c[l] = cache.c.clone();
        input = cache.h.clone();
        caches.push(cache);
    }
    caches
}

fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter_mut().for_each(|v| *v -= lse);
}

fn output_row(params: &ModelParams, h_top: &[f64]) -> Vec<f64> {
    let mut logits = params.out_b.clone();
    params.out_w.matvec_t_add(&mut logits, h_top);
    log_softmax(&mut logits);
    logits
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    src: Vec<usize>,
    dec_inputs: Vec<usize>,
    enc: Vec<Vec<CellCache>>,
    dec: Vec<Vec<CellCache>>,
    log_probs: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Tokens fed to the decoder at each step.
    pub fn decoder_inputs(&self) -> &[usize] {
        &self.dec_inputs
    }
}

/// Per-step caches for every layer, then final hidden and cell states.
type Encoded = (Vec<Vec<CellCache>>, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn encode(params: &ModelParams, src: &[usize]) -> Encoded {
    let hd = params.dims.d_hid;
    let mut h = vec![vec![0.0; hd]; LAYERS];
    let mut c = vec![vec![0.0; hd]; LAYERS];
    let enc = src
        .iter()
        .map(|&tok| stack_step(&params.encoder, params.src_embed.row(tok), &mut h, &mut c))
        .collect();
    (enc, h, c)
}

fn check_indices(params: &ModelParams, src: &[usize], tgt: &[usize]) -> Result<(), Seq2SeqError> {
    params.check_shapes()?;
    if let Some(&i) = src.iter().find(|&&i| i >= params.dims.src_vocab) {
        return Err(Seq2SeqError::ShapeMismatch(format!(
            "source index {i} outside vocabulary of {}",
            params.dims.src_vocab
        )));
    }
    if let Some(&i) = tgt.iter().find(|&&i| i >= params.dims.tgt_vocab) {
        return Err(Seq2SeqError::ShapeMismatch(format!(
            "target index {i} outside vocabulary of {}",
            params.dims.tgt_vocab
        )));
    }
    Ok(())
}

/// Encodes `src`, then decodes `tgt.len() - 1` steps. Row `t` of the
/// result is the log-probability distribution for `tgt[t + 1]`. With
/// teacher forcing the decoder reads `tgt[t]` at step `t`; without it, it
/// reads its own previous argmax (starting from `tgt[0]`).
pub fn forward(
    params: &ModelParams,
    src: &[usize],
    tgt: &[usize],
    teacher_forcing: bool,
) -> Result<(Vec<Vec<f64>>, ForwardCache), Seq2SeqError> {
    check_indices(params, src, tgt)?;
    if tgt.len() < 2 {
        return Err(Seq2SeqError::EmptyTarget);
    }
    let (enc, mut h, mut c) = encode(params, src);
    let steps = tgt.len() - 1;
    let mut dec = Vec::with_capacity(steps);
    let mut dec_inputs = Vec::with_capacity(steps);
    let mut log_probs = Vec::with_capacity(steps);
    let mut input = tgt[0];
    for t in 0..steps {
        dec_inputs.push(input);
        let caches = stack_step(&params.decoder, params.tgt_embed.row(input), &mut h, &mut c);
        let row = output_row(params, &caches[LAYERS - 1].h);
        input = if teacher_forcing { tgt[t + 1] } else { argmax(&row) };
        dec.push(caches);
        log_probs.push(row);
    }
    let cache = ForwardCache {
        src: src.to_vec(),
        dec_inputs,
        enc,
        dec,
        log_probs: log_probs.clone(),
    };
    Ok((log_probs, cache))
}

/// Mean negative log-likelihood of `tgt[1..]` under the rows, skipping
/// `<pad>` targets.
pub fn loss(log_probs: &[Vec<f64>], tgt: &[usize]) -> Result<f64, Seq2SeqError> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (row, &y) in log_probs.iter().zip(tgt.iter().skip(1)) {
        if y == PAD {
            continue;
        }
        total -= row[y];
        n += 1;
    }
    if n == 0 {
        return Err(Seq2SeqError::EmptyTarget);
    }
    Ok(total / n as f64)
}

/// Gradient of [`loss`] with respect to every parameter.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    tgt: &[usize],
) -> Result<Gradients, Seq2SeqError> {
    if tgt.len() != cache.log_probs.len() + 1 {
        return Err(Seq2SeqError::ShapeMismatch(format!(
            "target has {} tokens, cache has {} steps",
            tgt.len(),
            cache.log_probs.len()
        )));
    }
    let n = tgt[1..].iter().filter(|&&y| y != PAD).count();
    if n == 0 {
        return Err(Seq2SeqError::EmptyTarget);
    }
    let hd = params.dims.d_hid;
    let mut grad = params.zeros_like();
    let mut dh = vec![vec![0.0; hd]; LAYERS];
    let mut dc = vec![vec![0.0; hd]; LAYERS];

    for t in (0..cache.dec.len()).rev() {
        let caches = &cache.dec[t];
        let y = tgt[t + 1];
        let mut d_top = vec![0.0; hd];
        if y != PAD {
            let mut dlogits: Vec<f64> = cache.log_probs[t].iter().map(|lp| lp.exp()).collect();
            dlogits[y] -= 1.0;
            dlogits.iter_mut().for_each(|v| *v /= n as f64);
            let h_top = &caches[LAYERS - 1].h;
            grad.out_w.outer_add(h_top, &dlogits);
            grad.out_b.iter_mut().zip(&dlogits).for_each(|(b, d)| *b += d);
            params.out_w.matvec_add(&mut d_top, &dlogits);
        }
        let dx = stack_backward(&params.decoder, &mut grad.decoder, caches, d_top, &mut dh, &mut dc);
        let row = grad.tgt_embed.row_mut(cache.dec_inputs[t]);
        row.iter_mut().zip(&dx).for_each(|(g, d)| *g += d);
    }
    for t in (0..cache.enc.len()).rev() {
        let dx = stack_backward(
            &params.encoder,
            &mut grad.encoder,
            &cache.enc[t],
            vec![0.0; hd],
            &mut dh,
            &mut dc,
        );
        let row = grad.src_embed.row_mut(cache.src[t]);
        row.iter_mut().zip(&dx).for_each(|(g, d)| *g += d);
    }
    Ok(grad)
}

/// One time step of backpropagation through the layer stack. `d_top` is
/// the gradient arriving at the top layer's h from the output projection;
/// `dh`/`dc` carry recurrent gradients and are updated to the previous step.
/// Returns the gradient for the step's input embedding.
fn stack_backward(
    layers: &[LstmLayer],
    grads: &mut [LstmLayer],
    caches: &[CellCache],
    d_top: Vec<f64>,
    dh: &mut [Vec<f64>],
    dc: &mut [Vec<f64>],
) -> Vec<f64> {
    let mut from_above = d_top;
    for l in (0..LAYERS).rev() {
        let dh_total: Vec<f64> = dh[l].iter().zip(&from_above).map(|(a, b)| a + b).collect();
        let (dx, dh_prev, dc_prev) = cell_backward(&layers[l], &mut grads[l], &caches[l], &dh_total, &dc[l]);
        dh[l] = dh_prev;
        dc[l] = dc_prev;
        from_above = dx;
    }
    from_above
}

/// Greedy decoding from `<sos>`. `<pad>` and `<sos>` are never chosen;
/// stops at `<eos>` (not included) or after `max_len` tokens.
pub fn greedy_decode(params: &ModelParams, src: &[usize], max_len: usize) -> Vec<usize> {
    let (_, mut h, mut c) = encode(params, src);
    let mut out = Vec::new();
    let mut input = SOS;
    while out.len() < max_len {
        let caches = stack_step(&params.decoder, params.tgt_embed.row(input), &mut h, &mut c);
        let mut row = output_row(params, &caches[LAYERS - 1].h);
        row[PAD] = f64::NEG_INFINITY;
        row[SOS] = f64::NEG_INFINITY;
        let next = argmax(&row);
        if next == super::vocab::EOS {
            break;
        }
        out.push(next);
        input = next;
    }
    out
}
