use rand::Rng;

use super::Seq2SeqError;

/// Number of stacked LSTM layers in both encoder and decoder.
pub const LAYERS: usize = 2;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self * x`
    pub(crate) fn matvec_add(&self, out: &mut [f64], x: &[f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.row(r).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// `out += selfᵀ * y`
    pub(crate) fn matvec_t_add(&self, out: &mut [f64], y: &[f64]) {
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
    }

    /// `self += a bᵀ`
    pub(crate) fn outer_add(&mut self, a: &[f64], b: &[f64]) {
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            for (g, bv) in self.row_mut(r).iter_mut().zip(b) {
                *g += ar * bv;
            }
        }
    }
}

/// One LSTM layer. Gate rows are stacked in the order input, forget,
/// cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// 4H × input size.
    pub w_ih: Mat,
    /// 4H × H.
    pub w_hh: Mat,
    /// 4H.
    pub b: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            w_ih: Mat::zeros(4 * hidden, input),
            w_hh: Mat::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols
    }
}

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub d_emb: usize,
    pub d_hid: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
}

/// All weights of the encoder-decoder. The same type holds gradients and
/// Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    /// src_vocab × d_emb.
    pub src_embed: Mat,
    /// tgt_vocab × d_emb.
    pub tgt_embed: Mat,
    pub encoder: Vec<LstmLayer>,
    pub decoder: Vec<LstmLayer>,
    /// d_hid × tgt_vocab.
    pub out_w: Mat,
    pub out_b: Vec<f64>,
}

pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        let Dims {
            d_emb,
            d_hid,
            src_vocab,
            tgt_vocab,
        } = dims;
        let stack = || {
            (0..LAYERS)
                .map(|l| LstmLayer::zeros(if l == 0 { d_emb } else { d_hid }, d_hid))
                .collect()
        };
        ModelParams {
            dims,
            src_embed: Mat::zeros(src_vocab, d_emb),
            tgt_embed: Mat::zeros(tgt_vocab, d_emb),
            encoder: stack(),
            decoder: stack(),
            out_w: Mat::zeros(d_hid, tgt_vocab),
            out_b: vec![0.0; tgt_vocab],
        }
    }

    /// Every weight drawn from U[-scale, scale], tensors in declared order.
    pub fn uniform(dims: Dims, scale: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dims);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    /// Tensor names in declared (checkpoint) order.
    pub fn tensor_names() -> Vec<String> {
        let mut names = vec!["src_embed".to_string(), "tgt_embed".to_string()];
        for side in ["encoder", "decoder"] {
            for l in 0..LAYERS {
                for t in ["w_ih", "w_hh", "b"] {
                    names.push(format!("{side}.{l}.{t}"));
                }
            }
        }
        names.push("out_w".into());
        names.push("out_b".into());
        names
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.src_embed.data, &self.tgt_embed.data];
        for layer in self.encoder.iter().chain(&self.decoder) {
            out.push(&layer.w_ih.data);
            out.push(&layer.w_hh.data);
            out.push(&layer.b);
        }
        out.push(&self.out_w.data);
        out.push(&self.out_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.src_embed.data, &mut self.tgt_embed.data];
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.push(&mut layer.w_ih.data);
            out.push(&mut layer.w_hh.data);
            out.push(&mut layer.b);
        }
        out.push(&mut self.out_w.data);
        out.push(&mut self.out_b);
        out
    }

    pub fn num_weights(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Square root of the sum of squares over every tensor.
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Verifies every tensor against `dims`.
    pub fn check_shapes(&self) -> Result<(), Seq2SeqError> {
        let expect = Self::zeros(self.dims);
        let mismatch = |what: &str| Err(Seq2SeqError::ShapeMismatch(what.to_string()));
        if self.encoder.len() != LAYERS || self.decoder.len() != LAYERS {
            return mismatch("layer count");
        }
        let check = |a: &Mat, b: &Mat| a.rows == b.rows && a.cols == b.cols && a.data.len() == a.rows * a.cols;
        if !check(&self.src_embed, &expect.src_embed) {
            return mismatch("src_embed");
        }
        if !check(&self.tgt_embed, &expect.tgt_embed) {
            return mismatch("tgt_embed");
        }
        for (got, want) in self
            .encoder
            .iter()
            .chain(&self.decoder)
            .zip(expect.encoder.iter().chain(&expect.decoder))
        {
            if !check(&got.w_ih, &want.w_ih) || !check(&got.w_hh, &want.w_hh) || got.b.len() != want.b.len() {
                return mismatch("lstm layer");
            }
        }
        if !check(&self.out_w, &expect.out_w) || self.out_b.len() != expect.out_b.len() {
            return mismatch("out_proj");
        }
        Ok(())
    }
}
