//! Binary checkpoint: magic `ADF1`, a block of little-endian u32 config
//! values (version, d_emb, d_hid, src_vocab, tgt_vocab, layers, max_len,
//! tensor count), then every tensor as little-endian f64 in declared order.
//! Vocabularies live in a JSON sidecar next to the model file.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::params::{Dims, ModelParams, LAYERS};
use super::vocab::Vocab;
use super::{Seq2Seq, Seq2SeqError};

pub const MAGIC: &[u8; 4] = b"ADF1";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VocabFile {
    source: Vocab,
    target: Vocab,
}

/// `model.bin` → `model.vocab.json`.
pub fn vocab_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("vocab.json")
}

pub fn write_params(mut w: impl Write, params: &ModelParams, max_len: usize) -> Result<(), Seq2SeqError> {
    let d = params.dims;
    let tensors = params.tensors();
    let mut header = Vec::with_capacity(36);
    header.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        d.d_emb as u32,
        d.d_hid as u32,
        d.src_vocab as u32,
        d.tgt_vocab as u32,
        LAYERS as u32,
        max_len as u32,
        tensors.len() as u32,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(params.num_weights() * 8);
    for t in tensors {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Returns the parameters and the stored decoding length.
pub fn read_params(mut r: impl Read) -> Result<(ModelParams, usize), Seq2SeqError> {
    let bad = |m: String| Seq2SeqError::BadCheckpoint(m);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 36 || &bytes[..4] != MAGIC {
        return Err(bad("missing ADF1 header".into()));
    }
    let word = |i: usize| {
        let o = 4 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize
    };
    if word(0) != VERSION as usize {
        return Err(bad(format!("unsupported version {}", word(0))));
    }
    if word(5) != LAYERS {
        return Err(bad(format!("expected {LAYERS} layers, found {}", word(5))));
    }
    let dims = Dims {
        d_emb: word(1),
        d_hid: word(2),
        src_vocab: word(3),
        tgt_vocab: word(4),
    };
    let max_len = word(6);
    let mut params = ModelParams::zeros(dims);
    let expected_tensors = params.tensors().len();
    if word(7) != expected_tensors {
        return Err(bad(format!("expected {expected_tensors} tensors, found {}", word(7))));
    }
    let body = &bytes[36..];
    if body.len() != params.num_weights() * 8 {
        return Err(bad(format!(
            "expected {} weight bytes, found {}",
            params.num_weights() * 8,
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    if !params.is_finite() {
        return Err(bad("non-finite weight".into()));
    }
    Ok((params, max_len))
}

pub fn save(model: &Seq2Seq, path: &Path) -> Result<(), Seq2SeqError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_params(&mut w, &model.params, model.max_len)?;
    w.flush()?;
    let vocab = VocabFile {
        source: model.src_vocab.clone(),
        target: model.tgt_vocab.clone(),
    };
    std::fs::write(vocab_path(path), serde_json::to_vec_pretty(&vocab)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Seq2Seq, Seq2SeqError> {
    let file = std::fs::File::open(path)?;
    let (params, max_len) = read_params(std::io::BufReader::new(file))?;
    let vocab: VocabFile = serde_json::from_slice(&std::fs::read(vocab_path(path))?)?;
    if vocab.source.len() != params.dims.src_vocab || vocab.target.len() != params.dims.tgt_vocab {
        return Err(Seq2SeqError::BadCheckpoint(
            "vocabulary sizes disagree with the model file".into(),
        ));
    }
    Ok(Seq2Seq {
        params,
        src_vocab: vocab.source,
        tgt_vocab: vocab.target,
        max_len,
    })
}
