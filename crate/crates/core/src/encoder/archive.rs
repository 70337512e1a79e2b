//! Model archive: a text header followed by binary tensors.
//!
//! ```text
//! warnpath-model 1
//! vocab_hash <hex>
//! vocab_size <n>
//! num_layers <n>
//! ...
//! tensors <count>
//! end_header
//! ```
//!
//! Each tensor is then `u32` name length, UTF-8 name, `u32` rank, `u64` per
//! dimension, and the row-major data as little-endian `f64`. Nothing may
//! follow the last tensor.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::model::EncoderParameters;
use super::Hyperparams;
use crate::tokens::Vocabulary;

const MAGIC: &str = "warnpath-model";
const VERSION: u32 = 1;
/// Guards against absurd allocations from a corrupt header.
const MAX_NAME_LEN: u32 = 1 << 10;
const MAX_RANK: u32 = 8;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("malformed model archive: {0}")]
    Format(String),
    #[error("model was trained with vocabulary {expected}, got {found}")]
    VocabMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn format_err<T>(msg: impl Into<String>) -> Result<T, ArchiveError> {
    Err(ArchiveError::Format(msg.into()))
}

/// Trained parameters with everything needed to run them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyperparams: Hyperparams,
    pub vocab_hash: String,
    pub params: EncoderParameters,
}

impl Model {
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<(), ArchiveError> {
        let found = vocab.hash();
        if found != self.vocab_hash {
            return Err(ArchiveError::VocabMismatch {
                expected: self.vocab_hash.clone(),
                found,
            });
        }
        Ok(())
    }
}

pub fn write_model(mut w: impl Write, model: &Model) -> Result<(), ArchiveError> {
    let hp = &model.hyperparams;
    let tensors = model.params.tensors();
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "vocab_hash {}", model.vocab_hash)?;
    writeln!(w, "vocab_size {}", model.params.vocab_size())?;
    writeln!(w, "num_layers {}", hp.num_layers)?;
    writeln!(w, "d_model {}", hp.d_model)?;
    writeln!(w, "num_heads {}", hp.num_heads)?;
    writeln!(w, "d_ff {}", hp.d_ff)?;
    writeln!(w, "max_len {}", hp.max_len)?;
    writeln!(w, "batch_size {}", hp.batch_size)?;
    // `{:?}` prints the shortest string that parses back to the same f64.
    writeln!(w, "learning_rate {:?}", hp.learning_rate)?;
    writeln!(w, "max_epochs {}", hp.max_epochs)?;
    writeln!(w, "patience {}", hp.patience)?;
    writeln!(w, "val_fraction {:?}", hp.val_fraction)?;
    writeln!(w, "seed {}", hp.seed)?;
    writeln!(w, "ln_epsilon {:?}", hp.ln_epsilon)?;
    writeln!(w, "truncate {}", hp.truncate)?;
    writeln!(w, "tensors {}", tensors.len())?;
    writeln!(w, "end_header")?;
    for t in &tensors {
        w.write_all(&(t.name.len() as u32).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for &d in &t.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_model(path: &Path, model: &Model) -> Result<(), ArchiveError> {
    write_model(BufWriter::new(File::create(path)?), model)
}

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), ArchiveError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ArchiveError::Format(format!("truncated {what}")),
        _ => ArchiveError::Io(e),
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, ArchiveError> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64, ArchiveError> {
    let mut b = [0u8; 8];
    read_exact_or_format(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

struct Header {
    fields: Vec<(String, String)>,
}

impl Header {
    fn get(&self, key: &str) -> Result<&str, ArchiveError> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| ArchiveError::Format(format!("header lacks `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ArchiveError> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| ArchiveError::Format(format!("bad value `{v}` for `{key}`")))
    }
}

pub fn read_model(r: impl Read) -> Result<Model, ArchiveError> {
    let mut r = BufReader::new(r);
    let mut fields = Vec::new();
    let mut first = true;
    loop {
        let mut line = Vec::new();
        let n = r.read_until(b'\n', &mut line)?;
        if n == 0 {
            return format_err("missing end_header");
        }
        let line = String::from_utf8(line).or_else(|_| format_err("header is not UTF-8"))?;
        let line = line.trim_end_matches('\n');
        if first {
            if line != format!("{MAGIC} {VERSION}") {
                return format_err(format!("unrecognized archive signature `{line}`"));
            }
            first = false;
            continue;
        }
        if line == "end_header" {
            break;
        }
        let Some((k, v)) = line.split_once(' ') else {
            return format_err(format!("bad header line `{line}`"));
        };
        fields.push((k.to_string(), v.to_string()));
    }
    let h = Header { fields };
    let hyperparams = Hyperparams {
        num_layers: h.parse("num_layers")?,
        d_model: h.parse("d_model")?,
        num_heads: h.parse("num_heads")?,
        d_ff: h.parse("d_ff")?,
        max_len: h.parse("max_len")?,
        batch_size: h.parse("batch_size")?,
        learning_rate: h.parse("learning_rate")?,
        max_epochs: h.parse("max_epochs")?,
        patience: h.parse("patience")?,
        val_fraction: h.parse("val_fraction")?,
        seed: h.parse("seed")?,
        ln_epsilon: h.parse("ln_epsilon")?,
        truncate: h.parse("truncate")?,
    };
    hyperparams
        .validate()
        .or_else(|e| format_err(e.to_string()))?;
    let vocab_size: usize = h.parse("vocab_size")?;
    let count: usize = h.parse("tensors")?;

    let mut params = EncoderParameters::zeros(vocab_size, &hyperparams);
    let expected: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.shape))
        .collect();
    if count != expected.len() {
        return format_err(format!("{count} tensors, expected {}", expected.len()));
    }
    let mut loaded: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (name, shape) in &expected {
        let len = read_u32(&mut r, "tensor name length")?;
        if len > MAX_NAME_LEN {
            return format_err(format!("tensor name length {len}"));
        }
        let mut buf = vec![0u8; len as usize];
        read_exact_or_format(&mut r, &mut buf, "tensor name")?;
        if buf != name.as_bytes() {
            return format_err(format!(
                "expected tensor `{name}`, found `{}`",
                String::from_utf8_lossy(&buf)
            ));
        }
        let rank = read_u32(&mut r, "tensor rank")?;
        if rank > MAX_RANK || rank as usize != shape.len() {
            return format_err(format!("tensor `{name}` has rank {rank}"));
        }
        for &d in shape {
            let got = read_u64(&mut r, "tensor shape")?;
            if got != d as u64 {
                return format_err(format!("tensor `{name}` dimension {got}, expected {d}"));
            }
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            read_exact_or_format(&mut r, &mut b, "tensor data")?;
            data.push(f64::from_le_bytes(b));
        }
        loaded.push(data);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return format_err("trailing bytes after last tensor");
    }
    let mut i = 0;
    params.for_each_tensor_mut(|_, data| {
        data.copy_from_slice(&loaded[i]);
        i += 1;
    });
    Ok(Model {
        hyperparams,
        vocab_hash: h.get("vocab_hash")?.to_string(),
        params,
    })
}

pub fn load_model(path: &Path) -> Result<Model, ArchiveError> {
    read_model(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> Model {
        let hyperparams = Hyperparams {
            num_layers: 1,
            d_model: 8,
            num_heads: 2,
            d_ff: 8,
            max_len: 6,
            learning_rate: 0.1 + 0.2,
            seed: u64::MAX,
            ..Hyperparams::default()
        };
        let vocab = Vocabulary::builtin();
        let params = EncoderParameters::init(vocab.len(), &hyperparams, &mut ChaCha8Rng::seed_from_u64(2), 0.1);
        Model {
            hyperparams,
            vocab_hash: vocab.hash(),
            params,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let back = read_model(&buf[..]).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_model(&mut again, &back).unwrap();
        assert_eq!(again, buf);
        back.check_vocab(&Vocabulary::builtin()).unwrap();
    }

    #[test]
    fn corrupt_archives_are_rejected() {
        let mut buf = Vec::new();
        write_model(&mut buf, &model()).unwrap();
        assert!(matches!(read_model(&buf[..buf.len() - 3]), Err(ArchiveError::Format(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_model(&extra[..]), Err(ArchiveError::Format(_))));
        assert!(matches!(read_model(&b"not a model\n"[..]), Err(ArchiveError::Format(_))));
        let header_end = buf.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        let mut bad_len = buf.clone();
        bad_len[header_end..header_end + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(read_model(&bad_len[..]), Err(ArchiveError::Format(_))));
    }

    #[test]
    fn vocabulary_mismatch() {
        let m = model();
        let other = Vocabulary::from_spellings(vec!["[PAD]".into(), "[UNK]".into(), "[CLS]".into(), "[SEP]".into()]).unwrap();
        assert!(matches!(m.check_vocab(&other), Err(ArchiveError::VocabMismatch { .. })));
    }
}
