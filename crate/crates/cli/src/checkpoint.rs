//! Checkpoint files: the trained parameters plus everything needed to
//! rebuild the exact model around them.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic              8 bytes  "PQLCKPT1"
//! version            u32      currently 1
//! grammar fingerprint u64     must match the loading grammar
//! dims               6 × u32  word, action, node, kind, enc_hidden, dec_hidden
//! vocab              u32 count, then per token: u32 byte length + UTF-8
//! tensors            u32 count, then per tensor:
//!                      u16 name length + UTF-8 name
//!                      u8 rank (1 or 2), rank × u32 dims
//!                      f64 × product, IEEE-754 bit patterns
//! ```
//!
//! Loading rebuilds the model from the stored vocabulary and dimensions,
//! then fills every tensor by name, requiring an exact one-to-one match
//! between file records and model tensors. Save → load → save reproduces the
//! file byte for byte: the vocabulary keeps its id order, and parameter
//! values travel as raw bits.

use std::path::Path;

use parsql_core::grammar::Grammar;
use parsql_core::nn::{Dims, Model, ParameterStore, Tensor, Vocab};

use crate::CliError;

const MAGIC: &[u8; 8] = b"PQLCKPT1";
const VERSION: u32 = 1;

pub fn save(path: &Path, model: &Model, store: &ParameterStore) -> Result<(), CliError> {
    std::fs::write(path, encode(model, store)).map_err(|e| {
        CliError::Runtime(format!("cannot write checkpoint `{}`: {e}", path.display()))
    })
}

pub fn encode(model: &Model, store: &ParameterStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.grammar_fingerprint.to_le_bytes());
    let d = &model.dims;
    for dim in [d.word, d.action, d.node, d.kind, d.enc_hidden, d.dec_hidden] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let tokens = model.vocab.tokens();
    out.extend_from_slice(&(tokens.len() as u32).to_le_bytes());
    for tok in tokens {
        out.extend_from_slice(&(tok.len() as u32).to_le_bytes());
        out.extend_from_slice(tok.as_bytes());
    }
    let count = store.iter().count();
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for (_, name, tensor) in store.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.dims.len() as u8);
        for &dim in &tensor.dims {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &v in &tensor.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// A little-endian reader over the checkpoint bytes.
struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.at + n > self.bytes.len() {
            return Err(CliError::runtime("checkpoint is truncated"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, len: usize) -> Result<String, CliError> {
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| CliError::runtime("checkpoint holds a non-UTF-8 name"))
    }
}

pub fn load(path: &Path, g: &Grammar) -> Result<(Model, ParameterStore), CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Runtime(format!("cannot read checkpoint `{}`: {e}", path.display()))
    })?;
    decode(&bytes, g)
}

pub fn decode(bytes: &[u8], g: &Grammar) -> Result<(Model, ParameterStore), CliError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(CliError::runtime("not a checkpoint file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::Runtime(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let fingerprint = r.u64()?;
    if fingerprint != g.fingerprint() {
        return Err(CliError::Runtime(format!(
            "checkpoint grammar fingerprint {fingerprint:#018x} does not match the loaded \
             grammar {:#018x}",
            g.fingerprint()
        )));
    }

    let mut dims6 = [0usize; 6];
    for d in dims6.iter_mut() {
        *d = r.u32()? as usize;
    }
    let dims = Dims {
        word: dims6[0],
        action: dims6[1],
        node: dims6[2],
        kind: dims6[3],
        enc_hidden: dims6[4],
        dec_hidden: dims6[5],
    };

    let token_count = r.u32()? as usize;
    let mut tokens = Vec::with_capacity(token_count);
    for _ in 0..token_count {
        let len = r.u32()? as usize;
        tokens.push(r.string(len)?);
    }
    let vocab = Vocab::build(tokens);
    if vocab.len() != token_count {
        return Err(CliError::runtime("checkpoint vocabulary holds duplicate tokens"));
    }

    // The init seed is irrelevant: every tensor is overwritten below.
    let (model, mut store) = Model::new(g, vocab, dims, 0);

    let record_count = r.u32()? as usize;
    let expected = store.iter().count();
    if record_count != expected {
        return Err(CliError::Runtime(format!(
            "checkpoint holds {record_count} tensors, the model needs {expected}"
        )));
    }
    let mut filled: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for _ in 0..record_count {
        let name_len = r.u16()? as usize;
        let name = r.string(name_len)?;
        let rank = r.u8()? as usize;
        if !matches!(rank, 1 | 2) {
            return Err(CliError::Runtime(format!("tensor `{name}` has unsupported rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.f64()?);
        }

        let id = store
            .iter()
            .find(|(_, n, _)| *n == name)
            .map(|(id, _, _)| id)
            .ok_or_else(|| CliError::Runtime(format!("checkpoint tensor `{name}` is unknown")))?;
        let tensor: &mut Tensor = store.tensor_mut(id);
        if tensor.dims != shape {
            return Err(CliError::Runtime(format!(
                "tensor `{name}` has shape {shape:?} in the checkpoint but {:?} in the model",
                tensor.dims
            )));
        }
        tensor.data = data;
        if !filled.insert(name.clone()) {
            return Err(CliError::Runtime(format!("checkpoint repeats tensor `{name}`")));
        }
    }
    if r.at != bytes.len() {
        return Err(CliError::runtime("checkpoint has trailing bytes"));
    }
    Ok((model, store))
}
