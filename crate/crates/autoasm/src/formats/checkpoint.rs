//! Binary network checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "AASMCKPT" | version u32 | kind u8 (0 policy, 1 value)
//! d_emb u32 | hidden u32 | pairs u32 | cells u32 | vocab u32
//! n_tensors u32 | n × (rows u32, cols u32) | all values f64, declaration order
//! ```
//!
//! Values round-trip bit-exactly. Loading rejects a file whose declared
//! architecture cannot produce the declared tensor shapes
//! ([`CheckpointError::VersionMismatch`]) and a file that is truncated,
//! garbled, or carries non-finite values ([`CheckpointError::Corrupt`]).

use std::error::Error;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use autoasm_core::machine::SpaceConfig;
use autoasm_core::nn::{NetConfig, PolicyNet, Tensor, ValueNet, VOCAB};

pub const MAGIC: &[u8; 8] = b"AASMCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    Policy,
    Value,
}

impl CheckpointKind {
    fn byte(self) -> u8 {
        match self {
            CheckpointKind::Policy => 0,
            CheckpointKind::Value => 1,
        }
    }
}

impl fmt::Display for CheckpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckpointKind::Policy => "policy",
            CheckpointKind::Value => "value",
        })
    }
}

#[derive(Debug)]
pub enum CheckpointError {
    Io(io::Error),
    /// The bytes cannot be a checkpoint: bad magic, truncation, trailing
    /// data, or non-finite values.
    Corrupt(String),
    /// A well-formed checkpoint this build cannot load: unknown format
    /// version, wrong network kind, or an architecture whose shapes do not
    /// match the stored tensors.
    VersionMismatch(String),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(err) => write!(f, "checkpoint: {err}"),
            CheckpointError::Corrupt(m) => write!(f, "corrupt checkpoint: {m}"),
            CheckpointError::VersionMismatch(m) => write!(f, "incompatible checkpoint: {m}"),
        }
    }
}

impl Error for CheckpointError {}

impl From<io::Error> for CheckpointError {
    fn from(err: io::Error) -> CheckpointError {
        CheckpointError::Io(err)
    }
}

fn corrupt(message: impl Into<String>) -> CheckpointError {
    CheckpointError::Corrupt(message.into())
}

fn mismatch(message: impl Into<String>) -> CheckpointError {
    CheckpointError::VersionMismatch(message.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub kind: CheckpointKind,
    pub d_emb: usize,
    pub hidden: usize,
    pub pairs: usize,
    pub cells: usize,
    pub vocab: usize,
    pub tensors: usize,
    /// Total scalar parameter count.
    pub params: usize,
}

impl CheckpointHeader {
    /// Recovers the cell layout: 1–4 cells are registers only, 5–8 add the
    /// four stack slots.
    pub fn space(&self) -> SpaceConfig {
        if self.cells > 4 {
            SpaceConfig::new(self.cells - 4, true)
        } else {
            SpaceConfig::new(self.cells, false)
        }
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            d_emb: self.d_emb,
            hidden: self.hidden,
            pairs: self.pairs,
            space: self.space(),
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} checkpoint: d_emb={} hidden={} pairs={} cells={} vocab={} ({} tensors, {} parameters)",
            self.kind, self.d_emb, self.hidden, self.pairs, self.cells, self.vocab,
            self.tensors, self.params,
        )
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(corrupt(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn expected_shapes(kind: CheckpointKind, config: &NetConfig) -> Vec<(usize, usize)> {
    match kind {
        CheckpointKind::Policy => PolicyNet::param_shapes(config),
        CheckpointKind::Value => ValueNet::param_shapes(config),
    }
}

fn encode(kind: CheckpointKind, config: &NetConfig, params: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind.byte());
    for field in [config.d_emb, config.hidden, config.pairs, config.cells(), VOCAB] {
        out.extend_from_slice(&(field as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for t in params {
        out.extend_from_slice(&(t.rows as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols as u32).to_le_bytes());
    }
    for t in params {
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_header_from(r: &mut Reader<'_>) -> Result<CheckpointHeader, CheckpointError> {
    if r.take(MAGIC.len())? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(mismatch(format!(
            "format version {version}, this build reads {VERSION}"
        )));
    }
    let kind = match r.u8()? {
        0 => CheckpointKind::Policy,
        1 => CheckpointKind::Value,
        b => return Err(corrupt(format!("unknown network kind byte {b}"))),
    };
    let d_emb = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let pairs = r.u32()? as usize;
    let cells = r.u32()? as usize;
    let vocab = r.u32()? as usize;
    if vocab != VOCAB {
        return Err(mismatch(format!("vocabulary size {vocab}, this build uses {VOCAB}")));
    }
    if d_emb == 0 || hidden == 0 || pairs == 0 || !(1..=8).contains(&cells) {
        return Err(mismatch(format!(
            "architecture out of range: d_emb={d_emb} hidden={hidden} pairs={pairs} cells={cells}"
        )));
    }
    let tensors = r.u32()? as usize;
    Ok(CheckpointHeader { kind, d_emb, hidden, pairs, cells, vocab, tensors, params: 0 })
}

fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<Tensor>), CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let mut header = decode_header_from(&mut r)?;
    let mut shapes = Vec::with_capacity(header.tensors);
    for _ in 0..header.tensors {
        shapes.push((r.u32()? as usize, r.u32()? as usize));
    }
    let config = header.net_config();
    if shapes != expected_shapes(header.kind, &config) {
        return Err(mismatch(format!(
            "stored tensor shapes do not match a {} network with d_emb={} hidden={} pairs={} cells={}",
            header.kind, header.d_emb, header.hidden, header.pairs, header.cells
        )));
    }
    let mut tensors = Vec::with_capacity(shapes.len());
    for (rows, cols) in shapes {
        let mut t = Tensor::zeros(rows, cols);
        for v in t.data.iter_mut() {
            *v = r.f64()?;
            if !v.is_finite() {
                return Err(corrupt("non-finite parameter value"));
            }
        }
        header.params += rows * cols;
        tensors.push(t);
    }
    if r.remaining() != 0 {
        return Err(corrupt(format!("{} trailing bytes", r.remaining())));
    }
    Ok((header, tensors))
}

pub fn encode_policy(net: &PolicyNet) -> Vec<u8> {
    encode(CheckpointKind::Policy, net.config(), net.params())
}

pub fn encode_value(net: &ValueNet) -> Vec<u8> {
    encode(CheckpointKind::Value, net.config(), net.params())
}

pub fn decode_policy(bytes: &[u8]) -> Result<PolicyNet, CheckpointError> {
    let (header, tensors) = decode(bytes)?;
    if header.kind != CheckpointKind::Policy {
        return Err(mismatch(format!("expected a policy checkpoint, found {}", header.kind)));
    }
    PolicyNet::from_params(header.net_config(), tensors)
        .map_err(|e| corrupt(format!("shape error after validation: {e}")))
}

pub fn decode_value(bytes: &[u8]) -> Result<ValueNet, CheckpointError> {
    let (header, tensors) = decode(bytes)?;
    if header.kind != CheckpointKind::Value {
        return Err(mismatch(format!("expected a value checkpoint, found {}", header.kind)));
    }
    ValueNet::from_params(header.net_config(), tensors)
        .map_err(|e| corrupt(format!("shape error after validation: {e}")))
}

pub fn save_policy(net: &PolicyNet, path: &Path) -> io::Result<()> {
    fs::write(path, encode_policy(net))
}

pub fn save_value(net: &ValueNet, path: &Path) -> io::Result<()> {
    fs::write(path, encode_value(net))
}

pub fn load_policy(path: &Path) -> Result<PolicyNet, CheckpointError> {
    decode_policy(&fs::read(path)?)
}

pub fn load_value(path: &Path) -> Result<ValueNet, CheckpointError> {
    decode_value(&fs::read(path)?)
}

/// Reads the header and totals without decoding the parameter payload.
pub fn peek_header(bytes: &[u8]) -> Result<CheckpointHeader, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let mut header = decode_header_from(&mut r)?;
    for _ in 0..header.tensors {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        header.params += rows * cols;
    }
    Ok(header)
}
