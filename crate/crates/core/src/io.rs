//! Little-endian binary formats.
//!
//! | magic  | payload after the version byte                                        |
//! |--------|-----------------------------------------------------------------------|
//! | `EMB1` | u32 count, u32 dim, count·dim f32 (row-major)                          |
//! | `SCRN` | u32 K, u32 N, u32 D, f64 λ, K·D f32 centroids, K × ⌈N/8⌉ subset bytes |
//! | `DENC` | u32 F, u32 D, F·D f32 context map, F·D f32 response map                |
//! | `LBL1` | u32 count, count u32 labels                                           |
//! | `PAR1` | u32 count, u32 F, per pair: F f32, F f32, u8 label, f64 teacher score |
//!
//! Every file starts with the 4-byte magic and the version byte `0x01`.

use std::fs;
use std::path::Path;

use crate::distill::{DualEncoder, LabeledPair, Side};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::screening::{BitSet, ScreeningModel};

pub const VERSION: u8 = 0x01;
pub const EMB_MAGIC: [u8; 4] = *b"EMB1";
pub const MODEL_MAGIC: [u8; 4] = *b"SCRN";
pub const ENCODER_MAGIC: [u8; 4] = *b"DENC";
pub const LABELS_MAGIC: [u8; 4] = *b"LBL1";
pub const PAIRS_MAGIC: [u8; 4] = *b"PAR1";

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: [u8; 4]) -> Self {
        let mut buf = magic.to_vec();
        buf.push(VERSION);
        Self(buf)
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f32s(&mut self, xs: &[f32]) {
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], magic: [u8; 4]) -> Result<Self> {
        if buf.len() < 5 {
            return Err(Error::Truncated { expected: 5, found: buf.len() as u64 });
        }
        let found: [u8; 4] = buf[..4].try_into().expect("4 bytes");
        if found != magic {
            return Err(Error::BadMagic { expected: magic, found });
        }
        if buf[4] != VERSION {
            return Err(Error::UnsupportedVersion { expected: VERSION, found: buf[4] });
        }
        Ok(Self { buf, pos: 5 })
    }

    /// Fails with the full expected file size when fewer than `payload`
    /// bytes remain.
    fn require(&self, payload: u64) -> Result<()> {
        let expected = self.pos as u64 + payload;
        if (self.buf.len() as u64) < expected {
            return Err(Error::Truncated { expected, found: self.buf.len() as u64 });
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.require(n as u64)?;
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n * 4)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after the payload (expected {} bytes total)",
                self.buf.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Result<Vec<u8>> {
    let mut w = Writer::new(EMB_MAGIC);
    w.u32(m.len())?;
    w.u32(m.dim())?;
    w.f32s(m.as_slice());
    Ok(w.0)
}

/// Decodes an EMB1 buffer. `count = 0` is accepted here; search entry points
/// reject empty matrices.
pub fn decode_embeddings(buf: &[u8]) -> Result<EmbeddingMatrix> {
    let mut r = Reader::open(buf, EMB_MAGIC)?;
    let count = r.u32()?;
    let dim = r.u32()?;
    if dim == 0 {
        return Err(Error::Malformed("dimension is 0".into()));
    }
    r.require(count as u64 * dim as u64 * 4)?;
    let data = r.f32s(count * dim)?;
    r.finish()?;
    EmbeddingMatrix::from_flat(data, dim)
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_embeddings(m)?)?)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    decode_embeddings(&fs::read(path)?)
}

pub fn encode_model(model: &ScreeningModel) -> Result<Vec<u8>> {
    let mut w = Writer::new(MODEL_MAGIC);
    w.u32(model.k())?;
    w.u32(model.n())?;
    w.u32(model.dim())?;
    w.0.extend_from_slice(&model.lambda().to_le_bytes());
    w.f32s(model.centroids().as_slice());
    for s in model.subsets() {
        w.0.extend_from_slice(&s.to_bytes());
    }
    Ok(w.0)
}

pub fn decode_model(buf: &[u8]) -> Result<ScreeningModel> {
    let mut r = Reader::open(buf, MODEL_MAGIC)?;
    let k = r.u32()?;
    let n = r.u32()?;
    let dim = r.u32()?;
    let lambda = r.f64()?;
    if k == 0 || n == 0 || dim == 0 {
        return Err(Error::Malformed(format!("K = {k}, N = {n}, D = {dim} must all be ≥ 1")));
    }
    let row_bytes = n.div_ceil(8);
    r.require(k as u64 * dim as u64 * 4 + k as u64 * row_bytes as u64)?;
    let centroids = EmbeddingMatrix::from_flat(r.f32s(k * dim)?, dim)?;
    let mut subsets = Vec::with_capacity(k);
    for i in 0..k {
        let bytes = r.take(row_bytes)?;
        subsets.push(
            BitSet::from_bytes(bytes, n)
                .ok_or_else(|| Error::Malformed(format!("subset {i} has bits set past N = {n}")))?,
        );
    }
    r.finish()?;
    ScreeningModel::new(centroids, subsets, lambda)
}

pub fn write_model(model: &ScreeningModel, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_model(model)?)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ScreeningModel> {
    decode_model(&fs::read(path)?)
}

pub fn encode_encoder(enc: &DualEncoder) -> Result<Vec<u8>> {
    let mut w = Writer::new(ENCODER_MAGIC);
    w.u32(enc.features())?;
    w.u32(enc.dim())?;
    w.f32s(enc.weights(Side::Context));
    w.f32s(enc.weights(Side::Response));
    Ok(w.0)
}

pub fn decode_encoder(buf: &[u8]) -> Result<DualEncoder> {
    let mut r = Reader::open(buf, ENCODER_MAGIC)?;
    let f = r.u32()?;
    let d = r.u32()?;
    r.require(2 * f as u64 * d as u64 * 4)?;
    let w_ctx = r.f32s(f * d)?;
    let w_resp = r.f32s(f * d)?;
    r.finish()?;
    DualEncoder::new(f, d, w_ctx, w_resp)
}

pub fn write_encoder(enc: &DualEncoder, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_encoder(enc)?)?)
}

pub fn read_encoder(path: impl AsRef<Path>) -> Result<DualEncoder> {
    decode_encoder(&fs::read(path)?)
}

pub fn encode_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut w = Writer::new(LABELS_MAGIC);
    w.u32(labels.len())?;
    for &l in labels {
        w.u32(l)?;
    }
    Ok(w.0)
}

pub fn decode_labels(buf: &[u8]) -> Result<Vec<usize>> {
    let mut r = Reader::open(buf, LABELS_MAGIC)?;
    let count = r.u32()?;
    r.require(count as u64 * 4)?;
    let labels = (0..count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(labels)
}

pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_labels(labels)?)?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    decode_labels(&fs::read(path)?)
}

/// Pairs together with their cached teacher scores.
pub fn encode_pairs(pairs: &[LabeledPair], teacher: &[f64]) -> Result<Vec<u8>> {
    if pairs.len() != teacher.len() {
        return Err(Error::ShapeMismatch(format!("{} teacher scores for {} pairs", teacher.len(), pairs.len())));
    }
    let f = pairs.first().map_or(0, |p| p.context.len());
    let mut w = Writer::new(PAIRS_MAGIC);
    w.u32(pairs.len())?;
    w.u32(f)?;
    for (p, t) in pairs.iter().zip(teacher) {
        if p.context.len() != f || p.response.len() != f {
            return Err(Error::DimensionMismatch { expected: f, found: p.context.len().max(p.response.len()) });
        }
        w.f32s(&p.context);
        w.f32s(&p.response);
        w.0.push(u8::from(p.label));
        w.0.extend_from_slice(&t.to_le_bytes());
    }
    Ok(w.0)
}

pub fn decode_pairs(buf: &[u8]) -> Result<(Vec<LabeledPair>, Vec<f64>)> {
    let mut r = Reader::open(buf, PAIRS_MAGIC)?;
    let count = r.u32()?;
    let f = r.u32()?;
    r.require(count as u64 * (8 * f as u64 + 9))?;
    let mut pairs = Vec::with_capacity(count);
    let mut teacher = Vec::with_capacity(count);
    for i in 0..count {
        let context = r.f32s(f)?;
        let response = r.f32s(f)?;
        let label = match r.take(1)?[0] {
            0 => false,
            1 => true,
            other => return Err(Error::Malformed(format!("pair {i} has label byte {other}"))),
        };
        pairs.push(LabeledPair { context, response, label });
        teacher.push(r.f64()?);
    }
    r.finish()?;
    Ok((pairs, teacher))
}

pub fn write_pairs(pairs: &[LabeledPair], teacher: &[f64], path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_pairs(pairs, teacher)?)?)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<(Vec<LabeledPair>, Vec<f64>)> {
    decode_pairs(&fs::read(path)?)
}
