//! Portable binary model persistence.
//!
//! Fixed little-endian layout with a text magic, a format version, and a
//! trailing SHA-256 over everything before it. Floating-point payloads are
//! stored bit-exactly, so a loaded model predicts identically to the
//! in-memory model that produced it.

use std::fs;
use std::path::Path;

use hakernel::data::Scaler;
use hakernel::estimators::{FittedModel, Penalty};
use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::CliError;

const MAGIC: &[u8; 8] = b"HAKMODEL";
const VERSION: u32 = 1;
const FLAG_FEATURE_NAMES: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            self.f64(v);
        }
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.pos + n > self.buf.len() {
            return Err(CliError::Model("model file truncated".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn str(&mut self) -> Result<String, CliError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| CliError::Model("model file holds invalid UTF-8".into()))
    }
}

pub fn save_model(model: &FittedModel, path: &Path) -> Result<(), CliError> {
    let n = model.n_train();
    let d = model.scaler.d();
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u8(match model.kind {
        Penalty::Ridge => 0,
        Penalty::Lasso => 1,
    });
    w.u8(0);
    w.u8(0);
    w.u8(0);
    w.u32(model.m as u32);
    w.u32(model.k as u32);
    w.u32(n as u32);
    w.u32(d as u32);
    w.f64(model.lambda);
    w.f64(model.y_mean);
    let flags = if model.feature_names.is_some() {
        FLAG_FEATURE_NAMES
    } else {
        0
    };
    w.u32(flags);
    w.u32(0); // reserved
    w.f64_slice(model.scaler.mins().iter().copied());
    w.f64_slice(model.scaler.maxs().iter().copied());
    w.f64_slice(model.x_train.iter().copied());
    w.f64_slice(model.gram_column_means.iter().copied());
    w.f64_slice(model.u_k.iter().copied());
    w.f64_slice(model.d_k.iter().copied());
    w.f64_slice(model.beta.iter().copied());
    if let Some(names) = &model.feature_names {
        w.u32(names.len() as u32);
        for name in names {
            w.str(name);
        }
    }
    let digest = Sha256::digest(&w.buf);
    w.buf.extend_from_slice(&digest);
    fs::write(path, &w.buf).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FittedModel, CliError> {
    let buf = fs::read(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    if buf.len() < MAGIC.len() + 32 {
        return Err(CliError::Model("model file too short".into()));
    }
    let (payload, stored_digest) = buf.split_at(buf.len() - 32);
    let digest = Sha256::digest(payload);
    if digest.as_slice() != stored_digest {
        return Err(CliError::Model(
            "model file checksum mismatch (corrupted or edited)".into(),
        ));
    }
    let mut r = Reader {
        buf: payload,
        pos: 0,
    };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(CliError::Model("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::Model(format!(
            "unsupported model format version {version} (expected {VERSION})"
        )));
    }
    let kind = match r.u8()? {
        0 => Penalty::Ridge,
        1 => Penalty::Lasso,
        other => return Err(CliError::Model(format!("unknown estimator kind {other}"))),
    };
    r.take(3)?; // padding
    let m = r.u32()? as usize;
    let k = r.u32()? as usize;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let lambda = r.f64()?;
    let y_mean = r.f64()?;
    let flags = r.u32()?;
    let _reserved = r.u32()?;
    let mins = r.f64_vec(d)?;
    let maxs = r.f64_vec(d)?;
    let x_train = Array2::from_shape_vec((n, d), r.f64_vec(n * d)?)
        .map_err(|_| CliError::Model("bad covariate block".into()))?;
    let gram_column_means = Array1::from_vec(r.f64_vec(n)?);
    let u_k = Array2::from_shape_vec((n, k), r.f64_vec(n * k)?)
        .map_err(|_| CliError::Model("bad eigenvector block".into()))?;
    let d_k = Array1::from_vec(r.f64_vec(k)?);
    let beta = Array1::from_vec(r.f64_vec(k)?);
    let feature_names = if flags & FLAG_FEATURE_NAMES != 0 {
        let count = r.u32()? as usize;
        let mut names = Vec::with_capacity(count);
        for _ in 0..count {
            names.push(r.str()?);
        }
        Some(names)
    } else {
        None
    };
    if r.pos != payload.len() {
        return Err(CliError::Model("trailing bytes in model file".into()));
    }

    let scaler =
        Scaler::from_ranges(mins, maxs).map_err(|e| CliError::Model(e.to_string()))?;
    let model = FittedModel {
        kind,
        m,
        k,
        lambda,
        scaler,
        x_train,
        y_mean,
        gram_column_means,
        u_k,
        d_k,
        beta,
        feature_names,
    };
    model
        .validate()
        .map_err(|e| CliError::Model(format!("model fails self-validation: {e}")))?;
    Ok(model)
}
