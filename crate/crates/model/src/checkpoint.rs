//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  b"CXRCKPT1"
//! hdr_len   u32
//! header    hdr_len bytes of UTF-8 "key = value" lines: every bundle
//!           hyperparameter, the freeze flags, and the vocabulary tokens
//!           (space-joined, specials first)
//! n_blocks  u32
//! block*    u32 name_len | name bytes | u32 ndim | ndim x u32 dims
//!           | product(dims) x f64 values
//! ```
//!
//! Round trips are bit-exact: floats are stored as raw IEEE-754 bits.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cxr_text::Vocab;

use crate::bundle::{FreezeFlags, ModelBundle};
use crate::config::{BundleConfig, LmConfig, ProjectorConfig, VisionConfig};
use crate::error::{ModelError, Result};

const MAGIC: &[u8; 8] = b"CXRCKPT1";

fn header_text(bundle: &ModelBundle) -> String {
    let c = &bundle.config;
    let vocab_tokens: Vec<&str> =
        (0..bundle.vocab.len() as u32).map(|i| bundle.vocab.token_of(i).unwrap()).collect();
    let mut lines = vec![
        "format_version = 1".to_string(),
        format!("vision.image_side = {}", c.vision.image_side),
        format!("vision.patch_size = {}", c.vision.patch_size),
        format!("vision.d_model = {}", c.vision.d_model),
        format!("vision.n_layers = {}", c.vision.n_layers),
        format!("vision.n_heads = {}", c.vision.n_heads),
        format!("projector.d_in = {}", c.projector.d_in),
        format!("projector.d_hidden = {}", c.projector.d_hidden),
        format!("projector.d_out = {}", c.projector.d_out),
        format!("lm.vocab_size = {}", c.lm.vocab_size),
        format!("lm.d_model = {}", c.lm.d_model),
        format!("lm.n_layers = {}", c.lm.n_layers),
        format!("lm.n_heads = {}", c.lm.n_heads),
        format!("lm.max_context = {}", c.lm.max_context),
        format!("freeze.vision = {}", bundle.freeze.vision),
        format!("freeze.projector = {}", bundle.freeze.projector),
        format!("freeze.lm = {}", bundle.freeze.lm),
        format!("vocab = {}", vocab_tokens.join(" ")),
    ];
    lines.push(String::new());
    lines.join("\n")
}

pub fn save(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let header = header_text(bundle);
    let mut blocks = 0u32;
    bundle.for_each_param(&mut |_| blocks += 1);

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&blocks.to_le_bytes());
    bundle.for_each_param(&mut |p| {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &p.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    });
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(ModelError::BadCheckpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }
}

fn parse_header(text: &str) -> Result<(BundleConfig, FreezeFlags, Vocab)> {
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| ModelError::BadCheckpoint(format!("bad header line: {line:?}")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<&String> {
        kv.get(k).ok_or_else(|| ModelError::BadCheckpoint(format!("missing header key {k}")))
    };
    let num = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| ModelError::BadCheckpoint(format!("non-numeric header key {k}")))
    };
    let flag = |k: &str| -> Result<bool> {
        get(k)?
            .parse()
            .map_err(|_| ModelError::BadCheckpoint(format!("non-boolean header key {k}")))
    };

    let version = num("format_version")?;
    if version != 1 {
        return Err(ModelError::BadCheckpoint(format!("unsupported format_version {version}")));
    }
    let config = BundleConfig {
        vision: VisionConfig {
            image_side: num("vision.image_side")?,
            patch_size: num("vision.patch_size")?,
            d_model: num("vision.d_model")?,
            n_layers: num("vision.n_layers")?,
            n_heads: num("vision.n_heads")?,
        },
        projector: ProjectorConfig {
            d_in: num("projector.d_in")?,
            d_hidden: num("projector.d_hidden")?,
            d_out: num("projector.d_out")?,
        },
        lm: LmConfig {
            vocab_size: num("lm.vocab_size")?,
            d_model: num("lm.d_model")?,
            n_layers: num("lm.n_layers")?,
            n_heads: num("lm.n_heads")?,
            max_context: num("lm.max_context")?,
        },
    };
    let freeze = FreezeFlags {
        vision: flag("freeze.vision")?,
        projector: flag("freeze.projector")?,
        lm: flag("freeze.lm")?,
    };
    let vocab_line = get("vocab")?;
    let vocab_text: String =
        vocab_line.split(' ').map(|t| format!("{t}\n")).collect::<Vec<_>>().join("");
    let vocab = Vocab::from_text(&vocab_text)
        .map_err(|e| ModelError::BadCheckpoint(format!("bad vocab in header: {e}")))?;
    Ok((config, freeze, vocab))
}

pub fn load(path: &Path) -> Result<ModelBundle> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(ModelError::BadCheckpoint("bad magic".into()));
    }
    let hdr_len = r.u32()? as usize;
    let header = std::str::from_utf8(r.take(hdr_len)?)
        .map_err(|_| ModelError::BadCheckpoint("header is not UTF-8".into()))?;
    let (config, freeze, vocab) = parse_header(header)?;

    let n_blocks = r.u32()?;
    let mut blocks: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for _ in 0..n_blocks {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| ModelError::BadCheckpoint("block name is not UTF-8".into()))?
            .to_string();
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(r.f64()?);
        }
        blocks.insert(name, (shape, data));
    }
    if r.pos != buf.len() {
        return Err(ModelError::BadCheckpoint("trailing bytes after last block".into()));
    }

    let mut bundle = ModelBundle::init(config, vocab, 0)?;
    bundle.freeze = freeze;
    let mut missing = Vec::new();
    bundle.for_each_param_mut(&mut |p| match blocks.remove(&p.name) {
        Some((shape, data)) if shape == p.shape => p.data = data,
        Some((shape, _)) => missing.push(format!("{} has shape {shape:?}, want {:?}", p.name, p.shape)),
        None => missing.push(format!("{} absent", p.name)),
    });
    if !missing.is_empty() {
        return Err(ModelError::BadCheckpoint(format!("bad blocks: {}", missing.join("; "))));
    }
    if !blocks.is_empty() {
        let extra: Vec<String> = blocks.keys().cloned().collect();
        return Err(ModelError::BadCheckpoint(format!("unknown blocks: {}", extra.join(", "))));
    }
    Ok(bundle)
}
