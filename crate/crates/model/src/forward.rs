//! Graph-building forward passes for the three components.

use cxr_tensor::{Graph, Var};

use crate::config::{LmConfig, VisionConfig, LN_EPS};
use crate::error::{ModelError, Result};
use crate::params::{Block, LmParams, ProjectorParams, VisionParams};

/// Pre-norm transformer block; `causal` selects masked attention.
pub(crate) fn block_forward(
    g: &mut Graph,
    b: &Block<Var>,
    x: Var,
    head_dim: usize,
    causal: bool,
) -> Result<Var> {
    let h = g.layer_norm(x, b.ln1.gain, b.ln1.bias, LN_EPS)?;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut attn: Option<Var> = None;
    for head in &b.heads {
        let q = g.matmul(h, head.wq)?;
        let k = g.matmul(h, head.wk)?;
        let v = g.matmul(h, head.wv)?;
        let kt = g.transpose(k)?;
        let scores = g.matmul(q, kt)?;
        let scores = g.scale(scores, scale);
        let probs = if causal {
            g.causal_softmax_rows(scores)?
        } else {
            g.softmax_rows(scores)?
        };
        let ctx = g.matmul(probs, v)?;
        // Summing per-head projections is the concat-then-project identity.
        let out = g.matmul(ctx, head.wo)?;
        attn = Some(match attn {
            Some(acc) => g.add(acc, out)?,
            None => out,
        });
    }
    let x = g.add(x, attn.expect("blocks have at least one head"))?;
    let h = g.layer_norm(x, b.ln2.gain, b.ln2.bias, LN_EPS)?;
    let h = g.matmul(h, b.fc1.w)?;
    let h = g.add(h, b.fc1.b)?;
    let h = g.gelu(h);
    let h = g.matmul(h, b.fc2.w)?;
    let h = g.add(h, b.fc2.b)?;
    g.add(x, h).map_err(Into::into)
}

/// Rearrange a square image into a `[n_patches, patch_dim]` matrix,
/// row-major over patch grid positions.
pub fn patchify(pixels: &[f64], side: usize, patch: usize) -> Vec<f64> {
    let per_side = side / patch;
    let mut out = Vec::with_capacity(per_side * per_side * patch * patch);
    for pr in 0..per_side {
        for pc in 0..per_side {
            for i in 0..patch {
                for j in 0..patch {
                    out.push(pixels[(pr * patch + i) * side + pc * patch + j]);
                }
            }
        }
    }
    out
}

/// Vision encoder E: patch projection, positional embedding, bidirectional
/// transformer blocks, final norm. Output is `[n_patches, d_model]`.
pub fn encode_image(
    g: &mut Graph,
    p: &VisionParams<Var>,
    cfg: &VisionConfig,
    pixels: &[f64],
) -> Result<Var> {
    cfg.validate()?;
    let expected = cfg.image_side * cfg.image_side;
    if pixels.len() != expected {
        return Err(ModelError::BadImageShape(format!(
            "expected {} pixels for a {}x{} image, got {}",
            expected,
            cfg.image_side,
            cfg.image_side,
            pixels.len()
        )));
    }
    if pixels.iter().any(|&v| !(0.0..=1.0).contains(&v) || v.is_nan()) {
        return Err(ModelError::BadImageShape("pixel values must lie in [0, 1]".into()));
    }
    let patches = patchify(pixels, cfg.image_side, cfg.patch_size);
    let x = g.constant(patches, vec![cfg.n_patches(), cfg.patch_dim()])?;
    let x = g.matmul(x, p.patch.w)?;
    let x = g.add(x, p.patch.b)?;
    let mut x = g.add(x, p.pos)?;
    let head_dim = cfg.d_model / cfg.n_heads;
    for block in &p.blocks {
        x = block_forward(g, block, x, head_dim, false)?;
    }
    g.layer_norm(x, p.ln_out.gain, p.ln_out.bias, LN_EPS).map_err(Into::into)
}

/// Projector P: a per-token two-layer MLP into the LM embedding space.
/// No cross-token mixing.
pub fn project(g: &mut Graph, p: &ProjectorParams<Var>, visual: Var) -> Result<Var> {
    let h = g.matmul(visual, p.fc1.w)?;
    let h = g.add(h, p.fc1.b)?;
    let h = g.gelu(h);
    let h = g.matmul(h, p.fc2.w)?;
    g.add(h, p.fc2.b).map_err(Into::into)
}

/// Final hidden states of the causal LM over `prefix ++ embed(token_ids)`.
pub fn lm_hidden(
    g: &mut Graph,
    p: &LmParams<Var>,
    cfg: &LmConfig,
    prefix: Var,
    token_ids: &[u32],
) -> Result<Var> {
    let prefix_rows = g.shape(prefix)[0];
    let total = prefix_rows + token_ids.len();
    if total > cfg.max_context {
        return Err(ModelError::ContextOverflow { length: total, max: cfg.max_context });
    }
    let mut parts = vec![prefix];
    if !token_ids.is_empty() {
        let ids: Vec<usize> = token_ids.iter().map(|&id| id as usize).collect();
        parts.push(g.embedding_lookup(p.embed, &ids)?);
    }
    let x = g.concat_rows(&parts)?;
    let positions: Vec<usize> = (0..total).collect();
    let pos = g.embedding_lookup(p.pos, &positions)?;
    let mut x = g.add(x, pos)?;
    let head_dim = cfg.d_model / cfg.n_heads;
    for block in &p.blocks {
        x = block_forward(g, block, x, head_dim, true)?;
    }
    g.layer_norm(x, p.ln_out.gain, p.ln_out.bias, LN_EPS).map_err(Into::into)
}

/// Teacher-forced logits for `target_ids` given a conditioning prefix.
///
/// The model input is `prefix ++ embed(target_ids[..T-1])`; row `t` of the
/// result is the logit vector predicting `target_ids[t]`. The output head is
/// tied to the embedding table. Callers append EOS to the targets so the end
/// of sequence is part of the objective.
pub fn forward_lm(
    g: &mut Graph,
    p: &LmParams<Var>,
    cfg: &LmConfig,
    prefix: Var,
    target_ids: &[u32],
) -> Result<Var> {
    if target_ids.is_empty() {
        return Err(cxr_tensor::TensorError::EmptySequence.into());
    }
    let prefix_rows = g.shape(prefix)[0];
    let teacher_forced = &target_ids[..target_ids.len() - 1];
    let hidden = lm_hidden(g, p, cfg, prefix, teacher_forced)?;
    let predicting = g.slice_rows(hidden, prefix_rows - 1, target_ids.len())?;
    let head = g.transpose(p.embed)?;
    g.matmul(predicting, head).map_err(Into::into)
}
