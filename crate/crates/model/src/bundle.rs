use cxr_tensor::{Graph, Var};
use cxr_text::{Vocab, EOS, SEP};

use crate::config::BundleConfig;
use crate::error::{ModelError, Result};
use crate::forward::{encode_image, lm_hidden, project};
use crate::params::{
    init_block, Affine, LmParams, Norm, Param, ParamInit, ProjectorParams, VisionParams,
};

/// Per-component freeze switches; `true` means the component's parameters
/// take no gradients and must stay bit-identical across optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezeFlags {
    pub vision: bool,
    pub projector: bool,
    pub lm: bool,
}

impl FreezeFlags {
    pub fn none() -> Self {
        Self { vision: false, projector: false, lm: false }
    }

    pub fn all() -> Self {
        Self { vision: true, projector: true, lm: true }
    }

    /// Stage-1 contract: only the projector trains.
    pub fn projector_only() -> Self {
        Self { vision: true, projector: false, lm: true }
    }
}

/// Vision encoder E, projector P, and language model L with their master
/// parameter copies, tokenizer, and freeze state.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: BundleConfig,
    pub vision: VisionParams<Param>,
    pub projector: ProjectorParams<Param>,
    pub lm: LmParams<Param>,
    pub vocab: Vocab,
    pub freeze: FreezeFlags,
}

/// Graph bindings of every parameter, parallel to the bundle's trees.
pub struct BoundBundle {
    pub vision: VisionParams<Var>,
    pub projector: ProjectorParams<Var>,
    pub lm: LmParams<Var>,
}

impl ModelBundle {
    /// Fresh bundle with seeded normal(0, 0.02) weights.
    pub fn init(config: BundleConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        config.vision.validate()?;
        if config.lm.vocab_size != vocab.len() {
            return Err(ModelError::InvalidArgument(format!(
                "lm.vocab_size {} != vocabulary size {}",
                config.lm.vocab_size,
                vocab.len()
            )));
        }
        if config.projector.d_in != config.vision.d_model
            || config.projector.d_out != config.lm.d_model
        {
            return Err(ModelError::InvalidArgument(
                "projector widths must match encoder and LM widths".into(),
            ));
        }
        let mut init = ParamInit::new(seed);
        let v = &config.vision;
        let vision = VisionParams {
            patch: Affine {
                w: init.normal("vision.patch.w", &[v.patch_dim(), v.d_model]),
                b: init.filled("vision.patch.b", &[v.d_model], 0.0),
            },
            pos: init.normal("vision.pos", &[v.n_patches(), v.d_model]),
            blocks: (0..v.n_layers)
                .map(|i| init_block(&mut init, &format!("vision.blocks.{i}"), v.d_model, v.n_heads))
                .collect(),
            ln_out: Norm {
                gain: init.filled("vision.ln_out.gain", &[v.d_model], 1.0),
                bias: init.filled("vision.ln_out.bias", &[v.d_model], 0.0),
            },
        };
        let p = &config.projector;
        let projector = ProjectorParams {
            fc1: Affine {
                w: init.normal("projector.fc1.w", &[p.d_in, p.d_hidden]),
                b: init.filled("projector.fc1.b", &[p.d_hidden], 0.0),
            },
            fc2: Affine {
                w: init.normal("projector.fc2.w", &[p.d_hidden, p.d_out]),
                b: init.filled("projector.fc2.b", &[p.d_out], 0.0),
            },
        };
        let l = &config.lm;
        let lm = LmParams {
            embed: init.normal("lm.embed", &[l.vocab_size, l.d_model]),
            pos: init.normal("lm.pos", &[l.max_context, l.d_model]),
            blocks: (0..l.n_layers)
                .map(|i| init_block(&mut init, &format!("lm.blocks.{i}"), l.d_model, l.n_heads))
                .collect(),
            ln_out: Norm {
                gain: init.filled("lm.ln_out.gain", &[l.d_model], 1.0),
                bias: init.filled("lm.ln_out.bias", &[l.d_model], 0.0),
            },
        };
        Ok(Self { config, vision, projector, lm, vocab, freeze: FreezeFlags::none() })
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |p| n += p.numel());
        n
    }

    /// Canonical traversal order: vision, projector, lm.
    pub fn for_each_param<'a>(&'a self, f: &mut impl FnMut(&'a Param)) {
        self.vision.for_each(f);
        self.projector.for_each(f);
        self.lm.for_each(f);
    }

    pub fn for_each_param_mut(&mut self, f: &mut impl FnMut(&mut Param)) {
        self.vision.for_each_mut(f);
        self.projector.for_each_mut(f);
        self.lm.for_each_mut(f);
    }

    fn bind_param(g: &mut Graph, p: &Param, requires_grad: bool) -> Var {
        g.leaf(p.data.clone(), p.shape.clone(), requires_grad)
            .expect("bundle parameters are internally consistent")
    }

    /// Insert every parameter as a graph leaf; `requires_grad` follows the
    /// freeze flags (frozen components take no gradients).
    pub fn bind(&self, g: &mut Graph) -> BoundBundle {
        let f = self.freeze;
        BoundBundle {
            vision: self.vision.map(&mut |p| Self::bind_param(g, p, !f.vision)),
            projector: self.projector.map(&mut |p| Self::bind_param(g, p, !f.projector)),
            lm: self.lm.map(&mut |p| Self::bind_param(g, p, !f.lm)),
        }
    }

    /// Bind with no gradients anywhere, for evaluation and decoding.
    pub fn bind_inference(&self, g: &mut Graph) -> BoundBundle {
        BoundBundle {
            vision: self.vision.map(&mut |p| Self::bind_param(g, p, false)),
            projector: self.projector.map(&mut |p| Self::bind_param(g, p, false)),
            lm: self.lm.map(&mut |p| Self::bind_param(g, p, false)),
        }
    }

    fn bind_lm_inference(&self, g: &mut Graph) -> LmParams<Var> {
        self.lm.map(&mut |p| Self::bind_param(g, p, false))
    }

    /// Projected image tokens followed by the instruction, in the fixed
    /// prefix layout `[image tokens][SEP][instruction][SEP]`. An empty
    /// instruction yields `[image tokens][SEP]`.
    pub fn build_prefix(
        &self,
        g: &mut Graph,
        bound: &BoundBundle,
        pixels: &[f64],
        instruction: &str,
    ) -> Result<Var> {
        let visual = encode_image(g, &bound.vision, &self.config.vision, pixels)?;
        let projected = project(g, &bound.projector, visual)?;
        let sep = g.embedding_lookup(bound.lm.embed, &[SEP as usize])?;
        let mut parts = vec![projected, sep];
        let instr_ids = self.vocab.encode(instruction);
        if !instr_ids.is_empty() {
            let ids: Vec<usize> = instr_ids.iter().map(|&id| id as usize).collect();
            parts.push(g.embedding_lookup(bound.lm.embed, &ids)?);
            parts.push(g.embedding_lookup(bound.lm.embed, &[SEP as usize])?);
        }
        g.concat_rows(&parts).map_err(Into::into)
    }

    /// Greedy decode; stops at EOS or after `max_new_tokens` steps.
    pub fn generate_ids(
        &self,
        pixels: &[f64],
        instruction: &str,
        max_new_tokens: usize,
    ) -> Result<Vec<u32>> {
        if max_new_tokens == 0 {
            return Err(ModelError::InvalidArgument("max_new_tokens must be at least 1".into()));
        }
        // The conditioning prefix is fixed, so run E and P once and reuse
        // the projected rows as constants for each decode step.
        let mut g0 = Graph::new();
        let bound = self.bind_inference(&mut g0);
        let prefix = self.build_prefix(&mut g0, &bound, pixels, instruction)?;
        let prefix_rows = g0.shape(prefix)[0];
        let prefix_data = g0.data(prefix).to_vec();
        drop(g0);

        let cfg = &self.config.lm;
        if prefix_rows + 1 > cfg.max_context {
            return Err(ModelError::ContextOverflow {
                length: prefix_rows + 1,
                max: cfg.max_context,
            });
        }

        let mut generated: Vec<u32> = Vec::new();
        for _ in 0..max_new_tokens {
            if prefix_rows + generated.len() + 1 > cfg.max_context {
                break;
            }
            let mut g = Graph::new();
            let lm = self.bind_lm_inference(&mut g);
            let prefix_var =
                g.constant(prefix_data.clone(), vec![prefix_rows, cfg.d_model])?;
            let hidden = lm_hidden(&mut g, &lm, cfg, prefix_var, &generated)?;
            let total = prefix_rows + generated.len();
            let last = g.slice_rows(hidden, total - 1, 1)?;
            let head = g.transpose(lm.embed)?;
            let logits = g.matmul(last, head)?;
            let row = g.data(logits);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            if best as u32 == EOS {
                break;
            }
            generated.push(best as u32);
        }
        Ok(generated)
    }

    /// Greedy decode to text.
    pub fn generate(
        &self,
        pixels: &[f64],
        instruction: &str,
        max_new_tokens: usize,
    ) -> Result<String> {
        Ok(self.vocab.decode(&self.generate_ids(pixels, instruction, max_new_tokens)?))
    }
}
