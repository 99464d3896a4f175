use crate::error::{ModelError, Result};

/// Layer-norm epsilon used across all components.
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct VisionConfig {
    pub image_side: usize,
    pub patch_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self { image_side: 32, patch_size: 4, d_model: 64, n_layers: 2, n_heads: 4 }
    }
}

impl VisionConfig {
    pub fn n_patches(&self) -> usize {
        let per_side = self.image_side / self.patch_size;
        per_side * per_side
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_side == 0 || self.patch_size == 0 || self.image_side % self.patch_size != 0 {
            return Err(ModelError::BadImageShape(format!(
                "image side {} not divisible by patch size {}",
                self.image_side, self.patch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorConfig {
    pub d_in: usize,
    pub d_hidden: usize,
    pub d_out: usize,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        Self { d_in: 64, d_hidden: 64, d_out: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_context: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { vocab_size: 512, d_model: 64, n_layers: 2, n_heads: 4, max_context: 256 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BundleConfig {
    pub vision: VisionConfig,
    pub projector: ProjectorConfig,
    pub lm: LmConfig,
}

impl BundleConfig {
    /// Default toy wiring for a given vocabulary size.
    pub fn toy(vocab_size: usize) -> Self {
        Self { lm: LmConfig { vocab_size, ..Default::default() }, ..Default::default() }
    }
}
