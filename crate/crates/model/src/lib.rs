//! The three architectural components for report automation at toy scale:
//! a patch-based vision encoder E, a two-layer MLP projector P, and a causal
//! decoder L with tied embeddings, plus greedy decoding and checkpoint I/O.

pub mod checkpoint;
mod bundle;
mod config;
mod error;
mod forward;
mod params;

pub use bundle::{BoundBundle, FreezeFlags, ModelBundle};
pub use config::{BundleConfig, LmConfig, ProjectorConfig, VisionConfig, LN_EPS};
pub use error::{ModelError, Result};
pub use forward::{encode_image, forward_lm, lm_hidden, patchify, project};
pub use params::{
    Affine, AttnHead, Block, LmParams, Norm, Param, ParamInit, ProjectorParams, VisionParams,
    INIT_STD,
};
