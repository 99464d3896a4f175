//! Parameter storage shared by the three model components.
//!
//! Component structures are generic over the leaf type so the same shape
//! describes both the master copy (`T = Param`) and a graph binding
//! (`T = Var`). All traversals visit leaves in one fixed order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

/// Weight initialization scale.
pub const INIT_STD: f64 = 0.02;

/// Named master copy of one parameter tensor.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Seeded factory for freshly initialized parameters.
pub struct ParamInit {
    rng: ChaCha20Rng,
    normal: Normal<f64>,
}

impl ParamInit {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, INIT_STD).expect("valid distribution"),
        }
    }

    pub fn normal(&mut self, name: &str, shape: &[usize]) -> Param {
        let numel = shape.iter().product();
        let data = (0..numel).map(|_| self.normal.sample(&mut self.rng)).collect();
        Param { name: name.to_string(), shape: shape.to_vec(), data }
    }

    pub fn filled(&mut self, name: &str, shape: &[usize], value: f64) -> Param {
        let numel = shape.iter().product();
        Param { name: name.to_string(), shape: shape.to_vec(), data: vec![value; numel] }
    }
}

#[derive(Debug, Clone)]
pub struct Affine<T> {
    pub w: T,
    pub b: T,
}

#[derive(Debug, Clone)]
pub struct Norm<T> {
    pub gain: T,
    pub bias: T,
}

#[derive(Debug, Clone)]
pub struct AttnHead<T> {
    pub wq: T,
    pub wk: T,
    pub wv: T,
    pub wo: T,
}

#[derive(Debug, Clone)]
pub struct Block<T> {
    pub ln1: Norm<T>,
    pub heads: Vec<AttnHead<T>>,
    pub ln2: Norm<T>,
    pub fc1: Affine<T>,
    pub fc2: Affine<T>,
}

#[derive(Debug, Clone)]
pub struct VisionParams<T> {
    pub patch: Affine<T>,
    pub pos: T,
    pub blocks: Vec<Block<T>>,
    pub ln_out: Norm<T>,
}

#[derive(Debug, Clone)]
pub struct ProjectorParams<T> {
    pub fc1: Affine<T>,
    pub fc2: Affine<T>,
}

#[derive(Debug, Clone)]
pub struct LmParams<T> {
    pub embed: T,
    pub pos: T,
    pub blocks: Vec<Block<T>>,
    pub ln_out: Norm<T>,
}

impl<T> Affine<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Affine<U> {
        Affine { w: f(&self.w), b: f(&self.b) }
    }
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        f(&self.w);
        f(&self.b);
    }
    pub fn zip_mut<B>(&mut self, other: &Affine<B>, f: &mut impl FnMut(&mut T, &B)) {
        f(&mut self.w, &other.w);
        f(&mut self.b, &other.b);
    }
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

impl<T> Norm<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Norm<U> {
        Norm { gain: f(&self.gain), bias: f(&self.bias) }
    }
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        f(&self.gain);
        f(&self.bias);
    }
    pub fn zip_mut<B>(&mut self, other: &Norm<B>, f: &mut impl FnMut(&mut T, &B)) {
        f(&mut self.gain, &other.gain);
        f(&mut self.bias, &other.bias);
    }
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        f(&mut self.gain);
        f(&mut self.bias);
    }
}

impl<T> AttnHead<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> AttnHead<U> {
        AttnHead { wq: f(&self.wq), wk: f(&self.wk), wv: f(&self.wv), wo: f(&self.wo) }
    }
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        f(&self.wq);
        f(&self.wk);
        f(&self.wv);
        f(&self.wo);
    }
    pub fn zip_mut<B>(&mut self, other: &AttnHead<B>, f: &mut impl FnMut(&mut T, &B)) {
        f(&mut self.wq, &other.wq);
        f(&mut self.wk, &other.wk);
        f(&mut self.wv, &other.wv);
        f(&mut self.wo, &other.wo);
    }
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        f(&mut self.wq);
        f(&mut self.wk);
        f(&mut self.wv);
        f(&mut self.wo);
    }
}

impl<T> Block<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Block<U> {
        Block {
            ln1: self.ln1.map(f),
            heads: self.heads.iter().map(|h| h.map(f)).collect(),
            ln2: self.ln2.map(f),
            fc1: self.fc1.map(f),
            fc2: self.fc2.map(f),
        }
    }
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        self.ln1.for_each(f);
        for h in &self.heads {
            h.for_each(f);
        }
        self.ln2.for_each(f);
        self.fc1.for_each(f);
        self.fc2.for_each(f);
    }
    pub fn zip_mut<B>(&mut self, other: &Block<B>, f: &mut impl FnMut(&mut T, &B)) {
        self.ln1.zip_mut(&other.ln1, f);
        for (h, ho) in self.heads.iter_mut().zip(&other.heads) {
            h.zip_mut(ho, f);
        }
        self.ln2.zip_mut(&other.ln2, f);
        self.fc1.zip_mut(&other.fc1, f);
        self.fc2.zip_mut(&other.fc2, f);
    }
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        self.ln1.for_each_mut(f);
        for h in &mut self.heads {
            h.for_each_mut(f);
        }
        self.ln2.for_each_mut(f);
        self.fc1.for_each_mut(f);
        self.fc2.for_each_mut(f);
    }
}

impl<T> VisionParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> VisionParams<U> {
        VisionParams {
            patch: self.patch.map(f),
            pos: f(&self.pos),
            blocks: self.blocks.iter().map(|b| b.map(f)).collect(),
            ln_out: self.ln_out.map(f),
        }
    }
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        self.patch.for_each(f);
        f(&self.pos);
        for b in &self.blocks {
            b.for_each(f);
        }
        self.ln_out.for_each(f);
    }
    pub fn zip_mut<B>(&mut self, other: &VisionParams<B>, f: &mut impl FnMut(&mut T, &B)) {
        self.patch.zip_mut(&other.patch, f);
        f(&mut self.pos, &other.pos);
        for (b, bo) in self.blocks.iter_mut().zip(&other.blocks) {
            b.zip_mut(bo, f);
        }
        self.ln_out.zip_mut(&other.ln_out, f);
    }
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        self.patch.for_each_mut(f);
        f(&mut self.pos);
        for b in &mut self.blocks {
            b.for_each_mut(f);
        }
        self.ln_out.for_each_mut(f);
    }
}

impl<T> ProjectorParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> ProjectorParams<U> {
        ProjectorParams { fc1: self.fc1.map(f), fc2: self.fc2.map(f) }
    }
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        self.fc1.for_each(f);
        self.fc2.for_each(f);
    }
    pub fn zip_mut<B>(&mut self, other: &ProjectorParams<B>, f: &mut impl FnMut(&mut T, &B)) {
        self.fc1.zip_mut(&other.fc1, f);
        self.fc2.zip_mut(&other.fc2, f);
    }
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        self.fc1.for_each_mut(f);
        self.fc2.for_each_mut(f);
    }
}

impl<T> LmParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> LmParams<U> {
        LmParams {
            embed: f(&self.embed),
            pos: f(&self.pos),
            blocks: self.blocks.iter().map(|b| b.map(f)).collect(),
            ln_out: self.ln_out.map(f),
        }
    }
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(&'a T)) {
        f(&self.embed);
        f(&self.pos);
        for b in &self.blocks {
            b.for_each(f);
        }
        self.ln_out.for_each(f);
    }
    pub fn zip_mut<B>(&mut self, other: &LmParams<B>, f: &mut impl FnMut(&mut T, &B)) {
        f(&mut self.embed, &other.embed);
        f(&mut self.pos, &other.pos);
        for (b, bo) in self.blocks.iter_mut().zip(&other.blocks) {
            b.zip_mut(bo, f);
        }
        self.ln_out.zip_mut(&other.ln_out, f);
    }
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        f(&mut self.embed);
        f(&mut self.pos);
        for b in &mut self.blocks {
            b.for_each_mut(f);
        }
        self.ln_out.for_each_mut(f);
    }
}

pub(crate) fn init_block(
    init: &mut ParamInit,
    prefix: &str,
    d: usize,
    n_heads: usize,
) -> Block<Param> {
    let head_dim = d / n_heads;
    let hidden = 4 * d;
    Block {
        ln1: Norm {
            gain: init.filled(&format!("{prefix}.ln1.gain"), &[d], 1.0),
            bias: init.filled(&format!("{prefix}.ln1.bias"), &[d], 0.0),
        },
        heads: (0..n_heads)
            .map(|h| AttnHead {
                wq: init.normal(&format!("{prefix}.heads.{h}.wq"), &[d, head_dim]),
                wk: init.normal(&format!("{prefix}.heads.{h}.wk"), &[d, head_dim]),
                wv: init.normal(&format!("{prefix}.heads.{h}.wv"), &[d, head_dim]),
                wo: init.normal(&format!("{prefix}.heads.{h}.wo"), &[head_dim, d]),
            })
            .collect(),
        ln2: Norm {
            gain: init.filled(&format!("{prefix}.ln2.gain"), &[d], 1.0),
            bias: init.filled(&format!("{prefix}.ln2.bias"), &[d], 0.0),
        },
        fc1: Affine {
            w: init.normal(&format!("{prefix}.fc1.w"), &[d, hidden]),
            b: init.filled(&format!("{prefix}.fc1.b"), &[hidden], 0.0),
        },
        fc2: Affine {
            w: init.normal(&format!("{prefix}.fc2.w"), &[hidden, d]),
            b: init.filled(&format!("{prefix}.fc2.b"), &[d], 0.0),
        },
    }
}
