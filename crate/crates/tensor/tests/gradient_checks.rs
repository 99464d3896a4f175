//! Finite-difference validation of every registered backward rule.

use cxr_tensor::{finite_diff_check, Graph, Result, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const TOL: f64 = 1e-4;
const H: f64 = 1e-5;

fn rand_vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn check_op<F>(name: &str, numel: usize, shape: &[usize], build: F)
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    for trial in 0..10 {
        let x = rand_vec(&mut rng, numel);
        let err = finite_diff_check(&build, &x, shape, H).unwrap();
        assert!(err < TOL, "{name} trial {trial}: max relative error {err}");
    }
}

#[test]
fn matmul_gradients() {
    check_op("matmul-lhs", 12, &[3, 4], |g, x| {
        let w = g.constant((0..20).map(|i| 0.1 * i as f64 - 1.0).collect(), vec![4, 5])?;
        let y = g.matmul(x, w)?;
        Ok(g.sum(y))
    });
    check_op("matmul-rhs", 12, &[4, 3], |g, x| {
        let w = g.constant((0..8).map(|i| 0.3 * i as f64 - 1.0).collect(), vec![2, 4])?;
        let y = g.matmul(w, x)?;
        Ok(g.l2_norm_sq(y))
    });
}

#[test]
fn elementwise_gradients() {
    check_op("add", 6, &[2, 3], |g, x| {
        let b = g.constant(vec![0.5, -0.2, 0.9, 1.1, -1.3, 0.0], vec![2, 3])?;
        let y = g.add(x, b)?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("add-row-broadcast", 6, &[2, 3], |g, x| {
        let b = g.constant(vec![0.5, -0.2, 0.9], vec![3])?;
        let y = g.add(x, b)?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("add-bias-side", 3, &[3], |g, x| {
        let a = g.constant(vec![0.4, -0.6, 0.1, 0.2, 0.8, -0.9], vec![2, 3])?;
        let y = g.add(a, x)?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("mul", 6, &[2, 3], |g, x| {
        let b = g.constant(vec![0.5, -0.2, 0.9, 1.1, -1.3, 0.7], vec![2, 3])?;
        let y = g.mul(x, b)?;
        Ok(g.sum(y))
    });
    check_op("gelu", 5, &[5], |g, x| {
        let y = g.gelu(x);
        Ok(g.l2_norm_sq(y))
    });
    check_op("scale", 4, &[4], |g, x| {
        let y = g.scale(x, -2.5);
        Ok(g.l2_norm_sq(y))
    });
    check_op("mean", 6, &[2, 3], |g, x| {
        let y = g.mul(x, x)?;
        Ok(g.mean(y))
    });
    check_op("sum", 4, &[4], |g, x| {
        let y = g.gelu(x);
        Ok(g.sum(y))
    });
    check_op("l2_norm_sq", 4, &[2, 2], |g, x| Ok(g.l2_norm_sq(x)));
    check_op("reshape", 6, &[2, 3], |g, x| {
        let y = g.reshape(x, vec![3, 2])?;
        let w = g.constant(vec![0.3, -0.4], vec![2, 1])?;
        let z = g.matmul(y, w)?;
        Ok(g.l2_norm_sq(z))
    });
    check_op("transpose", 6, &[2, 3], |g, x| {
        let y = g.transpose(x)?;
        let w = g.constant(vec![0.3, -0.4], vec![2, 1])?;
        let z = g.matmul(y, w)?;
        Ok(g.l2_norm_sq(z))
    });
}

#[test]
fn normalization_and_softmax_gradients() {
    check_op("layer_norm-x", 8, &[2, 4], |g, x| {
        let gain = g.constant(vec![1.2, 0.8, -0.5, 1.0], vec![4])?;
        let bias = g.constant(vec![0.1, -0.2, 0.3, 0.0], vec![4])?;
        let y = g.layer_norm(x, gain, bias, 1e-5)?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("layer_norm-gain", 4, &[4], |g, x| {
        let input = g.constant(vec![0.4, -0.6, 0.1, 0.2, 0.8, -0.9, 0.3, -0.1], vec![2, 4])?;
        let bias = g.constant(vec![0.1, -0.2, 0.3, 0.0], vec![4])?;
        let y = g.layer_norm(input, x, bias, 1e-5)?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("layer_norm-bias", 4, &[4], |g, x| {
        let input = g.constant(vec![0.4, -0.6, 0.1, 0.2, 0.8, -0.9, 0.3, -0.1], vec![2, 4])?;
        let gain = g.constant(vec![1.2, 0.8, -0.5, 1.0], vec![4])?;
        let y = g.layer_norm(input, gain, x, 1e-5)?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("softmax_rows", 12, &[3, 4], |g, x| {
        let p = g.softmax_rows(x)?;
        let w = g.constant((0..12).map(|i| 0.2 * i as f64 - 1.0).collect(), vec![3, 4])?;
        let y = g.mul(p, w)?;
        Ok(g.sum(y))
    });
    check_op("causal_softmax_rows", 16, &[4, 4], |g, x| {
        let p = g.causal_softmax_rows(x)?;
        let w = g.constant((0..16).map(|i| 0.15 * i as f64 - 1.0).collect(), vec![4, 4])?;
        let y = g.mul(p, w)?;
        Ok(g.sum(y))
    });
    check_op("softmax_cross_entropy", 12, &[3, 4], |g, x| {
        g.softmax_cross_entropy(x, &[2, 0, 3])
    });
}

#[test]
fn structural_op_gradients() {
    check_op("embedding_lookup", 8, &[4, 2], |g, x| {
        let y = g.embedding_lookup(x, &[1, 3, 1, 0])?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("concat_rows", 6, &[3, 2], |g, x| {
        let other = g.constant(vec![0.7, -0.7, 0.2, 0.4], vec![2, 2])?;
        let y = g.concat_rows(&[x, other, x])?;
        Ok(g.l2_norm_sq(y))
    });
    check_op("slice_rows", 8, &[4, 2], |g, x| {
        let y = g.slice_rows(x, 1, 2)?;
        Ok(g.l2_norm_sq(y))
    });
}

/// A two-layer MLP with every nonlinearity in the engine, checked end to end.
#[test]
fn composed_mlp_loss_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x3117);
    for _ in 0..5 {
        let x = rand_vec(&mut rng, 12);
        let err = finite_diff_check(
            |g, x| {
                let w1 = g.constant(
                    (0..20).map(|i| ((i * 7 + 3) % 11) as f64 * 0.05 - 0.2).collect(),
                    vec![4, 5],
                )?;
                let b1 = g.constant(vec![0.05, -0.1, 0.2, 0.0, 0.15], vec![5])?;
                let w2 = g.constant(
                    (0..15).map(|i| ((i * 5 + 1) % 7) as f64 * 0.07 - 0.2).collect(),
                    vec![5, 3],
                )?;
                let gain = g.constant(vec![1.0, 0.9, 1.1], vec![3])?;
                let bias = g.constant(vec![0.0, 0.1, -0.1], vec![3])?;
                let h = g.matmul(x, w1)?;
                let h = g.add(h, b1)?;
                let h = g.gelu(h);
                let h = g.matmul(h, w2)?;
                let h = g.layer_norm(h, gain, bias, 1e-5)?;
                g.softmax_cross_entropy(h, &[2, 0, 1])
            },
            &x,
            &[3, 4],
            H,
        )
        .unwrap();
        assert!(err < TOL, "mlp gradient error {err}");
    }
}
