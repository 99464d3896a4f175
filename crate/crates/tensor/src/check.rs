use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};

/// Compare the backward-pass gradient of a scalar-valued tensor function
/// against central finite differences with step `h`.
///
/// Returns `max_i |g_analytic_i - g_fd_i| / (|g_fd_i| + 1e-8)`.
pub fn finite_diff_check<F>(build: F, x_data: &[f64], x_shape: &[usize], h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(TensorError::BadDimension(format!("step must be > 0, got {h}")));
    }

    let eval = |data: &[f64]| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.leaf(data.to_vec(), x_shape.to_vec(), false)?;
        let loss = build(&mut g, x)?;
        let t = g.value(loss);
        if !t.is_scalar() {
            return Err(TensorError::NonScalarLoss { shape: t.shape.clone() });
        }
        Ok(t.data[0])
    };

    let mut g = Graph::new();
    let x = g.leaf(x_data.to_vec(), x_shape.to_vec(), true)?;
    let loss = build(&mut g, x)?;
    if !g.value(loss).is_scalar() {
        return Err(TensorError::NonScalarLoss { shape: g.shape(loss).to_vec() });
    }
    g.backward(loss)?;
    let analytic = match g.grad(x) {
        Some(grad) => grad.to_vec(),
        // The loss does not depend on x at all.
        None => vec![0.0; x_data.len()],
    };

    let mut max_err = 0.0f64;
    let mut probe = x_data.to_vec();
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = eval(&probe)?;
        probe[i] = orig - h;
        let minus = eval(&probe)?;
        probe[i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let err = (analytic[i] - fd).abs() / (fd.abs() + 1e-8);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
