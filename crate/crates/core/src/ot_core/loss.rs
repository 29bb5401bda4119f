//! Batch losses of the max-min problem and their exact gradients.
//!
//! With `T_i = T(base_i, y_i)`:
//!
//! * map loss `mean(0.5 |base_i - T_i|^2 - f(T_i, y_i))`, minimized over `T`;
//! * potential loss `mean(-f(terminal_i, y_i) + f(T_i, y_i))`, minimized over `f`.

use nalgebra::DMatrix;

use super::nn::ResidualNetwork;
use super::pairs::TrainingPairs;

/// Which network a gradient is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Map loss, gradient w.r.t. the map parameters.
    Map,
    /// Potential loss, gradient w.r.t. the potential parameters.
    Potential,
}

/// `[top; bottom]` stacked row-wise.
pub(crate) fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let (a, b, cols) = (top.nrows(), bottom.nrows(), top.ncols());
    assert_eq!(bottom.ncols(), cols, "stacked column counts");
    let rows = a + b;
    let mut out = DMatrix::zeros(rows, cols);
    let data = out.as_mut_slice();
    let (ts, bs) = (top.as_slice(), bottom.as_slice());
    for j in 0..cols {
        data[j * rows..j * rows + a].copy_from_slice(&ts[j * a..(j + 1) * a]);
        data[j * rows + a..(j + 1) * rows].copy_from_slice(&bs[j * b..(j + 1) * b]);
    }
    out
}

fn check_batch(f: &ResidualNetwork, t: &ResidualNetwork, batch: &TrainingPairs) {
    assert!(!batch.is_empty(), "empty batch");
    let d = batch.state_dim() + batch.context_dim();
    assert_eq!(t.input_dim(), d, "map input dim");
    assert_eq!(f.input_dim(), d, "potential input dim");
    assert_eq!(t.output_dim(), batch.state_dim(), "map output dim");
    assert_eq!(f.output_dim(), 1, "potential output dim");
}

fn half_sq_dist_mean(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    0.5 * a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.ncols() as f64
}

pub fn push_batch(t: &ResidualNetwork, batch: &TrainingPairs) -> DMatrix<f64> {
    t.forward(&stack(&batch.base, &batch.windows))
}

pub fn loss_t(f: &ResidualNetwork, t: &ResidualNetwork, batch: &TrainingPairs) -> f64 {
    check_batch(f, t, batch);
    let pushed = push_batch(t, batch);
    let fv = f.forward(&stack(&pushed, &batch.windows));
    half_sq_dist_mean(&batch.base, &pushed) - fv.mean()
}

pub fn loss_f(f: &ResidualNetwork, t: &ResidualNetwork, batch: &TrainingPairs) -> f64 {
    check_batch(f, t, batch);
    let pushed = push_batch(t, batch);
    let on_target = f.forward(&stack(&batch.terminal, &batch.windows));
    let on_pushed = f.forward(&stack(&pushed, &batch.windows));
    on_pushed.mean() - on_target.mean()
}

/// Map loss and its gradient w.r.t. `t.params`; `f` is held fixed.
pub fn loss_t_grad(f: &ResidualNetwork, t: &ResidualNetwork, batch: &TrainingPairs) -> (f64, Vec<f64>) {
    check_batch(f, t, batch);
    let b = batch.len() as f64;
    let n = batch.state_dim();
    let t_tape = t.forward_tape(&stack(&batch.base, &batch.windows));
    let pushed = &t_tape.output;
    let f_tape = f.forward_tape(&stack(pushed, &batch.windows));
    let value = half_sq_dist_mean(&batch.base, pushed) - f_tape.output.mean();

    let d_f_out = DMatrix::from_element(1, batch.len(), -1.0 / b);
    let mut d_pushed = f.backward(&f_tape, &d_f_out, None, n);
    for ((d, p), x) in d_pushed.iter_mut().zip(pushed.iter()).zip(batch.base.iter()) {
        *d += (p - x) / b;
    }
    let mut grad = vec![0.0; t.params.len()];
    t.backward(&t_tape, &d_pushed, Some(&mut grad), 0);
    (value, grad)
}

/// Potential loss and its gradient w.r.t. `f.params`; `T` is held fixed.
pub fn loss_f_grad(f: &ResidualNetwork, t: &ResidualNetwork, batch: &TrainingPairs) -> (f64, Vec<f64>) {
    check_batch(f, t, batch);
    let pushed = push_batch(t, batch);
    potential_loss_grad(f, &pushed, batch)
}

/// Potential loss and gradient for already pushed-forward states.
pub(crate) fn potential_loss_grad(
    f: &ResidualNetwork,
    pushed: &DMatrix<f64>,
    batch: &TrainingPairs,
) -> (f64, Vec<f64>) {
    let count = batch.len();
    let b = count as f64;
    let target = stack(&batch.terminal, &batch.windows);
    let moved = stack(pushed, &batch.windows);
    let mut both = DMatrix::zeros(target.nrows(), 2 * count);
    both.columns_mut(0, count).copy_from(&target);
    both.columns_mut(count, count).copy_from(&moved);
    let tape = f.forward_tape(&both);
    let out = tape.output.as_slice();
    let value = (out[count..].iter().sum::<f64>() - out[..count].iter().sum::<f64>()) / b;
    let d_out = DMatrix::from_fn(1, 2 * count, |_, j| if j < count { -1.0 / b } else { 1.0 / b });
    let mut grad = vec![0.0; f.params.len()];
    f.backward(&tape, &d_out, Some(&mut grad), 0);
    (value, grad)
}

pub fn gradient(kind: LossKind, f: &ResidualNetwork, t: &ResidualNetwork, batch: &TrainingPairs) -> Vec<f64> {
    match kind {
        LossKind::Map => loss_t_grad(f, t, batch).1,
        LossKind::Potential => loss_f_grad(f, t, batch).1,
    }
}

/// Full-sample objective `mean_nu f(X_w, Y) + mean_eta [0.5 |T - X|^2 - f(T, Y)]`.
pub fn evaluate_objective(f: &ResidualNetwork, t: &ResidualNetwork, pairs: &TrainingPairs) -> f64 {
    check_batch(f, t, pairs);
    let on_target = f.forward(&stack(&pairs.terminal, &pairs.windows));
    on_target.mean() + loss_t(f, t, pairs)
}
