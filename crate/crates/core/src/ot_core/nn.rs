//! Residual multilayer networks with batched forward and reverse passes.
//!
//! Batches are column-major `(features x batch)` matrices: one sample per
//! column. Parameters live in one flat vector so the optimizer can treat them
//! uniformly; the layout is
//!
//! ```text
//! W_in (width x input), b_in,
//! per block: W_1 (width x width), b_1, W_2 (width x width), b_2,
//! W_out (output x width), b_out
//! ```
//!
//! with every matrix stored column-major. A block maps `h -> h + W_2 act(W_1 h + b_1) + b_2`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation and the activation value.
    #[inline]
    fn derivative(self, pre: f64, act: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - act * act,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub output_dim: usize,
    pub width: usize,
    pub blocks: usize,
    #[serde(default)]
    pub activation: Activation,
    /// Adds the first `output_dim` inputs to the output, so a zeroed output
    /// adapter makes the network the identity on the state part of its input.
    #[serde(default)]
    pub state_skip: bool,
}

impl Architecture {
    pub fn param_count(&self) -> usize {
        let (d, h, o) = (self.input_dim, self.width, self.output_dim);
        h * d + h + self.blocks * 2 * (h * h + h) + o * h + o
    }

    fn layout(&self) -> Layout {
        let (d, h, o) = (self.input_dim, self.width, self.output_dim);
        let mut off = 0;
        let mut take = |len: usize| {
            let start = off;
            off += len;
            start
        };
        let w_in = take(h * d);
        let b_in = take(h);
        let blocks = (0..self.blocks)
            .map(|_| BlockLayout {
                w1: take(h * h),
                b1: take(h),
                w2: take(h * h),
                b2: take(h),
            })
            .collect();
        let w_out = take(o * h);
        let b_out = take(o);
        Layout {
            w_in,
            b_in,
            blocks,
            w_out,
            b_out,
        }
    }
}

#[derive(Debug, Clone)]
struct BlockLayout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    w_in: usize,
    b_in: usize,
    blocks: Vec<BlockLayout>,
    w_out: usize,
    b_out: usize,
}

/// Strided read-only matrix view handed to `dgemm`.
#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    fn col_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self {
            data,
            rows,
            cols,
            rs: 1,
            cs: rows as isize,
        }
    }

    fn of(m: &'a DMatrix<f64>) -> Self {
        Self::col_major(m.as_slice(), m.nrows(), m.ncols())
    }

    fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }
}

/// `c = alpha a b + beta c` with `c` column-major `(a.rows x b.cols)`.
fn gemm(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert!(c.len() >= a.rows * b.cols, "gemm output size");
    if a.rows == 0 || b.cols == 0 {
        return;
    }
    // SAFETY: the views cover `rows x cols` elements at the given strides
    // (checked by construction), and `c` holds `a.rows * b.cols` elements.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            1,
            a.rows as isize,
        );
    }
}

fn add_bias(m: &mut DMatrix<f64>, bias: &[f64]) {
    let rows = m.nrows();
    for col in m.as_mut_slice().chunks_exact_mut(rows) {
        for (v, b) in col.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn accumulate_row_sums(m: &DMatrix<f64>, out: &mut [f64]) {
    let rows = m.nrows();
    for col in m.as_slice().chunks_exact(rows) {
        for (o, v) in out.iter_mut().zip(col) {
            *o += v;
        }
    }
}

/// Intermediate values of a forward pass, kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct Tape {
    input: DMatrix<f64>,
    hidden: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
    act: Vec<DMatrix<f64>>,
    pub output: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualNetwork {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

impl ResidualNetwork {
    pub fn zeros(arch: Architecture) -> Self {
        let params = vec![0.0; arch.param_count()];
        Self { arch, params }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        check_dim("network parameter vector", arch.param_count(), params.len())?;
        Ok(Self { arch, params })
    }

    /// Uniform fan-in initialization `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for
    /// weights and biases. With `state_skip`, the output adapter starts at
    /// zero so the network begins as the identity on its state input.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let layout = arch.layout();
        let mut net = Self::zeros(arch);
        let (d, h, o) = (net.arch.input_dim, net.arch.width, net.arch.output_dim);
        let mut fill = |params: &mut [f64], start: usize, len: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for p in &mut params[start..start + len] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(&mut net.params, layout.w_in, h * d, d);
        fill(&mut net.params, layout.b_in, h, d);
        for b in &layout.blocks {
            fill(&mut net.params, b.w1, h * h, h);
            fill(&mut net.params, b.b1, h, h);
            fill(&mut net.params, b.w2, h * h, h);
            fill(&mut net.params, b.b2, h, h);
        }
        if !net.arch.state_skip {
            fill(&mut net.params, layout.w_out, o * h, h);
            fill(&mut net.params, layout.b_out, o, h);
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim
    }

    fn slice(&self, start: usize, len: usize) -> &[f64] {
        &self.params[start..start + len]
    }

    pub fn forward(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_tape(input).output
    }

    pub fn forward_one(&self, input: &[f64]) -> Vec<f64> {
        let m = DMatrix::from_column_slice(input.len(), 1, input);
        self.forward(&m).as_slice().to_vec()
    }

    /// Forward pass for inputs `[states; context]` where the context column is
    /// shared by every sample; its contribution to the first layer is
    /// computed once.
    pub fn forward_shared_context(&self, states: &DMatrix<f64>, context: &[f64]) -> DMatrix<f64> {
        let (d, h) = (self.arch.input_dim, self.arch.width);
        let n = states.nrows();
        assert_eq!(n + context.len(), d, "state + context must match input_dim");
        let layout = self.arch.layout();
        let w_in = self.slice(layout.w_in, h * d);
        let mut shared = self.slice(layout.b_in, h).to_vec();
        if !context.is_empty() {
            gemm(
                1.0,
                View::col_major(&w_in[h * n..], h, d - n),
                View::col_major(context, context.len(), 1),
                1.0,
                &mut shared,
            );
        }
        let batch = states.ncols();
        let mut hidden = DMatrix::zeros(h, batch);
        gemm(
            1.0,
            View::col_major(w_in, h, n),
            View::of(states),
            0.0,
            hidden.as_mut_slice(),
        );
        add_bias(&mut hidden, &shared);
        self.finish_forward(hidden, states, &layout, None)
    }

    pub fn forward_tape(&self, input: &DMatrix<f64>) -> Tape {
        let (d, h) = (self.arch.input_dim, self.arch.width);
        assert_eq!(input.nrows(), d, "network input rows");
        let layout = self.arch.layout();
        let mut hidden = DMatrix::zeros(h, input.ncols());
        gemm(
            1.0,
            View::col_major(self.slice(layout.w_in, h * d), h, d),
            View::of(input),
            0.0,
            hidden.as_mut_slice(),
        );
        add_bias(&mut hidden, self.slice(layout.b_in, h));
        let mut tape = Tape {
            input: input.clone(),
            hidden: Vec::with_capacity(self.arch.blocks + 1),
            pre: Vec::with_capacity(self.arch.blocks),
            act: Vec::with_capacity(self.arch.blocks),
            output: DMatrix::zeros(0, 0),
        };
        tape.output = self.finish_forward(hidden, input, &layout, Some(&mut tape));
        tape
    }

    /// Runs the residual blocks and output adapter from the first hidden layer.
    fn finish_forward(
        &self,
        mut hidden: DMatrix<f64>,
        input: &DMatrix<f64>,
        layout: &Layout,
        mut tape: Option<&mut Tape>,
    ) -> DMatrix<f64> {
        let (h, o) = (self.arch.width, self.arch.output_dim);
        let batch = hidden.ncols();
        let act_fn = self.arch.activation;
        for b in &layout.blocks {
            let mut pre = DMatrix::zeros(h, batch);
            gemm(
                1.0,
                View::col_major(self.slice(b.w1, h * h), h, h),
                View::of(&hidden),
                0.0,
                pre.as_mut_slice(),
            );
            add_bias(&mut pre, self.slice(b.b1, h));
            let act = pre.map(|v| act_fn.apply(v));
            let mut next = hidden.clone();
            gemm(
                1.0,
                View::col_major(self.slice(b.w2, h * h), h, h),
                View::of(&act),
                1.0,
                next.as_mut_slice(),
            );
            add_bias(&mut next, self.slice(b.b2, h));
            if let Some(t) = tape.as_deref_mut() {
                t.hidden.push(std::mem::replace(&mut hidden, next));
                t.pre.push(pre);
                t.act.push(act);
            } else {
                hidden = next;
            }
        }
        let mut out = DMatrix::zeros(o, batch);
        gemm(
            1.0,
            View::col_major(self.slice(layout.w_out, o * h), o, h),
            View::of(&hidden),
            0.0,
            out.as_mut_slice(),
        );
        add_bias(&mut out, self.slice(layout.b_out, o));
        if self.arch.state_skip {
            for (j, mut col) in out.column_iter_mut().enumerate() {
                for i in 0..o {
                    col[i] += input[(i, j)];
                }
            }
        }
        if let Some(t) = tape {
            t.hidden.push(hidden);
        }
        out
    }

    /// Reverse pass for upstream gradient `d_out` (`output_dim x batch`).
    ///
    /// Parameter gradients are *added* into `param_grad` when given. Returns
    /// the gradient with respect to the first `input_rows` input rows.
    pub fn backward(
        &self,
        tape: &Tape,
        d_out: &DMatrix<f64>,
        mut param_grad: Option<&mut [f64]>,
        input_rows: usize,
    ) -> DMatrix<f64> {
        let (d, h, o) = (self.arch.input_dim, self.arch.width, self.arch.output_dim);
        let batch = d_out.ncols();
        assert_eq!(d_out.nrows(), o, "upstream gradient rows");
        assert_eq!(tape.input.ncols(), batch, "upstream gradient batch");
        assert!(input_rows <= d);
        if let Some(g) = param_grad.as_deref() {
            assert_eq!(g.len(), self.params.len(), "gradient buffer length");
        }
        let layout = self.arch.layout();
        let blocks = self.arch.blocks;

        if let Some(g) = param_grad.as_deref_mut() {
            gemm(
                1.0,
                View::of(d_out),
                View::of(&tape.hidden[blocks]).t(),
                1.0,
                &mut g[layout.w_out..layout.w_out + o * h],
            );
            accumulate_row_sums(d_out, &mut g[layout.b_out..layout.b_out + o]);
        }
        let mut dh = DMatrix::zeros(h, batch);
        gemm(
            1.0,
            View::col_major(self.slice(layout.w_out, o * h), o, h).t(),
            View::of(d_out),
            0.0,
            dh.as_mut_slice(),
        );

        let act_fn = self.arch.activation;
        for (k, b) in layout.blocks.iter().enumerate().rev() {
            if let Some(g) = param_grad.as_deref_mut() {
                gemm(
                    1.0,
                    View::of(&dh),
                    View::of(&tape.act[k]).t(),
                    1.0,
                    &mut g[b.w2..b.w2 + h * h],
                );
                accumulate_row_sums(&dh, &mut g[b.b2..b.b2 + h]);
            }
            let mut da = DMatrix::zeros(h, batch);
            gemm(
                1.0,
                View::col_major(self.slice(b.w2, h * h), h, h).t(),
                View::of(&dh),
                0.0,
                da.as_mut_slice(),
            );
            for ((g, &p), &a) in da
                .as_mut_slice()
                .iter_mut()
                .zip(tape.pre[k].as_slice())
                .zip(tape.act[k].as_slice())
            {
                *g *= act_fn.derivative(p, a);
            }
            if let Some(g) = param_grad.as_deref_mut() {
                gemm(
                    1.0,
                    View::of(&da),
                    View::of(&tape.hidden[k]).t(),
                    1.0,
                    &mut g[b.w1..b.w1 + h * h],
                );
                accumulate_row_sums(&da, &mut g[b.b1..b.b1 + h]);
            }
            gemm(
                1.0,
                View::col_major(self.slice(b.w1, h * h), h, h).t(),
                View::of(&da),
                1.0,
                dh.as_mut_slice(),
            );
        }

        if let Some(g) = param_grad.as_mut() {
            gemm(
                1.0,
                View::of(&dh),
                View::of(&tape.input).t(),
                1.0,
                &mut g[layout.w_in..layout.w_in + h * d],
            );
            accumulate_row_sums(&dh, &mut g[layout.b_in..layout.b_in + h]);
        }
        let mut d_input = DMatrix::zeros(input_rows, batch);
        if input_rows > 0 {
            // Leading `input_rows` columns of W_in are contiguous in column-major order.
            gemm(
                1.0,
                View::col_major(self.slice(layout.w_in, h * input_rows), h, input_rows).t(),
                View::of(&dh),
                0.0,
                d_input.as_mut_slice(),
            );
            if self.arch.state_skip {
                for j in 0..batch {
                    for i in 0..o.min(input_rows) {
                        d_input[(i, j)] += d_out[(i, j)];
                    }
                }
            }
        }
        d_input
    }
}
