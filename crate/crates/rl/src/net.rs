//! Recurrent Gaussian policy and value network with hand-written batched
//! forward and backward passes.
//!
//! Architecture: a single GRU cell (hidden 256) whose output is layer
//! normalized and fed through an ELU MLP (512, 256, 128) into a linear
//! action-mean head, a linear value head, and a state-independent log-std
//! parameter per action dimension. All math runs on (batch, feature)
//! matrices so the heavy lifting stays in dense matrix products; the module
//! is generic over f32 (training) and f64 (finite-difference checks).
//!
//! In feedforward mode the cell is evaluated from a zero state at every
//! step, so outputs are a pure function of the current observation and the
//! caller's hidden state passes through untouched.

use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use grasplab_core::sim::OBS_DIM;

/// GRU hidden width.
pub const HIDDEN: usize = 256;
/// MLP trunk widths between the normalized GRU output and the heads.
pub const MLP_DIMS: [usize; 3] = [512, 256, 128];
/// Clamp range for the log standard deviation parameters.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Layer-norm variance floor.
const LN_EPS: f64 = 1e-5;

const MLP_W_NAMES: [&str; 3] = ["mlp.0.w", "mlp.1.w", "mlp.2.w"];
const MLP_B_NAMES: [&str; 3] = ["mlp.0.b", "mlp.1.b", "mlp.2.b"];

/// Fixed parameter order shared by the optimizer, checkpoints and tests.
pub const PARAM_NAMES: [&str; 17] = [
    "gru.w_ih",
    "gru.w_hh",
    "gru.b_ih",
    "gru.b_hh",
    "ln.gain",
    "ln.bias",
    "mlp.0.w",
    "mlp.0.b",
    "mlp.1.w",
    "mlp.1.b",
    "mlp.2.w",
    "mlp.2.b",
    "head.mean.w",
    "head.mean.b",
    "head.value.w",
    "head.value.b",
    "head.log_std",
];

/// Scalar type the network runs on; f32 for training, f64 for gradient
/// verification.
pub trait Scalar:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> f64 {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    let one = S::one();
    if x >= S::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

/// Policy/value network. Weight matrices are (out, in) row-major; biases and
/// the log-std are flat vectors.
#[derive(Clone, Debug)]
pub struct PolicyNet<S: Scalar> {
    pub recurrent: bool,
    pub act_dim: usize,
    pub w_ih: Array2<S>,
    pub w_hh: Array2<S>,
    pub b_ih: Array1<S>,
    pub b_hh: Array1<S>,
    pub ln_gain: Array1<S>,
    pub ln_bias: Array1<S>,
    pub mlp_w: Vec<Array2<S>>,
    pub mlp_b: Vec<Array1<S>>,
    pub mean_w: Array2<S>,
    pub mean_b: Array1<S>,
    pub value_w: Array2<S>,
    pub value_b: Array1<S>,
    pub log_std: Array1<S>,
}

/// Everything the backward pass needs from one forward step.
pub struct StepCache<S: Scalar> {
    x: Array2<S>,
    h_cell: Array2<S>,
    r: Array2<S>,
    z: Array2<S>,
    n: Array2<S>,
    gh_n: Array2<S>,
    xhat: Array2<S>,
    ln_inv: Array1<S>,
    y0: Array2<S>,
    acts: Vec<Array2<S>>,
}

/// Outputs of one forward step over a batch.
pub struct StepOutput<S: Scalar> {
    /// Action mean, (batch, act_dim).
    pub mean: Array2<S>,
    /// State value, (batch,).
    pub value: Array1<S>,
    /// Hidden state to carry to the next step; equals the input hidden in
    /// feedforward mode.
    pub hidden: Array2<S>,
}

impl<S: Scalar> PolicyNet<S> {
    /// Uniform init in +-1/sqrt(fan_in) per layer, deterministic in the seed.
    pub fn init(act_dim: usize, recurrent: bool, seed: u64, log_std_init: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |rows: usize, cols: usize, fan_in: usize| -> Array2<S> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| {
                S::from_f64(rng.gen_range(-bound..bound))
            })
        };
        let w_ih = mat(3 * HIDDEN, OBS_DIM, HIDDEN);
        let w_hh = mat(3 * HIDDEN, HIDDEN, HIDDEN);
        let b = mat(2, 3 * HIDDEN, HIDDEN);
        let b_ih = b.row(0).to_owned();
        let b_hh = b.row(1).to_owned();

        let mut mlp_w = Vec::new();
        let mut mlp_b = Vec::new();
        let mut prev = HIDDEN;
        for &dim in &MLP_DIMS {
            mlp_w.push(mat(dim, prev, prev));
            mlp_b.push(mat(1, dim, prev).row(0).to_owned());
            prev = dim;
        }
        let mean_w = mat(act_dim, prev, prev);
        let mean_b = mat(1, act_dim, prev).row(0).to_owned();
        let value_w = mat(1, prev, prev);
        let value_b = mat(1, 1, prev).row(0).to_owned();

        PolicyNet {
            recurrent,
            act_dim,
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            ln_gain: Array1::from_elem(HIDDEN, S::one()),
            ln_bias: Array1::zeros(HIDDEN),
            mlp_w,
            mlp_b,
            mean_w,
            mean_b,
            value_w,
            value_b,
            log_std: Array1::from_elem(act_dim, S::from_f64(log_std_init)),
        }
    }

    /// All-zero weights; mean and value are identically zero.
    pub fn zeros(act_dim: usize, recurrent: bool) -> Self {
        let mut net = Self::init(act_dim, recurrent, 0, 0.0);
        for (_, mut view) in net.param_views_mut() {
            view.fill(S::zero());
        }
        net
    }

    pub fn initial_hidden(&self, batch: usize) -> Array2<S> {
        Array2::zeros((batch, HIDDEN))
    }

    /// Log-std vector with the documented clamp applied.
    pub fn clamped_log_std(&self) -> Array1<S> {
        let lo = S::from_f64(LOG_STD_MIN);
        let hi = S::from_f64(LOG_STD_MAX);
        self.log_std.mapv(|v| v.max(lo).min(hi))
    }

    /// Clamp the stored log-std parameters in place; called after optimizer
    /// steps so the parameter itself stays in range.
    pub fn project_log_std(&mut self) {
        let lo = S::from_f64(LOG_STD_MIN);
        let hi = S::from_f64(LOG_STD_MAX);
        self.log_std.mapv_inplace(|v| v.max(lo).min(hi));
    }

    pub fn param_count(&self) -> usize {
        self.param_views().iter().map(|(_, v)| v.len()).sum()
    }

    pub fn param_views(&self) -> Vec<(&'static str, ArrayViewD<'_, S>)> {
        vec![
            ("gru.w_ih", self.w_ih.view().into_dyn()),
            ("gru.w_hh", self.w_hh.view().into_dyn()),
            ("gru.b_ih", self.b_ih.view().into_dyn()),
            ("gru.b_hh", self.b_hh.view().into_dyn()),
            ("ln.gain", self.ln_gain.view().into_dyn()),
            ("ln.bias", self.ln_bias.view().into_dyn()),
            ("mlp.0.w", self.mlp_w[0].view().into_dyn()),
            ("mlp.0.b", self.mlp_b[0].view().into_dyn()),
            ("mlp.1.w", self.mlp_w[1].view().into_dyn()),
            ("mlp.1.b", self.mlp_b[1].view().into_dyn()),
            ("mlp.2.w", self.mlp_w[2].view().into_dyn()),
            ("mlp.2.b", self.mlp_b[2].view().into_dyn()),
            ("head.mean.w", self.mean_w.view().into_dyn()),
            ("head.mean.b", self.mean_b.view().into_dyn()),
            ("head.value.w", self.value_w.view().into_dyn()),
            ("head.value.b", self.value_b.view().into_dyn()),
            ("head.log_std", self.log_std.view().into_dyn()),
        ]
    }

    pub fn param_views_mut(&mut self) -> Vec<(&'static str, ArrayViewMutD<'_, S>)> {
        let mut out: Vec<(&'static str, ArrayViewMutD<'_, S>)> =
            Vec::with_capacity(PARAM_NAMES.len());
        out.push(("gru.w_ih", self.w_ih.view_mut().into_dyn()));
        out.push(("gru.w_hh", self.w_hh.view_mut().into_dyn()));
        out.push(("gru.b_ih", self.b_ih.view_mut().into_dyn()));
        out.push(("gru.b_hh", self.b_hh.view_mut().into_dyn()));
        out.push(("ln.gain", self.ln_gain.view_mut().into_dyn()));
        out.push(("ln.bias", self.ln_bias.view_mut().into_dyn()));
        for ((i, w), b) in self.mlp_w.iter_mut().enumerate().zip(self.mlp_b.iter_mut()) {
            out.push((MLP_W_NAMES[i], w.view_mut().into_dyn()));
            out.push((MLP_B_NAMES[i], b.view_mut().into_dyn()));
        }
        out.push(("head.mean.w", self.mean_w.view_mut().into_dyn()));
        out.push(("head.mean.b", self.mean_b.view_mut().into_dyn()));
        out.push(("head.value.w", self.value_w.view_mut().into_dyn()));
        out.push(("head.value.b", self.value_b.view_mut().into_dyn()));
        out.push(("head.log_std", self.log_std.view_mut().into_dyn()));
        debug_assert!(out.iter().map(|(n, _)| *n).eq(PARAM_NAMES));
        out
    }

    /// Convert the weights to another scalar type.
    pub fn cast<T: Scalar>(&self) -> PolicyNet<T> {
        let m2 = |a: &Array2<S>| a.mapv(|v| T::from_f64(v.to_f64()));
        let m1 = |a: &Array1<S>| a.mapv(|v| T::from_f64(v.to_f64()));
        PolicyNet {
            recurrent: self.recurrent,
            act_dim: self.act_dim,
            w_ih: m2(&self.w_ih),
            w_hh: m2(&self.w_hh),
            b_ih: m1(&self.b_ih),
            b_hh: m1(&self.b_hh),
            ln_gain: m1(&self.ln_gain),
            ln_bias: m1(&self.ln_bias),
            mlp_w: self.mlp_w.iter().map(&m2).collect(),
            mlp_b: self.mlp_b.iter().map(&m1).collect(),
            mean_w: m2(&self.mean_w),
            mean_b: m1(&self.mean_b),
            value_w: m2(&self.value_w),
            value_b: m1(&self.value_b),
            log_std: m1(&self.log_std),
        }
    }

    /// One batched step: GRU cell, layer norm, MLP, heads. `hidden` rows must
    /// already be zeroed at episode starts by the caller.
    pub fn forward_step(
        &self,
        x: ArrayView2<S>,
        hidden: ArrayView2<S>,
    ) -> (StepOutput<S>, StepCache<S>) {
        let batch = x.nrows();
        assert_eq!(x.ncols(), OBS_DIM, "observation arity");
        assert_eq!(hidden.dim(), (batch, HIDDEN), "hidden arity");
        let h = HIDDEN;

        let h_cell = if self.recurrent {
            hidden.to_owned()
        } else {
            Array2::zeros((batch, h))
        };

        let gi = x.dot(&self.w_ih.t()) + &self.b_ih;
        let gh = h_cell.dot(&self.w_hh.t()) + &self.b_hh;

        let mut r = Array2::zeros((batch, h));
        let mut z = Array2::zeros((batch, h));
        let mut n = Array2::zeros((batch, h));
        let gh_n = gh.slice(s![.., 2 * h..3 * h]).to_owned();
        ndarray::Zip::from(&mut r)
            .and(&gi.slice(s![.., 0..h]))
            .and(&gh.slice(s![.., 0..h]))
            .for_each(|r, &a, &b| *r = sigmoid(a + b));
        ndarray::Zip::from(&mut z)
            .and(&gi.slice(s![.., h..2 * h]))
            .and(&gh.slice(s![.., h..2 * h]))
            .for_each(|z, &a, &b| *z = sigmoid(a + b));
        ndarray::Zip::from(&mut n)
            .and(&gi.slice(s![.., 2 * h..3 * h]))
            .and(&r)
            .and(&gh_n)
            .for_each(|n, &a, &r, &g| *n = (a + r * g).tanh());

        let mut h_out = Array2::zeros((batch, h));
        ndarray::Zip::from(&mut h_out)
            .and(&z)
            .and(&n)
            .and(&h_cell)
            .for_each(|o, &z, &n, &hc| *o = (S::one() - z) * n + z * hc);

        // Layer norm over the hidden axis, population statistics per sample.
        let inv_h = S::from_f64(1.0 / h as f64);
        let eps = S::from_f64(LN_EPS);
        let mut xhat = h_out.clone();
        let mut ln_inv = Array1::zeros(batch);
        for (mut row, inv_slot) in xhat.axis_iter_mut(Axis(0)).zip(ln_inv.iter_mut()) {
            let mu = row.iter().copied().sum::<S>() * inv_h;
            let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<S>() * inv_h;
            let inv = S::one() / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mu) * inv);
            *inv_slot = inv;
        }
        let y0 = &xhat * &self.ln_gain + &self.ln_bias;

        let mut acts: Vec<Array2<S>> = Vec::with_capacity(MLP_DIMS.len());
        for (i, (w, b)) in self.mlp_w.iter().zip(&self.mlp_b).enumerate() {
            let input = if i == 0 { &y0 } else { &acts[i - 1] };
            let mut pre = input.dot(&w.t()) + b;
            pre.mapv_inplace(|v| if v > S::zero() { v } else { v.exp() - S::one() });
            acts.push(pre);
        }

        let last = &acts[MLP_DIMS.len() - 1];
        let mean = last.dot(&self.mean_w.t()) + &self.mean_b;
        let value = last.dot(&self.value_w.t()).column(0).to_owned() + self.value_b[0];

        let out = StepOutput {
            mean,
            value,
            hidden: if self.recurrent {
                h_out
            } else {
                hidden.to_owned()
            },
        };
        let cache = StepCache {
            x: x.to_owned(),
            h_cell,
            r,
            z,
            n,
            gh_n,
            xhat,
            ln_inv,
            y0,
            acts,
        };
        (out, cache)
    }

    /// Backward through one cached step. `d_hidden_next` is the gradient
    /// arriving at this step's output hidden from the future; the return
    /// value is the gradient w.r.t. the input hidden. Observation gradients
    /// are not computed.
    pub fn backward_step(
        &self,
        cache: &StepCache<S>,
        d_mean: &Array2<S>,
        d_value: &Array1<S>,
        d_hidden_next: &Array2<S>,
        grads: &mut NetGrads<S>,
    ) -> Array2<S> {
        let h = HIDDEN;
        let batch = cache.x.nrows();
        let last = &cache.acts[MLP_DIMS.len() - 1];

        // Heads.
        grads.mean_w = &grads.mean_w + &d_mean.t().dot(last);
        grads.mean_b = &grads.mean_b + &d_mean.sum_axis(Axis(0));
        let dv_col = d_value.view().insert_axis(Axis(1));
        grads.value_w = &grads.value_w + &dv_col.t().dot(last);
        grads.value_b[0] = grads.value_b[0] + d_value.iter().copied().sum::<S>();
        let mut d_act = d_mean.dot(&self.mean_w) + dv_col.dot(&self.value_w);

        // MLP, last layer to first; elu'(pre) = 1 above zero, act + 1 below.
        for layer in (0..MLP_DIMS.len()).rev() {
            let act = &cache.acts[layer];
            let mut d_pre = d_act;
            ndarray::Zip::from(&mut d_pre).and(act).for_each(|g, &a| {
                if a <= S::zero() {
                    *g = *g * (a + S::one());
                }
            });
            let input = if layer == 0 {
                &cache.y0
            } else {
                &cache.acts[layer - 1]
            };
            grads.mlp_w[layer] = &grads.mlp_w[layer] + &d_pre.t().dot(input);
            grads.mlp_b[layer] = &grads.mlp_b[layer] + &d_pre.sum_axis(Axis(0));
            d_act = d_pre.dot(&self.mlp_w[layer]);
        }
        let dy0 = d_act;

        // Layer norm.
        grads.ln_gain = &grads.ln_gain + &(&dy0 * &cache.xhat).sum_axis(Axis(0));
        grads.ln_bias = &grads.ln_bias + &dy0.sum_axis(Axis(0));
        let dxhat = &dy0 * &self.ln_gain;
        let inv_h = S::from_f64(1.0 / h as f64);
        let mut d_hout = Array2::zeros((batch, h));
        for i in 0..batch {
            let dx = dxhat.row(i);
            let xh = cache.xhat.row(i);
            let s1 = dx.iter().copied().sum::<S>() * inv_h;
            let s2 = dx.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum::<S>() * inv_h;
            let inv = cache.ln_inv[i];
            let mut out = d_hout.row_mut(i);
            ndarray::Zip::from(&mut out)
                .and(&dx)
                .and(&xh)
                .for_each(|o, &d, &x| *o = inv * (d - s1 - x * s2));
        }
        if self.recurrent {
            d_hout = d_hout + d_hidden_next;
        }

        // GRU cell.
        let one = S::one();
        let mut d_gates = Array2::zeros((batch, 3 * h));
        let mut d_h_cell = Array2::zeros((batch, h));
        {
            let (mut dg_r, rest) = d_gates.view_mut().split_at(Axis(1), h);
            let (mut dg_z, mut dg_n) = rest.split_at(Axis(1), h);
            ndarray::Zip::from(&mut dg_n)
                .and(&d_hout)
                .and(&cache.z)
                .and(&cache.n)
                .for_each(|g, &dh, &z, &n| *g = dh * (one - z) * (one - n * n));
            ndarray::Zip::from(&mut dg_z)
                .and(&d_hout)
                .and(&cache.h_cell)
                .and(&cache.n)
                .and(&cache.z)
                .for_each(|g, &dh, &hc, &n, &z| *g = dh * (hc - n) * z * (one - z));
            ndarray::Zip::from(&mut dg_r)
                .and(&dg_n)
                .and(&cache.gh_n)
                .and(&cache.r)
                .for_each(|g, &dn, &ghn, &r| *g = dn * ghn * r * (one - r));
            ndarray::Zip::from(&mut d_h_cell)
                .and(&d_hout)
                .and(&cache.z)
                .for_each(|o, &dh, &z| *o = dh * z);
        }

        // d_gates holds the pre-activation gradients [r, z, n]; the hidden
        // matmul sees d(gh) which matches except gh_n carries the reset gate.
        let mut d_gh = d_gates.clone();
        {
            let mut gh_n = d_gh.slice_mut(s![.., 2 * h..3 * h]);
            ndarray::Zip::from(&mut gh_n)
                .and(&cache.r)
                .for_each(|g, &r| *g = *g * r);
        }

        grads.w_ih = &grads.w_ih + &d_gates.t().dot(&cache.x);
        grads.b_ih = &grads.b_ih + &d_gates.sum_axis(Axis(0));
        grads.w_hh = &grads.w_hh + &d_gh.t().dot(&cache.h_cell);
        grads.b_hh = &grads.b_hh + &d_gh.sum_axis(Axis(0));
        d_h_cell = d_h_cell + d_gh.dot(&self.w_hh);

        if self.recurrent {
            d_h_cell
        } else {
            // The input hidden only passes through unchanged.
            d_hidden_next.clone()
        }
    }
}

/// Parameter gradients, same shapes and order as the network.
#[derive(Clone, Debug)]
pub struct NetGrads<S: Scalar> {
    pub w_ih: Array2<S>,
    pub w_hh: Array2<S>,
    pub b_ih: Array1<S>,
    pub b_hh: Array1<S>,
    pub ln_gain: Array1<S>,
    pub ln_bias: Array1<S>,
    pub mlp_w: Vec<Array2<S>>,
    pub mlp_b: Vec<Array1<S>>,
    pub mean_w: Array2<S>,
    pub mean_b: Array1<S>,
    pub value_w: Array2<S>,
    pub value_b: Array1<S>,
    pub log_std: Array1<S>,
}

impl<S: Scalar> NetGrads<S> {
    pub fn zeros_like(net: &PolicyNet<S>) -> Self {
        NetGrads {
            w_ih: Array2::zeros(net.w_ih.dim()),
            w_hh: Array2::zeros(net.w_hh.dim()),
            b_ih: Array1::zeros(net.b_ih.len()),
            b_hh: Array1::zeros(net.b_hh.len()),
            ln_gain: Array1::zeros(net.ln_gain.len()),
            ln_bias: Array1::zeros(net.ln_bias.len()),
            mlp_w: net.mlp_w.iter().map(|w| Array2::zeros(w.dim())).collect(),
            mlp_b: net.mlp_b.iter().map(|b| Array1::zeros(b.len())).collect(),
            mean_w: Array2::zeros(net.mean_w.dim()),
            mean_b: Array1::zeros(net.mean_b.len()),
            value_w: Array2::zeros(net.value_w.dim()),
            value_b: Array1::zeros(net.value_b.len()),
            log_std: Array1::zeros(net.log_std.len()),
        }
    }

    pub fn fill_zero(&mut self) {
        for (_, mut v) in self.views_mut() {
            v.fill(S::zero());
        }
    }

    pub fn scale(&mut self, factor: S) {
        for (_, mut v) in self.views_mut() {
            v.mapv_inplace(|g| g * factor);
        }
    }

    pub fn views(&self) -> Vec<(&'static str, ArrayViewD<'_, S>)> {
        vec![
            ("gru.w_ih", self.w_ih.view().into_dyn()),
            ("gru.w_hh", self.w_hh.view().into_dyn()),
            ("gru.b_ih", self.b_ih.view().into_dyn()),
            ("gru.b_hh", self.b_hh.view().into_dyn()),
            ("ln.gain", self.ln_gain.view().into_dyn()),
            ("ln.bias", self.ln_bias.view().into_dyn()),
            ("mlp.0.w", self.mlp_w[0].view().into_dyn()),
            ("mlp.0.b", self.mlp_b[0].view().into_dyn()),
            ("mlp.1.w", self.mlp_w[1].view().into_dyn()),
            ("mlp.1.b", self.mlp_b[1].view().into_dyn()),
            ("mlp.2.w", self.mlp_w[2].view().into_dyn()),
            ("mlp.2.b", self.mlp_b[2].view().into_dyn()),
            ("head.mean.w", self.mean_w.view().into_dyn()),
            ("head.mean.b", self.mean_b.view().into_dyn()),
            ("head.value.w", self.value_w.view().into_dyn()),
            ("head.value.b", self.value_b.view().into_dyn()),
            ("head.log_std", self.log_std.view().into_dyn()),
        ]
    }

    pub fn views_mut(&mut self) -> Vec<(&'static str, ArrayViewMutD<'_, S>)> {
        let mut out: Vec<(&'static str, ArrayViewMutD<'_, S>)> =
            Vec::with_capacity(PARAM_NAMES.len());
        out.push(("gru.w_ih", self.w_ih.view_mut().into_dyn()));
        out.push(("gru.w_hh", self.w_hh.view_mut().into_dyn()));
        out.push(("gru.b_ih", self.b_ih.view_mut().into_dyn()));
        out.push(("gru.b_hh", self.b_hh.view_mut().into_dyn()));
        out.push(("ln.gain", self.ln_gain.view_mut().into_dyn()));
        out.push(("ln.bias", self.ln_bias.view_mut().into_dyn()));
        for ((i, w), b) in self.mlp_w.iter_mut().enumerate().zip(self.mlp_b.iter_mut()) {
            out.push((MLP_W_NAMES[i], w.view_mut().into_dyn()));
            out.push((MLP_B_NAMES[i], b.view_mut().into_dyn()));
        }
        out.push(("head.mean.w", self.mean_w.view_mut().into_dyn()));
        out.push(("head.mean.b", self.mean_b.view_mut().into_dyn()));
        out.push(("head.value.w", self.value_w.view_mut().into_dyn()));
        out.push(("head.value.b", self.value_b.view_mut().into_dyn()));
        out.push(("head.log_std", self.log_std.view_mut().into_dyn()));
        out
    }

    /// Global L2 norm over every parameter gradient.
    pub fn global_norm(&self) -> f64 {
        self.views()
            .iter()
            .map(|(_, v)| v.iter().map(|&g| g.to_f64() * g.to_f64()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-sample log density of a diagonal Gaussian, (batch,).
pub fn log_prob<S: Scalar>(
    mean: &Array2<S>,
    log_std: &Array1<S>,
    actions: &Array2<S>,
) -> Array1<S> {
    let half = S::from_f64(0.5);
    let ln_2pi = S::from_f64((2.0 * std::f64::consts::PI).ln());
    let dim = S::from_f64(log_std.len() as f64);
    let log_std_sum = log_std.iter().copied().sum::<S>();
    let mut out = Array1::zeros(mean.nrows());
    for (i, slot) in out.iter_mut().enumerate() {
        let mut q = S::zero();
        for j in 0..log_std.len() {
            let sd = log_std[j].exp();
            let t = (actions[[i, j]] - mean[[i, j]]) / sd;
            q = q + t * t;
        }
        *slot = -half * q - log_std_sum - half * dim * ln_2pi;
    }
    out
}

/// Entropy of the diagonal Gaussian; identical for every sample because the
/// log-std is state independent.
pub fn entropy<S: Scalar>(log_std: &Array1<S>) -> S {
    let half = S::from_f64(0.5);
    let ln_2pi = S::from_f64((2.0 * std::f64::consts::PI).ln());
    log_std.iter().copied().sum::<S>()
        + half * (S::one() + ln_2pi) * S::from_f64(log_std.len() as f64)
}
