//! Small channels-last CNN: `3×3` valid convolutions with ReLU, each
//! followed by `2×2` max pooling (floor), then ReLU dense layers and a
//! softmax head. All parameters live in one flat vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Convolution kernel side.
pub const KERNEL: usize = 3;

/// One layer with the offsets of its weights and biases in the flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// Weights laid out `[ky][kx][cin][cout]`.
    Conv {
        side_in: usize,
        cin: usize,
        cout: usize,
        w: usize,
        b: usize,
    },
    /// Weights laid out `[in][out]`. The last dense layer feeds the softmax.
    Dense {
        n_in: usize,
        n_out: usize,
        w: usize,
        b: usize,
        relu: bool,
    },
}

impl LayerSpec {
    pub fn n_params(&self) -> usize {
        match *self {
            LayerSpec::Conv { cin, cout, .. } => KERNEL * KERNEL * cin * cout + cout,
            LayerSpec::Dense { n_in, n_out, .. } => n_in * n_out + n_out,
        }
    }

    fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv { cin, cout, .. } => (KERNEL * KERNEL * cin, KERNEL * KERNEL * cout),
            LayerSpec::Dense { n_in, n_out, .. } => (n_in, n_out),
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        match *self {
            LayerSpec::Conv { cin, cout, w, b, .. } => (w, KERNEL * KERNEL * cin * cout, b),
            LayerSpec::Dense { n_in, n_out, w, b, .. } => (w, n_in * n_out, b),
        }
    }
}

/// Side length after one convolution and pooling stage, if any is left.
pub fn stage_side(side: usize) -> Option<usize> {
    let conv = side.checked_sub(KERNEL - 1)?;
    let pooled = conv / 2;
    (pooled > 0).then_some(pooled)
}

/// Smallest input side that survives `stages` convolution and pooling stages.
pub fn min_side(stages: usize) -> usize {
    (1..).find(|&s| (0..stages).try_fold(s, |acc, _| stage_side(acc)).is_some()).expect("some side works")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_side: usize,
    pub channels: usize,
    pub layers: Vec<LayerSpec>,
    pub params: Vec<f64>,
}

struct ConvTrace {
    input: Vec<f64>,
    act: Vec<f64>,
    pool_idx: Vec<usize>,
}

struct DenseTrace {
    input: Vec<f64>,
    out: Vec<f64>,
}

/// Intermediate values of one forward pass.
pub struct Trace {
    convs: Vec<ConvTrace>,
    dense: Vec<DenseTrace>,
    pub probs: Vec<f64>,
}

impl Network {
    /// Layer layout for the given filter chain, dense widths and class count.
    /// Returns `None` when the spatial chain collapses.
    pub fn layout(input_side: usize, channels: usize, filters: &[usize], dense: &[usize], n_classes: usize) -> Option<Vec<LayerSpec>> {
        let mut layers = Vec::new();
        let mut off = 0;
        let mut side = input_side;
        let mut c = channels;
        for &f in filters {
            let w = off;
            let b = w + KERNEL * KERNEL * c * f;
            off = b + f;
            layers.push(LayerSpec::Conv {
                side_in: side,
                cin: c,
                cout: f,
                w,
                b,
            });
            side = stage_side(side)?;
            c = f;
        }
        let mut n = side * side * c;
        let widths: Vec<(usize, bool)> = dense.iter().map(|&d| (d, true)).chain([(n_classes, false)]).collect();
        for (width, relu) in widths {
            let w = off;
            let b = w + n * width;
            off = b + width;
            layers.push(LayerSpec::Dense {
                n_in: n,
                n_out: width,
                w,
                b,
                relu,
            });
            n = width;
        }
        Some(layers)
    }

    pub fn zeros(input_side: usize, channels: usize, filters: &[usize], dense: &[usize], n_classes: usize) -> Option<Self> {
        let layers = Self::layout(input_side, channels, filters, dense, n_classes)?;
        let n = layers.iter().map(LayerSpec::n_params).sum();
        Some(Self {
            input_side,
            channels,
            layers,
            params: vec![0.0; n],
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot<R: Rng>(mut self, rng: &mut R) -> Self {
        for l in &self.layers {
            let (fan_in, fan_out) = l.fans();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, len, _) = l.offsets();
            for p in &mut self.params[w..w + len] {
                *p = rng.random_range(-limit..limit);
            }
        }
        self
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Dense { n_out, .. }) => *n_out,
            _ => 0,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_side * self.input_side * self.channels
    }

    pub fn forward(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.input_len(), "input size does not match the network");
        let mut convs = Vec::new();
        let mut dense = Vec::new();
        let mut cur = x.to_vec();
        let mut logits = Vec::new();
        for l in &self.layers {
            match *l {
                LayerSpec::Conv { side_in, cin, cout, w, b } => {
                    let wt = &self.params[w..w + KERNEL * KERNEL * cin * cout];
                    let act = conv_forward(&cur, side_in, cin, cout, wt, &self.params[b..b + cout]);
                    let (pooled, pool_idx) = pool_forward(&act, side_in - (KERNEL - 1), cout);
                    convs.push(ConvTrace {
                        input: std::mem::replace(&mut cur, pooled),
                        act,
                        pool_idx,
                    });
                }
                LayerSpec::Dense { n_in, n_out, w, b, relu } => {
                    let mut out = self.params[b..b + n_out].to_vec();
                    let wt = &self.params[w..w + n_in * n_out];
                    for (i, &v) in cur.iter().enumerate() {
                        if v != 0.0 {
                            axpy(&mut out, v, &wt[i * n_out..(i + 1) * n_out]);
                        }
                    }
                    if relu {
                        out.iter_mut().for_each(|v| *v = v.max(0.0));
                        dense.push(DenseTrace {
                            input: std::mem::replace(&mut cur, out.clone()),
                            out,
                        });
                    } else {
                        dense.push(DenseTrace {
                            input: std::mem::take(&mut cur),
                            out: out.clone(),
                        });
                        logits = out;
                    }
                }
            }
        }
        Trace {
            convs,
            dense,
            probs: softmax(&logits),
        }
    }

    /// Adds `∂L/∂params` to `grad`, given `∂L/∂logits`.
    pub fn backward_into(&self, trace: &Trace, d_logits: &[f64], grad: &mut [f64]) {
        let mut delta = d_logits.to_vec();
        let mut di = trace.dense.len();
        let mut ci = trace.convs.len();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let need_input_grad = li > 0;
            match *l {
                LayerSpec::Dense { n_in, n_out, w, b, relu } => {
                    di -= 1;
                    let t = &trace.dense[di];
                    if relu {
                        for (d, o) in delta.iter_mut().zip(&t.out) {
                            if *o <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                    axpy(&mut grad[b..b + n_out], 1.0, &delta);
                    let wt = &self.params[w..w + n_in * n_out];
                    let mut d_in = vec![0.0; if need_input_grad { n_in } else { 0 }];
                    for (i, &v) in t.input.iter().enumerate() {
                        if v != 0.0 {
                            axpy(&mut grad[w + i * n_out..w + (i + 1) * n_out], v, &delta);
                        }
                        if need_input_grad {
                            d_in[i] = dot(&wt[i * n_out..(i + 1) * n_out], &delta);
                        }
                    }
                    delta = d_in;
                }
                LayerSpec::Conv { side_in, cin, cout, w, b } => {
                    ci -= 1;
                    let t = &trace.convs[ci];
                    let mut d_act = vec![0.0; t.act.len()];
                    for (k, &src) in t.pool_idx.iter().enumerate() {
                        d_act[src] += delta[k];
                    }
                    for (d, a) in d_act.iter_mut().zip(&t.act) {
                        if *a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    let wlen = KERNEL * KERNEL * cin * cout;
                    let (gw, rest) = grad[w..].split_at_mut(wlen);
                    let gb = &mut rest[b - w - wlen..b - w - wlen + cout];
                    let mut d_in = if need_input_grad { Some(vec![0.0; t.input.len()]) } else { None };
                    conv_backward(
                        &t.input,
                        side_in,
                        cin,
                        cout,
                        &self.params[w..w + wlen],
                        &d_act,
                        gw,
                        gb,
                        d_in.as_deref_mut(),
                    );
                    delta = d_in.unwrap_or_default();
                }
            }
        }
    }

    /// Class probabilities for one input.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).probs
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Valid `3×3` convolution followed by ReLU.
fn conv_forward(x: &[f64], side: usize, cin: usize, cout: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let o = side - (KERNEL - 1);
    let run = KERNEL * cin;
    let mut out = vec![0.0; o * o * cout];
    for y in 0..o {
        for xx in 0..o {
            let dst = &mut out[(y * o + xx) * cout..(y * o + xx + 1) * cout];
            dst.copy_from_slice(b);
            for ky in 0..KERNEL {
                let base = ((y + ky) * side + xx) * cin;
                let src = &x[base..base + run];
                let wk = &w[ky * run * cout..(ky + 1) * run * cout];
                for (j, &v) in src.iter().enumerate() {
                    if v != 0.0 {
                        axpy(dst, v, &wk[j * cout..(j + 1) * cout]);
                    }
                }
            }
            dst.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    side: usize,
    cin: usize,
    cout: usize,
    w: &[f64],
    d_out: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    mut d_in: Option<&mut [f64]>,
) {
    let o = side - (KERNEL - 1);
    let run = KERNEL * cin;
    for y in 0..o {
        for xx in 0..o {
            let g = &d_out[(y * o + xx) * cout..(y * o + xx + 1) * cout];
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            axpy(gb, 1.0, g);
            for ky in 0..KERNEL {
                let base = ((y + ky) * side + xx) * cin;
                let wk = ky * run * cout;
                for j in 0..run {
                    let v = x[base + j];
                    let row = wk + j * cout..wk + (j + 1) * cout;
                    if v != 0.0 {
                        axpy(&mut gw[row.clone()], v, g);
                    }
                    if let Some(d) = d_in.as_deref_mut() {
                        d[base + j] += dot(&w[row], g);
                    }
                }
            }
        }
    }
}

/// `2×2` stride-2 max pool; odd trailing rows and columns are dropped.
/// Ties go to the first element in row-major order.
fn pool_forward(a: &[f64], side: usize, c: usize) -> (Vec<f64>, Vec<usize>) {
    let p = side / 2;
    let mut out = vec![0.0; p * p * c];
    let mut idx = vec![0; p * p * c];
    for py in 0..p {
        for px in 0..p {
            for ch in 0..c {
                let cand = [
                    ((2 * py) * side + 2 * px) * c + ch,
                    ((2 * py) * side + 2 * px + 1) * c + ch,
                    ((2 * py + 1) * side + 2 * px) * c + ch,
                    ((2 * py + 1) * side + 2 * px + 1) * c + ch,
                ];
                let mut best = cand[0];
                for &k in &cand[1..] {
                    if a[k] > a[best] {
                        best = k;
                    }
                }
                let o = (py * p + px) * c + ch;
                out[o] = a[best];
                idx[o] = best;
            }
        }
    }
    (out, idx)
}
