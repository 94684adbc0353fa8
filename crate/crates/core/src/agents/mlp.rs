use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Linear,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    #[default]
    Tanh,
    Relu,
}

impl HiddenActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            HiddenActivation::Tanh => z.tanh(),
            HiddenActivation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope(self, y: f64) -> f64 {
        match self {
            HiddenActivation::Tanh => 1.0 - y * y,
            HiddenActivation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected network, tanh hidden layers unless built
/// [`Mlp::with_hidden`] otherwise. Parameters live in one
/// flat vector, layer by layer, each layer as a row-major `n_out × n_in`
/// weight block followed by `n_out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    #[serde(default)]
    hidden: HiddenActivation,
    params: Vec<f64>,
}

/// Per-layer activations of a batched forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `layers[0]` is the input; `layers[l]` the post-activation output of
    /// layer `l`.
    layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network outputs, row-major `batch × n_out`.
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache has at least the input layer")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            output,
            hidden: HiddenActivation::Tanh,
            params: vec![0.0; param_count(sizes)],
        })
    }

    pub fn with_hidden(mut self, hidden: HiddenActivation) -> Self {
        self.hidden = hidden;
        self
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new(sizes: &[usize], output: OutputActivation, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Mlp::zeros(sizes, output)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let n = (w[0] + 1) * w[1];
            for p in &mut net.params[off..off + n] {
                *p = rng.random_range(-bound..bound);
            }
            off += n;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], output: OutputActivation, params: Vec<f64>) -> Result<Self> {
        let mut net = Mlp::zeros(sizes, output)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_batch(x, 1)?;
        Ok(cache.output().to_vec())
    }

    /// `x` is row-major `batch × input_dim`.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<ForwardCache> {
        if x.len() != batch * self.input_dim() {
            return Err(Error::Dimension {
                expected: batch * self.input_dim(),
                got: x.len(),
            });
        }
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(x.to_vec());
        let mut off = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + (n_in + 1) * n_out];
            off += (n_in + 1) * n_out;
            let input = &layers[l];
            let mut out = vec![0.0; batch * n_out];
            let last = l + 1 == self.n_layers();
            for b in 0..batch {
                let xb = &input[b * n_in..(b + 1) * n_in];
                for j in 0..n_out {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let z = bias[j] + row.iter().zip(xb).map(|(a, c)| a * c).sum::<f64>();
                    out[b * n_out + j] = match (last, self.output) {
                        (true, OutputActivation::Linear) => z,
                        (true, OutputActivation::Tanh) => z.tanh(),
                        (false, _) => self.hidden.apply(z),
                    };
                }
            }
            layers.push(out);
        }
        Ok(ForwardCache { batch, layers })
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂output` and returns
    /// `∂L/∂input` (row-major `batch × input_dim`).
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        let batch = cache.batch;
        if d_out.len() != batch * self.output_dim() {
            return Err(Error::Dimension {
                expected: batch * self.output_dim(),
                got: d_out.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += (w[0] + 1) * w[1];
        }

        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let post = &cache.layers[l + 1];
            let last = l + 1 == self.n_layers();
            match (last, self.output) {
                (true, OutputActivation::Linear) => {}
                (true, OutputActivation::Tanh) => {
                    for (d, y) in delta.iter_mut().zip(post) {
                        *d *= 1.0 - y * y;
                    }
                }
                (false, _) => {
                    for (d, y) in delta.iter_mut().zip(post) {
                        *d *= self.hidden.slope(*y);
                    }
                }
            }
            let off = offsets[l];
            let input = &cache.layers[l];
            let (gw, gb) = grad[off..off + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            let w = &self.params[off..off + n_in * n_out];
            let mut d_in = vec![0.0; batch * n_in];
            for b in 0..batch {
                let xb = &input[b * n_in..(b + 1) * n_in];
                let db = &mut d_in[b * n_in..(b + 1) * n_in];
                for j in 0..n_out {
                    let dj = delta[b * n_out + j];
                    if dj == 0.0 {
                        continue;
                    }
                    gb[j] += dj;
                    let grow = &mut gw[j * n_in..(j + 1) * n_in];
                    let wrow = &w[j * n_in..(j + 1) * n_in];
                    for i in 0..n_in {
                        grow[i] += dj * xb[i];
                        db[i] += dj * wrow[i];
                    }
                }
            }
            delta = d_in;
        }
        Ok(delta)
    }

    /// `self ← ρ·self + (1−ρ)·source`.
    pub fn polyak_from(&mut self, source: &Mlp, rho: f64) {
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = rho * *t + (1.0 - rho) * s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Gradient of `loss_fn(outputs)` with respect to the parameters of `net`,
/// evaluated on a batch of `inputs`. `loss_fn` returns the loss and
/// `∂L/∂output` for each row.
pub fn grad<F>(net: &Mlp, inputs: &[Vec<f64>], loss_fn: F) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[Vec<f64>]) -> (f64, Vec<Vec<f64>>),
{
    let batch = inputs.len();
    let flat: Vec<f64> = inputs.iter().flatten().copied().collect();
    let cache = net.forward_batch(&flat, batch)?;
    let n_out = net.output_dim();
    let outputs: Vec<Vec<f64>> = cache.output().chunks(n_out).map(|c| c.to_vec()).collect();
    let (loss, d_out) = loss_fn(&outputs);
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let d_flat: Vec<f64> = d_out.iter().flatten().copied().collect();
    let mut g = vec![0.0; net.n_params()];
    net.backward(&cache, &d_flat, &mut g)?;
    Ok((loss, g))
}
