//! Small fully connected Q-network with ReLU hidden layers, trained with
//! Adam.

use rand::Rng;

/// Dense layer. Weights are stored input-major: `w[i * outputs + j]`
/// connects input `i` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Network with layer widths `sizes` (input first). Parameters are drawn
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|&s| s > 0),
            "need at least two nonzero widths"
        );
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut l = Layer::zeros(w[0], w[1]);
                l.w.iter_mut()
                    .chain(l.b.iter_mut())
                    .for_each(|p| *p = rng.gen_range(-bound..bound));
                l
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("nonempty").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    /// Activations of every layer for a row-major `batch x inputs` matrix,
    /// starting with the input itself. Hidden layers are rectified.
    fn activations(&self, x: &[f64], batch: usize) -> Vec<Vec<f64>> {
        assert_eq!(x.len(), batch * self.input_size(), "input shape");
        let mut acts = vec![x.to_vec()];
        for (k, l) in self.layers.iter().enumerate() {
            let input = acts.last().expect("nonempty");
            let mut out = Vec::with_capacity(batch * l.outputs);
            for row in input.chunks_exact(l.inputs) {
                let start = out.len();
                out.extend_from_slice(&l.b);
                let z = &mut out[start..];
                for (i, &xi) in row.iter().enumerate() {
                    if xi != 0.0 {
                        for (zj, wij) in z.iter_mut().zip(&l.w[i * l.outputs..(i + 1) * l.outputs])
                        {
                            *zj += xi * wij;
                        }
                    }
                }
                if k + 1 < self.layers.len() {
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Smallest `|z|` over the hidden pre-activations of a batch: how far
    /// the inputs sit from the nearest rectifier kink.
    pub fn kink_margin(&self, x: &[f64], batch: usize) -> f64 {
        let acts = self.activations(x, batch);
        let mut margin = f64::INFINITY;
        for (k, l) in self.layers.iter().enumerate().take(self.layers.len() - 1) {
            for (row, _) in acts[k].chunks_exact(l.inputs).zip(0..batch) {
                for j in 0..l.outputs {
                    let z = l.b[j]
                        + row
                            .iter()
                            .enumerate()
                            .map(|(i, xi)| xi * l.w[i * l.outputs + j])
                            .sum::<f64>();
                    margin = margin.min(z.abs());
                }
            }
        }
        margin
    }

    /// Outputs for a row-major `batch x inputs` matrix.
    pub fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        self.activations(x, batch).pop().expect("nonempty")
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradient `grad_out` at the outputs (`batch x outputs`).
    pub fn backward(&self, x: &[f64], batch: usize, grad_out: &[f64]) -> Mlp {
        assert_eq!(
            grad_out.len(),
            batch * self.output_size(),
            "output gradient shape"
        );
        let acts = self.activations(x, batch);
        let mut grads = self.zeros_like();
        let mut delta = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let g = &mut grads.layers[k];
            let input = &acts[k];
            let mut prev = if k > 0 {
                vec![0.0; batch * l.inputs]
            } else {
                Vec::new()
            };
            for n in 0..batch {
                let d = &delta[n * l.outputs..(n + 1) * l.outputs];
                let row = &input[n * l.inputs..(n + 1) * l.inputs];
                g.b.iter_mut().zip(d).for_each(|(gb, dj)| *gb += dj);
                for (i, &xi) in row.iter().enumerate() {
                    let w_row = &l.w[i * l.outputs..(i + 1) * l.outputs];
                    if xi != 0.0 {
                        for (gw, dj) in g.w[i * l.outputs..(i + 1) * l.outputs].iter_mut().zip(d) {
                            *gw += xi * dj;
                        }
                    }
                    // rectifier derivative: the input unit was active
                    if k > 0 && xi > 0.0 {
                        prev[n * l.inputs + i] = w_row.iter().zip(d).map(|(w, dj)| w * dj).sum();
                    }
                }
            }
            delta = prev;
        }
        grads
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let n = net.param_count();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grad: &Mlp) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in net
            .params_mut()
            .zip(grad.params())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}
