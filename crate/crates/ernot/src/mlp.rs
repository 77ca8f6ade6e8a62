//! Fixed-architecture multilayer perceptron for the scalar potential:
//! `depth` hidden layers of equal `width` with SiLU activations and a
//! linear scalar output. Forward evaluation and exact reverse-mode
//! parameter gradients are written out by hand for this one shape, keeping
//! the crate free of autodiff machinery.
//!
//! Parameters live in one flat vector. For each layer in order (hidden
//! layers first, output layer last) the layout is the weight matrix in
//! row-major `out×in` order followed by the `out` biases.

use alloc::vec::Vec;

use crate::error::Error;
use crate::num;
use crate::rng::{self};

/// SiLU(u) = u·σ(u).
#[inline]
fn silu(u: f64) -> f64 {
    u * num::sigmoid(u)
}

/// SiLU′(u) = σ(u)·(1 + u·(1 − σ(u))).
#[inline]
fn silu_prime(u: f64) -> f64 {
    let s = num::sigmoid(u);
    s * (1.0 + u * (1.0 - s))
}

/// Standard deviation of the small-initialized scalar output layer.
const OUTPUT_INIT_STD_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    width: usize,
    depth: usize,
    params: Vec<f64>,
}

/// Per-batch activations saved by the traced forward pass so the backward
/// pass can reuse them.
pub struct ForwardTrace {
    batch: usize,
    /// Copy of the network input, `batch × input_dim`.
    inputs: Vec<f64>,
    /// Pre-activations uₗ per hidden layer, each `batch × width`.
    pre: Vec<Vec<f64>>,
    /// Activations hₗ = SiLU(uₗ) per hidden layer, each `batch × width`.
    act: Vec<Vec<f64>>,
}

impl Mlp {
    /// Shapes of the weight matrices as (out, in) pairs, hidden layers then
    /// the scalar output layer.
    fn shapes(input_dim: usize, width: usize, depth: usize) -> Vec<(usize, usize)> {
        let mut s = Vec::with_capacity(depth + 1);
        let mut fan_in = input_dim;
        for _ in 0..depth {
            s.push((width, fan_in));
            fan_in = width;
        }
        s.push((1, fan_in));
        s
    }

    /// Total parameter count for an architecture.
    pub fn param_count(input_dim: usize, width: usize, depth: usize) -> usize {
        Self::shapes(input_dim, width, depth)
            .into_iter()
            .map(|(out, inp)| out * inp + out)
            .sum()
    }

    /// Kaiming-normal hidden layers (std √(2/fan_in)), zero biases, and a
    /// small-initialized output layer (std 1e-4·√(1/fan_in)). Deterministic
    /// per seed.
    pub fn init(input_dim: usize, width: usize, depth: usize, seed: u64) -> Result<Self, Error> {
        if input_dim == 0 || width == 0 || depth == 0 {
            return Err(Error::NonPositive {
                what: "network dimensions",
            });
        }
        let mut r = rng::seeded(seed, 0);
        let shapes = Self::shapes(input_dim, width, depth);
        let last = shapes.len() - 1;
        let mut params = Vec::with_capacity(Self::param_count(input_dim, width, depth));
        for (l, (out, inp)) in shapes.iter().enumerate() {
            let std = if l == last {
                OUTPUT_INIT_STD_SCALE * num::sqrt(1.0 / *inp as f64)
            } else {
                num::sqrt(2.0 / *inp as f64)
            };
            for _ in 0..out * inp {
                params.push(std * rng::standard_normal(&mut r));
            }
            for _ in 0..*out {
                params.push(0.0);
            }
        }
        Ok(Mlp {
            input_dim,
            width,
            depth,
            params,
        })
    }

    /// Rebuild a network from a flat parameter vector (checkpoint loading).
    pub fn from_params(
        input_dim: usize,
        width: usize,
        depth: usize,
        params: Vec<f64>,
    ) -> Result<Self, Error> {
        if input_dim == 0 || width == 0 || depth == 0 {
            return Err(Error::NonPositive {
                what: "network dimensions",
            });
        }
        let expected = Self::param_count(input_dim, width, depth);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
            });
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite {
                context: "network parameters",
            });
        }
        Ok(Mlp {
            input_dim,
            width,
            depth,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        Self::shapes(self.input_dim, self.width, self.depth)
    }

    /// Offset of a layer's weights in the flat vector; biases follow the
    /// weights of the same layer.
    fn layer_offset(&self, layer: usize) -> usize {
        self.layer_shapes()
            .iter()
            .take(layer)
            .map(|(out, inp)| out * inp + out)
            .sum()
    }

    /// Evaluate the batch and keep all activations for a later backward
    /// pass. `xs` holds `batch` examples of length `input_dim`, row-major.
    pub fn forward_trace(&self, xs: &[f64]) -> Result<(Vec<f64>, ForwardTrace), Error> {
        if xs.len() % self.input_dim != 0 || xs.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "network input batch",
            });
        }
        let batch = xs.len() / self.input_dim;
        let w = self.width;
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.depth);
        let mut act: Vec<Vec<f64>> = Vec::with_capacity(self.depth);
        let mut h_in: &[f64] = xs;
        let mut in_dim = self.input_dim;
        for layer in 0..self.depth {
            let off = self.layer_offset(layer);
            let weights = &self.params[off..off + w * in_dim];
            let biases = &self.params[off + w * in_dim..off + w * in_dim + w];
            let mut u = alloc::vec![0.0; batch * w];
            // Row-outer loop keeps each weight row hot across the batch.
            for r in 0..w {
                let wrow = &weights[r * in_dim..(r + 1) * in_dim];
                let b = biases[r];
                for ex in 0..batch {
                    u[ex * w + r] = num::dot(wrow, &h_in[ex * in_dim..(ex + 1) * in_dim]) + b;
                }
            }
            let mut h = alloc::vec![0.0; batch * w];
            for (hv, uv) in h.iter_mut().zip(&u) {
                *hv = silu(*uv);
            }
            pre.push(u);
            act.push(h);
            h_in = &act[layer];
            in_dim = w;
        }
        let off = self.layer_offset(self.depth);
        let wout = &self.params[off..off + in_dim];
        let bout = self.params[off + in_dim];
        let mut out = Vec::with_capacity(batch);
        for ex in 0..batch {
            out.push(num::dot(wout, &h_in[ex * in_dim..(ex + 1) * in_dim]) + bout);
        }
        let trace = ForwardTrace {
            batch,
            inputs: xs.to_vec(),
            pre,
            act,
        };
        Ok((out, trace))
    }

    /// Evaluate a batch of inputs (row-major, `batch × input_dim`).
    pub fn forward_batch(&self, xs: &[f64]) -> Result<Vec<f64>, Error> {
        Ok(self.forward_trace(xs)?.0)
    }

    /// Evaluate one input.
    pub fn forward_one(&self, x: &[f64]) -> Result<f64, Error> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
            });
        }
        Ok(self.forward_batch(x)?[0])
    }

    /// Exact gradient of Σ_b cotangent_b · forward(x_b) with respect to
    /// every parameter, written into `grad` (overwritten, length
    /// `param_count`). Reuses the activations recorded by `forward_trace`.
    pub fn backward_from_trace(
        &self,
        trace: &ForwardTrace,
        cotangents: &[f64],
        grad: &mut [f64],
    ) -> Result<(), Error> {
        let batch = trace.batch;
        if cotangents.len() != batch {
            return Err(Error::DimensionMismatch {
                context: "cotangent batch",
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                context: "gradient buffer",
            });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let w = self.width;

        // Output layer: out_b = ⟨w_out, h_last[b]⟩ + b_out.
        let h_last = &trace.act[self.depth - 1];
        let off_out = self.layer_offset(self.depth);
        {
            let (gw, gb) = grad[off_out..off_out + w + 1].split_at_mut(w);
            for ex in 0..batch {
                let s = cotangents[ex];
                if s != 0.0 {
                    num::axpy(s, &h_last[ex * w..(ex + 1) * w], gw);
                    gb[0] += s;
                }
            }
        }

        // d(loss)/d(h_last[b]) = cotangent_b · w_out.
        let wout = &self.params[off_out..off_out + w];
        let mut dh = alloc::vec![0.0; batch * w];
        for ex in 0..batch {
            let s = cotangents[ex];
            if s != 0.0 {
                num::axpy(s, wout, &mut dh[ex * w..(ex + 1) * w]);
            }
        }

        // Hidden layers, last to first.
        for layer in (0..self.depth).rev() {
            let u = &trace.pre[layer];
            // du = dh ⊙ SiLU′(u).
            let mut du = alloc::vec![0.0; batch * w];
            for ((d, dh_v), u_v) in du.iter_mut().zip(&dh).zip(u) {
                *d = dh_v * silu_prime(*u_v);
            }
            let (h_in, in_dim): (&[f64], usize) = if layer == 0 {
                (&trace.inputs, self.input_dim)
            } else {
                (&trace.act[layer - 1], w)
            };
            let off = self.layer_offset(layer);
            {
                let (gw, gb) =
                    grad[off..off + w * in_dim + w].split_at_mut(w * in_dim);
                // grad_W[r] += Σ_b du[b][r]·h_in[b]; grad_b[r] += Σ_b du[b][r].
                for ex in 0..batch {
                    let du_row = &du[ex * w..(ex + 1) * w];
                    let h_row = &h_in[ex * in_dim..(ex + 1) * in_dim];
                    for r in 0..w {
                        let s = du_row[r];
                        if s != 0.0 {
                            num::axpy(s, h_row, &mut gw[r * in_dim..(r + 1) * in_dim]);
                            gb[r] += s;
                        }
                    }
                }
            }
            if layer > 0 {
                // dh_prev[b] = Wᵀ·du[b]; row-outer loop for weight-row reuse.
                let weights = &self.params[off..off + w * in_dim];
                let mut dh_prev = alloc::vec![0.0; batch * in_dim];
                for r in 0..w {
                    let wrow = &weights[r * in_dim..(r + 1) * in_dim];
                    for ex in 0..batch {
                        let s = du[ex * w + r];
                        if s != 0.0 {
                            num::axpy(s, wrow, &mut dh_prev[ex * in_dim..(ex + 1) * in_dim]);
                        }
                    }
                }
                dh = dh_prev;
            }
        }
        Ok(())
    }

    /// Forward + backward in one call for callers that don't need to look
    /// at the values before choosing cotangents.
    pub fn backward_batch(
        &self,
        xs: &[f64],
        cotangents: &[f64],
        grad: &mut [f64],
    ) -> Result<(), Error> {
        let (_, trace) = self.forward_trace(xs)?;
        self.backward_from_trace(&trace, cotangents, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny_net(seed: u64) -> Mlp {
        let mut net = Mlp::init(3, 4, 2, seed).unwrap();
        // Scale parameters up so gradients are not dominated by the tiny
        // output initialization.
        let mut r = rng::seeded(seed, 9);
        for p in net.params_mut() {
            *p = 0.7 * rng::standard_normal(&mut r);
        }
        net
    }

    #[test]
    fn layer_shapes_match_the_fixed_architecture() {
        let net = Mlp::init(256, 256, 2, 0).unwrap();
        assert_eq!(net.layer_shapes(), vec![(256, 256), (256, 256), (1, 256)]);
        assert_eq!(
            net.params().len(),
            (256 * 256 + 256) + (256 * 256 + 256) + (256 + 1)
        );
        let shallow = Mlp::init(5, 8, 1, 0).unwrap();
        assert_eq!(shallow.layer_shapes(), vec![(8, 5), (1, 8)]);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Mlp::init(16, 32, 2, 7).unwrap();
        let b = Mlp::init(16, 32, 2, 7).unwrap();
        assert_eq!(a.params(), b.params());
        let c = Mlp::init(16, 32, 2, 8).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn hidden_init_std_matches_kaiming() {
        let net = Mlp::init(256, 256, 2, 3).unwrap();
        // Second hidden layer weights: fan_in 256.
        let off = 256 * 256 + 256;
        let ws = &net.params()[off..off + 256 * 256];
        let mean: f64 = ws.iter().sum::<f64>() / ws.len() as f64;
        let var: f64 = ws.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>()
            / ws.len() as f64;
        let want = num::sqrt(2.0 / 256.0);
        assert!(
            (num::sqrt(var) - want).abs() < 0.1 * want,
            "std {} vs {}",
            num::sqrt(var),
            want
        );
        // Output layer is small-initialized and biases are zero.
        let out_off = 2 * (256 * 256 + 256);
        let wout = &net.params()[out_off..out_off + 256];
        assert!(wout.iter().all(|w| w.abs() < 1e-3));
        assert_eq!(net.params()[out_off + 256], 0.0);
        let b1 = &net.params()[256 * 256..256 * 256 + 256];
        assert!(b1.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn zero_params_give_zero_output() {
        let mut net = Mlp::init(4, 6, 2, 1).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(net.forward_one(&[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn single_unit_hand_computation() {
        // One hidden unit, all weights 1, biases 0, depth 1:
        // out = 1·SiLU(x). At x = 0 the output is 0.
        let mut net = Mlp::init(1, 1, 1, 0).unwrap();
        for p in net.params_mut() {
            *p = 1.0;
        }
        // layout: [w_h (1), b_h (1), w_out (1), b_out (1)]
        net.params_mut()[1] = 0.0;
        net.params_mut()[3] = 0.0;
        assert_eq!(net.forward_one(&[0.0]).unwrap(), 0.0);
        let x = 1.3;
        let want = silu(x);
        assert!((net.forward_one(&[x]).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn batch_forward_agrees_with_single_forward() {
        let net = tiny_net(5);
        let xs = [0.3, -1.0, 0.7, 2.0, 0.1, -0.4, -0.9, 0.8, 1.5];
        let batch = net.forward_batch(&xs).unwrap();
        for (ex, chunk) in xs.chunks(3).enumerate() {
            let single = net.forward_one(chunk).unwrap();
            assert_eq!(batch[ex], single);
        }
    }

    #[test]
    fn output_bias_gradient_is_the_cotangent_sum() {
        let net = tiny_net(6);
        let xs = [0.2, 0.4, -0.6, 1.0, -1.0, 0.5];
        let cots = [2.0, -0.5];
        let mut grad = vec![0.0; net.params().len()];
        net.backward_batch(&xs, &cots, &mut grad).unwrap();
        let bias_out = grad[net.params().len() - 1];
        assert!((bias_out - 1.5).abs() < 1e-15);
        // Zero cotangents → zero gradient.
        net.backward_batch(&xs, &[0.0, 0.0], &mut grad).unwrap();
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        // Independent oracle: perturb every parameter by ±h and difference
        // the traced objective Σ_b cot_b·forward(x_b).
        let h = 1e-5;
        for seed in 0..20u64 {
            let mut net = tiny_net(seed);
            let mut r = rng::seeded(seed, 11);
            let batch = 4;
            let xs: Vec<f64> = (0..batch * 3).map(|_| rng::standard_normal(&mut r)).collect();
            let cots: Vec<f64> = (0..batch).map(|_| rng::standard_normal(&mut r)).collect();
            let mut grad = vec![0.0; net.params().len()];
            net.backward_batch(&xs, &cots, &mut grad).unwrap();
            let objective = |net: &Mlp| -> f64 {
                net.forward_batch(&xs)
                    .unwrap()
                    .iter()
                    .zip(&cots)
                    .map(|(o, c)| o * c)
                    .sum()
            };
            for k in 0..net.params().len() {
                let orig = net.params()[k];
                net.params_mut()[k] = orig + h;
                let plus = objective(&net);
                net.params_mut()[k] = orig - h;
                let minus = objective(&net);
                net.params_mut()[k] = orig;
                let fd = (plus - minus) / (2.0 * h);
                let denom = grad[k].abs().max(1.0);
                assert!(
                    (fd - grad[k]).abs() / denom <= 1e-4,
                    "seed {seed} param {k}: fd {fd} vs grad {}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let net = tiny_net(9);
        assert!(matches!(
            net.forward_one(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut grad = vec![0.0; net.params().len()];
        assert!(matches!(
            net.backward_batch(&[1.0, 2.0, 3.0], &[1.0, 1.0], &mut grad),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Mlp::from_params(3, 4, 2, vec![0.0; 5]).is_err());
        assert!(Mlp::from_params(3, 4, 2, vec![f64::NAN; Mlp::param_count(3, 4, 2)]).is_err());
        let ok = Mlp::from_params(3, 4, 2, vec![0.1; Mlp::param_count(3, 4, 2)]);
        assert!(ok.is_ok());
    }

    #[test]
    fn forward_stays_finite_for_bounded_params() {
        let mut net = Mlp::init(8, 16, 2, 2).unwrap();
        let mut r = rng::seeded(2, 13);
        for p in net.params_mut() {
            *p = 10.0 * (2.0 * rng::uniform(&mut r, 0.0, 1.0) - 1.0);
        }
        for _ in 0..50 {
            let x: Vec<f64> = (0..8).map(|_| rng::standard_normal(&mut r)).collect();
            assert!(net.forward_one(&x).unwrap().is_finite());
        }
    }
}
