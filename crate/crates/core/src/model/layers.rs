//! Parameterized layers: plain convolutions, the per-sensor encoder stack,
//! gated recurrent state combinators and the shared residual + decoder.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::ops;
use crate::tensor::Tensor;

/// Convolution parameters plus geometry. Weights use uniform fan-in (He
/// style) initialization, biases start at zero.
pub struct ConvLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub pad: usize,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(
        rng: &mut impl Rng,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
    ) -> Self {
        let fan_in = (cin * kernel * kernel) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let weight: Vec<T> = (0..cout * cin * kernel * kernel)
            .map(|_| T::from_f64(rng.random_range(-bound..bound)))
            .collect();
        ConvLayer {
            weight: Tensor::param(&[cout, cin, kernel, kernel], weight).expect("weight shape"),
            bias: Tensor::param(&[cout], vec![T::zero(); cout]).expect("bias shape"),
            stride,
            pad: kernel / 2,
        }
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::conv2d(x, &self.weight, Some(&self.bias), self.stride, self.pad)
    }

    pub fn push_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        out.push((format!("{prefix}.w"), self.weight.clone()));
        out.push((format!("{prefix}.b"), self.bias.clone()));
    }
}

/// Sensor encoder: a head convolution to the base width followed by one
/// stride-2 downsampling convolution per scale; ReLU after every layer.
/// Features are collected at every scale for the state combinators.
pub struct Encoder<T: Scalar> {
    pub head: ConvLayer<T>,
    pub levels: Vec<ConvLayer<T>>,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(
        rng: &mut impl Rng,
        in_channels: usize,
        base_channels: usize,
        num_scales: usize,
        kernel: usize,
    ) -> Self {
        let head = ConvLayer::new(rng, in_channels, base_channels, kernel, 1);
        let levels = (1..=num_scales)
            .map(|level| {
                let cin = if level == 1 {
                    base_channels
                } else {
                    base_channels << (level - 2)
                };
                let cout = base_channels << (level - 1);
                ConvLayer::new(rng, cin, cout, kernel, 2)
            })
            .collect();
        Encoder { head, levels }
    }

    /// Per-scale features, outermost scale first.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut cur = ops::relu(&self.head.apply(x)?);
        let mut feats = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            cur = ops::relu(&level.apply(&cur)?);
            feats.push(cur.clone());
        }
        Ok(feats)
    }

    pub fn push_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        self.head.push_params(&format!("{prefix}.enc0"), out);
        for (i, level) in self.levels.iter().enumerate() {
            level.push_params(&format!("{prefix}.enc{}", i + 1), out);
        }
    }
}

/// Convolutional GRU state combinator. Gates are single convolutions over
/// the channel concatenation of state and feature, followed by a sigmoid;
/// the candidate is a convolution over (reset ⊙ state, feature) followed by
/// tanh; the new state is the gated convex combination.
pub struct ConvGru<T: Scalar> {
    pub z: ConvLayer<T>,
    pub r: ConvLayer<T>,
    pub phi: ConvLayer<T>,
}

impl<T: Scalar> ConvGru<T> {
    pub fn new(rng: &mut impl Rng, channels: usize, kernel: usize) -> Self {
        ConvGru {
            z: ConvLayer::new(rng, channels * 2, channels, kernel, 1),
            r: ConvLayer::new(rng, channels * 2, channels, kernel, 1),
            phi: ConvLayer::new(rng, channels * 2, channels, kernel, 1),
        }
    }

    pub fn update(&self, sigma: &Tensor<T>, feat: &Tensor<T>) -> Result<Tensor<T>> {
        if sigma.shape() != feat.shape() {
            return Err(Error::ShapeMismatch {
                context: "convgru_update",
                lhs: sigma.shape().to_vec(),
                rhs: feat.shape().to_vec(),
            });
        }
        let both = ops::concat_channels(sigma, feat)?;
        let z = ops::sigmoid(&self.z.apply(&both)?);
        let r = ops::sigmoid(&self.r.apply(&both)?);
        let gated = ops::concat_channels(&ops::mul(&r, sigma)?, feat)?;
        let cand = ops::tanh(&self.phi.apply(&gated)?);
        ops::add(
            &ops::mul(&ops::one_minus(&z), sigma)?,
            &ops::mul(&z, &cand)?,
        )
    }

    pub fn push_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        self.z.push_params(&format!("{prefix}.z"), out);
        self.r.push_params(&format!("{prefix}.r"), out);
        self.phi.push_params(&format!("{prefix}.phi"), out);
    }
}

/// Peephole-free convolutional LSTM used by the recurrent baselines.
pub struct ConvLstm<T: Scalar> {
    pub gate_i: ConvLayer<T>,
    pub gate_f: ConvLayer<T>,
    pub gate_g: ConvLayer<T>,
    pub gate_o: ConvLayer<T>,
}

impl<T: Scalar> ConvLstm<T> {
    pub fn new(rng: &mut impl Rng, channels: usize, kernel: usize) -> Self {
        ConvLstm {
            gate_i: ConvLayer::new(rng, channels * 2, channels, kernel, 1),
            gate_f: ConvLayer::new(rng, channels * 2, channels, kernel, 1),
            gate_g: ConvLayer::new(rng, channels * 2, channels, kernel, 1),
            gate_o: ConvLayer::new(rng, channels * 2, channels, kernel, 1),
        }
    }

    /// (h, c) -> (h', c') given the level feature x.
    pub fn update(
        &self,
        h: &Tensor<T>,
        c: &Tensor<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        let hx = ops::concat_channels(h, x)?;
        let i = ops::sigmoid(&self.gate_i.apply(&hx)?);
        let f = ops::sigmoid(&self.gate_f.apply(&hx)?);
        let g = ops::tanh(&self.gate_g.apply(&hx)?);
        let o = ops::sigmoid(&self.gate_o.apply(&hx)?);
        let c_new = ops::add(&ops::mul(&f, c)?, &ops::mul(&i, &g)?)?;
        let h_new = ops::mul(&o, &ops::tanh(&c_new))?;
        Ok((h_new, c_new))
    }

    pub fn push_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        self.gate_i.push_params(&format!("{prefix}.i"), out);
        self.gate_f.push_params(&format!("{prefix}.f"), out);
        self.gate_g.push_params(&format!("{prefix}.g"), out);
        self.gate_o.push_params(&format!("{prefix}.o"), out);
    }
}

/// Shared task decoder: one residual block on the deepest state, then per
/// scale a skip summation, bilinear 2x upsampling and a convolution with
/// ReLU, finished by a 1x1 prediction head. The head output is raw; callers
/// clamp to [0, 1] at evaluation time only.
pub struct Decoder<T: Scalar> {
    pub res1: ConvLayer<T>,
    pub res2: ConvLayer<T>,
    /// Deepest level first.
    pub levels: Vec<ConvLayer<T>>,
    pub head: ConvLayer<T>,
}

impl<T: Scalar> Decoder<T> {
    pub fn new(
        rng: &mut impl Rng,
        base_channels: usize,
        num_scales: usize,
        kernel: usize,
    ) -> Self {
        let deepest = base_channels << (num_scales - 1);
        let res1 = ConvLayer::new(rng, deepest, deepest, 3, 1);
        let res2 = ConvLayer::new(rng, deepest, deepest, 3, 1);
        let levels = (1..=num_scales)
            .rev()
            .map(|level| {
                let cin = base_channels << (level - 1);
                let cout = if level == 1 {
                    base_channels
                } else {
                    base_channels << (level - 2)
                };
                ConvLayer::new(rng, cin, cout, kernel, 1)
            })
            .collect();
        let head = ConvLayer::new(rng, base_channels, 1, 1, 1);
        Decoder {
            res1,
            res2,
            levels,
            head,
        }
    }

    /// Decode per-scale states (outermost scale first) into a 1-channel map
    /// at the input resolution.
    pub fn forward(&self, states: &[Tensor<T>]) -> Result<Tensor<T>> {
        let num_scales = states.len();
        if num_scales != self.levels.len() {
            return Err(Error::invalid_argument(format!(
                "decoder built for {} scales, got {num_scales} states",
                self.levels.len()
            )));
        }
        let deepest = &states[num_scales - 1];
        let mid = ops::relu(&self.res1.apply(deepest)?);
        let mut x = ops::relu(&ops::add(deepest, &self.res2.apply(&mid)?)?);
        for (i, level) in self.levels.iter().enumerate() {
            let skip = &states[num_scales - 1 - i];
            x = ops::add(&x, skip)?;
            x = ops::relu(&level.apply(&ops::bilinear_upsample2x(&x)?)?);
        }
        self.head.apply(&x)
    }

    pub fn push_params(&self, out: &mut Vec<(String, Tensor<T>)>) {
        self.res1.push_params("res.1", out);
        self.res2.push_params("res.2", out);
        let num = self.levels.len();
        for (i, level) in self.levels.iter().enumerate() {
            level.push_params(&format!("dec{}", num - i), out);
        }
        self.head.push_params("head", out);
    }
}
