//! The recurrent asynchronous multimodal depth network and its baselines.
//!
//! The network keeps one recurrent state tensor per scale. Each incoming
//! measurement is encoded by its sensor's encoder and fused into every
//! scale's state by that sensor's ConvGRU; the decoder can turn the state
//! into a depth prediction at any time. Predictions depend on the state
//! only, so serializing the state and resuming replays bitwise identically.

pub mod baseline;
pub mod layers;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;
use crate::tensor::{ops, Tensor};
use layers::{ConvGru, Decoder, Encoder};

/// Which sensor produced a measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorKind {
    Events,
    Frame,
}

impl SensorKind {
    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Events => "events",
            SensorKind::Frame => "frame",
        }
    }
}

/// Architecture hyperparameters. Channel width doubles per scale.
#[derive(Clone, Copy, Debug)]
pub struct ModelConfig {
    pub num_scales: usize,
    pub base_channels: usize,
    pub event_bins: usize,
    pub frame_channels: usize,
    pub enc_kernel: usize,
    pub gru_kernel: usize,
    pub dec_kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_scales: 3,
            base_channels: 16,
            event_bins: 5,
            frame_channels: 1,
            enc_kernel: 5,
            gru_kernel: 3,
            dec_kernel: 5,
        }
    }
}

impl ModelConfig {
    /// Channel count of the feature/state at a 1-based scale.
    pub fn channels_at(&self, scale: usize) -> usize {
        debug_assert!(scale >= 1 && scale <= self.num_scales);
        self.base_channels << (scale - 1)
    }

    /// Spatial dims must divide this for the encoder/decoder to be symmetric.
    pub fn spatial_divisor(&self) -> usize {
        1 << self.num_scales
    }

    pub fn check_spatial(&self, h: usize, w: usize) -> Result<()> {
        let d = self.spatial_divisor();
        if h % d != 0 || w % d != 0 {
            return Err(Error::invalid_argument(format!(
                "spatial dims {h}x{w} not divisible by {d}"
            )));
        }
        Ok(())
    }
}

/// One time-stamped sensor input, already converted to a network tensor
/// ([N, B, H, W] voxels or [N, 1, H, W] frames).
#[derive(Clone)]
pub struct Measurement<T: Scalar = f32> {
    pub t_us: u64,
    pub sensor: SensorKind,
    pub data: Tensor<T>,
}

/// What triggered a prediction: a voxel-grid step or a frame step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trigger {
    Voxel,
    Frame,
}

#[derive(Clone)]
pub struct Prediction<T: Scalar = f32> {
    pub t_us: u64,
    pub trigger: Trigger,
    pub output: Tensor<T>,
}

/// Per-scale recurrent state. The sigma tensors are the only carrier of
/// history; the timestamp and sensor id are bookkeeping.
#[derive(Clone)]
pub struct FusionState<T: Scalar = f32> {
    pub sigmas: Vec<Tensor<T>>,
    pub t_us: u64,
    pub last_sensor: Option<SensorKind>,
}

impl<T: Scalar> FusionState<T> {
    /// Cut the autodiff history, keeping values.
    pub fn detach(&self) -> FusionState<T> {
        FusionState {
            sigmas: self.sigmas.iter().map(|s| s.detach()).collect(),
            t_us: self.t_us,
            last_sensor: self.last_sensor,
        }
    }
}

impl FusionState<f32> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries: Vec<(String, Tensor<f32>)> = self
            .sigmas
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("sigma{i}"), s.detach()))
            .collect();
        // Timestamp encoded as four exact u16 halves plus the sensor id.
        let meta = [
            (self.t_us & 0xffff) as f32,
            ((self.t_us >> 16) & 0xffff) as f32,
            ((self.t_us >> 32) & 0xffff) as f32,
            ((self.t_us >> 48) & 0xffff) as f32,
            match self.last_sensor {
                None => 0.0,
                Some(SensorKind::Events) => 1.0,
                Some(SensorKind::Frame) => 2.0,
            },
        ];
        entries.push(("meta".to_string(), Tensor::from_vec(&[5], meta.to_vec())?));
        io::write_checkpoint(path, &entries)
    }

    pub fn load(path: &Path) -> Result<FusionState<f32>> {
        let entries = io::read_checkpoint(path)?;
        let mut sigmas = Vec::new();
        let mut meta = None;
        for (name, tensor) in entries {
            if name == "meta" {
                meta = Some(tensor.to_vec());
            } else if let Some(idx) = name.strip_prefix("sigma") {
                let idx: usize = idx.parse().map_err(|_| {
                    Error::format(path.display().to_string(), format!("bad entry {name}"))
                })?;
                if sigmas.len() <= idx {
                    sigmas.resize(idx + 1, Tensor::zeros(&[1]));
                }
                sigmas[idx] = tensor;
            }
        }
        let meta = meta
            .ok_or_else(|| Error::format(path.display().to_string(), "missing meta entry"))?;
        let t_us = (meta[0] as u64)
            | ((meta[1] as u64) << 16)
            | ((meta[2] as u64) << 32)
            | ((meta[3] as u64) << 48);
        let last_sensor = match meta[4] as i64 {
            0 => None,
            1 => Some(SensorKind::Events),
            2 => Some(SensorKind::Frame),
            other => {
                return Err(Error::format(
                    path.display().to_string(),
                    format!("bad sensor id {other}"),
                ))
            }
        };
        Ok(FusionState {
            sigmas,
            t_us,
            last_sensor,
        })
    }
}

/// The full network: per-sensor encoders, per-sensor per-scale ConvGRUs and
/// the shared residual/decoder stack.
pub struct RamNet<T: Scalar = f32> {
    pub cfg: ModelConfig,
    event_encoder: Encoder<T>,
    frame_encoder: Encoder<T>,
    event_grus: Vec<ConvGru<T>>,
    frame_grus: Vec<ConvGru<T>>,
    pub decoder: Decoder<T>,
}

impl<T: Scalar> RamNet<T> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let event_encoder = Encoder::new(
            &mut rng,
            cfg.event_bins,
            cfg.base_channels,
            cfg.num_scales,
            cfg.enc_kernel,
        );
        let frame_encoder = Encoder::new(
            &mut rng,
            cfg.frame_channels,
            cfg.base_channels,
            cfg.num_scales,
            cfg.enc_kernel,
        );
        let event_grus = (1..=cfg.num_scales)
            .map(|s| ConvGru::new(&mut rng, cfg.channels_at(s), cfg.gru_kernel))
            .collect();
        let frame_grus = (1..=cfg.num_scales)
            .map(|s| ConvGru::new(&mut rng, cfg.channels_at(s), cfg.gru_kernel))
            .collect();
        let decoder = Decoder::new(&mut rng, cfg.base_channels, cfg.num_scales, cfg.dec_kernel);
        RamNet {
            cfg,
            event_encoder,
            frame_encoder,
            event_grus,
            frame_grus,
            decoder,
        }
    }

    pub fn encoder(&self, sensor: SensorKind) -> &Encoder<T> {
        match sensor {
            SensorKind::Events => &self.event_encoder,
            SensorKind::Frame => &self.frame_encoder,
        }
    }

    /// All-zero state for a batch at the given full resolution.
    pub fn zero_state(&self, batch: usize, h: usize, w: usize) -> Result<FusionState<T>> {
        self.cfg.check_spatial(h, w)?;
        let sigmas = (1..=self.cfg.num_scales)
            .map(|s| {
                Tensor::zeros(&[
                    batch,
                    self.cfg.channels_at(s),
                    h >> s,
                    w >> s,
                ])
            })
            .collect();
        Ok(FusionState {
            sigmas,
            t_us: 0,
            last_sensor: None,
        })
    }

    /// Fuse one measurement into the state.
    pub fn step(&self, state: &FusionState<T>, m: &Measurement<T>) -> Result<FusionState<T>> {
        if m.t_us < state.t_us {
            return Err(Error::invalid_data(format!(
                "time regression: measurement at {} after state at {}",
                m.t_us, state.t_us
            )));
        }
        let (_, _, h, w) = m.data.dim4()?;
        self.cfg.check_spatial(h, w)?;
        let feats = self.encoder(m.sensor).forward(&m.data)?;
        let grus = match m.sensor {
            SensorKind::Events => &self.event_grus,
            SensorKind::Frame => &self.frame_grus,
        };
        let sigmas = state
            .sigmas
            .iter()
            .zip(feats.iter())
            .zip(grus.iter())
            .map(|((sigma, feat), gru)| gru.update(sigma, feat))
            .collect::<Result<Vec<_>>>()?;
        Ok(FusionState {
            sigmas,
            t_us: m.t_us,
            last_sensor: Some(m.sensor),
        })
    }

    /// Decode the state into a raw normalized log-depth prediction. Pure in
    /// the state: the same state always decodes to the same map.
    pub fn decode(&self, state: &FusionState<T>) -> Result<Tensor<T>> {
        self.decoder.forward(&state.sigmas)
    }

    /// Run a time-ordered measurement sequence from a zero state, decoding
    /// after every measurement.
    pub fn forward_sequence(
        &self,
        measurements: &[Measurement<T>],
    ) -> Result<Vec<Prediction<T>>> {
        let first = measurements
            .first()
            .ok_or_else(|| Error::invalid_argument("empty measurement sequence"))?;
        let (batch, _, h, w) = first.data.dim4()?;
        let mut state = self.zero_state(batch, h, w)?;
        let mut preds = Vec::with_capacity(measurements.len());
        for m in measurements {
            state = self.step(&state, m)?;
            preds.push(Prediction {
                t_us: m.t_us,
                trigger: match m.sensor {
                    SensorKind::Events => Trigger::Voxel,
                    SensorKind::Frame => Trigger::Frame,
                },
                output: self.decode(&state)?,
            });
        }
        Ok(preds)
    }

    /// Stable-ordered parameter list; names follow the checkpoint scheme.
    pub fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.event_encoder.push_params("events", &mut out);
        self.frame_encoder.push_params("frame", &mut out);
        for (i, gru) in self.event_grus.iter().enumerate() {
            gru.push_params(&format!("events.gru{}", i + 1), &mut out);
        }
        for (i, gru) in self.frame_grus.iter().enumerate() {
            gru.push_params(&format!("frame.gru{}", i + 1), &mut out);
        }
        self.decoder.push_params(&mut out);
        out
    }

    pub fn params(&self) -> Vec<Tensor<T>> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    pub fn zero_grads(&self) {
        for p in self.params() {
            p.zero_grad();
        }
    }
}

/// Copy checkpoint values into a model's parameters by name.
pub fn load_named_params<T: Scalar>(
    params: &[(String, Tensor<T>)],
    entries: &[(String, Tensor<T>)],
) -> Result<()> {
    let by_name: HashMap<&str, &Tensor<T>> =
        entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
    for (name, param) in params {
        let src = by_name
            .get(name.as_str())
            .ok_or_else(|| Error::invalid_data(format!("checkpoint missing parameter {name}")))?;
        if src.shape() != param.shape() {
            return Err(Error::ShapeMismatch {
                context: "load_named_params",
                lhs: param.shape().to_vec(),
                rhs: src.shape().to_vec(),
            });
        }
        param.data_mut().copy_from_slice(&src.data());
    }
    Ok(())
}

/// Clamp a raw prediction to [0, 1] as plain data (evaluation only).
pub fn clamp01_data<T: Scalar>(pred: &Tensor<T>) -> Vec<T> {
    pred.data()
        .iter()
        .map(|&v| {
            if v < T::zero() {
                T::zero()
            } else if v > T::one() {
                T::one()
            } else {
                v
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            num_scales: 2,
            base_channels: 4,
            event_bins: 5,
            frame_channels: 1,
            ..Default::default()
        }
    }

    fn voxel_input(seed: u64, h: usize, w: usize) -> Tensor<f32> {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..5 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(&[1, 5, h, w], data).unwrap()
    }

    fn frame_input(seed: u64, h: usize, w: usize) -> Tensor<f32> {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect();
        Tensor::from_vec(&[1, 1, h, w], data).unwrap()
    }

    #[test]
    fn encoder_feature_shapes() {
        let cfg = ModelConfig::default();
        let net = RamNet::<f32>::new(cfg, 1);
        let x = voxel_input(0, 64, 64);
        let feats = net.encoder(SensorKind::Events).forward(&x).unwrap();
        assert_eq!(feats.len(), 3);
        assert_eq!(feats[0].shape(), &[1, 16, 32, 32]);
        assert_eq!(feats[1].shape(), &[1, 32, 16, 16]);
        assert_eq!(feats[2].shape(), &[1, 64, 8, 8]);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_features() {
        let net = RamNet::<f32>::new(tiny_cfg(), 2);
        let x = Tensor::zeros(&[1, 5, 16, 16]);
        let feats = net.encoder(SensorKind::Events).forward(&x).unwrap();
        for f in feats {
            assert!(f.to_vec().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sensor_parameters_are_independent() {
        let net = RamNet::<f32>::new(tiny_cfg(), 3);
        let x = voxel_input(1, 16, 16);
        let before = net.encoder(SensorKind::Events).forward(&x).unwrap();
        // scramble the frame encoder weights
        for (name, p) in net.named_params() {
            if name.starts_with("frame.enc") && name.ends_with(".w") {
                for v in p.data_mut().iter_mut() {
                    *v = -*v + 0.123;
                }
            }
        }
        let after = net.encoder(SensorKind::Events).forward(&x).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert_eq!(a.to_vec(), b.to_vec());
        }
    }

    #[test]
    fn indivisible_dims_rejected() {
        let net = RamNet::<f32>::new(tiny_cfg(), 4);
        assert!(net.zero_state(1, 18, 16).is_err());
        let m = Measurement {
            t_us: 0,
            sensor: SensorKind::Events,
            data: Tensor::zeros(&[1, 5, 18, 16]),
        };
        let st = net.zero_state(1, 16, 16).unwrap();
        assert!(net.step(&st, &m).is_err());
    }

    #[test]
    fn gru_gate_identities() {
        // Force z = 0 via a large negative z bias: state unchanged.
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gru = ConvGru::<f32>::new(&mut rng, 4, 3);
        let sigma = Tensor::from_vec(&[1, 4, 6, 6], (0..144).map(|i| (i as f32 * 0.013).sin()).collect()).unwrap();
        let feat = Tensor::from_vec(&[1, 4, 6, 6], (0..144).map(|i| (i as f32 * 0.031).cos()).collect()).unwrap();
        for v in gru.z.bias.data_mut().iter_mut() {
            *v = -50.0;
        }
        let same = gru.update(&sigma, &feat).unwrap();
        for (a, b) in same.to_vec().iter().zip(sigma.to_vec()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        // Force z = 1: new state is the tanh candidate, bounded by 1.
        for v in gru.z.bias.data_mut().iter_mut() {
            *v = 50.0;
        }
        let cand = gru.update(&sigma, &feat).unwrap();
        assert!(cand.to_vec().iter().all(|&v| v.abs() <= 1.0));
    }

    #[test]
    fn gru_matches_scalar_reference() {
        // 1x1 spatial, 1 channel: the convs reduce to scalar affine maps.
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gru = ConvGru::<f64>::new(&mut rng, 1, 1);
        let sigma0 = 0.37;
        let feats = [0.9, -0.4, 0.1];
        // pull out the scalar weights: gate convs are 1x1 on [sigma, s]
        let zw = gru.z.weight.to_vec();
        let zb = gru.z.bias.to_vec()[0];
        let rw = gru.r.weight.to_vec();
        let rb = gru.r.bias.to_vec()[0];
        let pw = gru.phi.weight.to_vec();
        let pb = gru.phi.bias.to_vec()[0];
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut want = sigma0;
        for &s in &feats {
            let z = sigmoid(zw[0] * want + zw[1] * s + zb);
            let r = sigmoid(rw[0] * want + rw[1] * s + rb);
            let cand = (pw[0] * (r * want) + pw[1] * s + pb).tanh();
            want = (1.0 - z) * want + z * cand;
        }
        let mut sigma = Tensor::from_vec(&[1, 1, 1, 1], vec![sigma0]).unwrap();
        for &s in &feats {
            let feat = Tensor::from_vec(&[1, 1, 1, 1], vec![s]).unwrap();
            sigma = gru.update(&sigma, &feat).unwrap();
        }
        assert!((sigma.item() - want).abs() < 1e-6, "{} vs {want}", sigma.item());
    }

    #[test]
    fn decode_is_pure_and_shape_preserving() {
        let net = RamNet::<f32>::new(tiny_cfg(), 7);
        let mut state = net.zero_state(1, 16, 16).unwrap();
        state = net
            .step(&state, &Measurement { t_us: 10, sensor: SensorKind::Events, data: voxel_input(2, 16, 16) })
            .unwrap();
        let a = net.decode(&state).unwrap();
        let b = net.decode(&state).unwrap();
        assert_eq!(a.shape(), &[1, 1, 16, 16]);
        assert_eq!(a.to_vec(), b.to_vec());
    }

    #[test]
    fn zero_state_zero_bias_decodes_constant() {
        let net = RamNet::<f32>::new(tiny_cfg(), 8);
        let state = net.zero_state(1, 16, 16).unwrap();
        let pred = net.decode(&state).unwrap();
        let vals = pred.to_vec();
        for v in &vals {
            assert!((v - vals[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn order_sensitivity() {
        // Different interleavings ending in the same measurement differ.
        let net = RamNet::<f32>::new(tiny_cfg(), 9);
        let v1 = Measurement { t_us: 10, sensor: SensorKind::Events, data: voxel_input(3, 16, 16) };
        let v2 = Measurement { t_us: 20, sensor: SensorKind::Events, data: voxel_input(4, 16, 16) };
        let f = Measurement { t_us: 30, sensor: SensorKind::Frame, data: frame_input(5, 16, 16) };
        let run = |order: Vec<&Measurement<f32>>| {
            let mut st = net.zero_state(1, 16, 16).unwrap();
            let mut st_t = 0;
            for m in order {
                let m2 = Measurement { t_us: st_t + 10, sensor: m.sensor, data: m.data.clone() };
                st = net.step(&st, &m2).unwrap();
                st_t += 10;
            }
            net.decode(&st).unwrap().to_vec()
        };
        let a = run(vec![&v1, &v2, &f]);
        let b = run(vec![&v2, &v1, &f]);
        assert_ne!(a, b);
    }

    #[test]
    fn time_regression_rejected() {
        let net = RamNet::<f32>::new(tiny_cfg(), 10);
        let mut state = net.zero_state(1, 16, 16).unwrap();
        state = net
            .step(&state, &Measurement { t_us: 100, sensor: SensorKind::Events, data: voxel_input(6, 16, 16) })
            .unwrap();
        let back = Measurement { t_us: 50, sensor: SensorKind::Events, data: voxel_input(7, 16, 16) };
        assert!(net.step(&state, &back).is_err());
    }

    #[test]
    fn state_save_load_roundtrip() {
        let net = RamNet::<f32>::new(tiny_cfg(), 11);
        let mut state = net.zero_state(1, 16, 16).unwrap();
        for i in 0..3 {
            state = net
                .step(&state, &Measurement { t_us: (i + 1) * 10, sensor: SensorKind::Events, data: voxel_input(12 + i, 16, 16) })
                .unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckp");
        state.save(&path).unwrap();
        let restored = FusionState::load(&path).unwrap();
        assert_eq!(restored.t_us, state.t_us);
        assert_eq!(restored.last_sensor, state.last_sensor);
        for (a, b) in state.sigmas.iter().zip(&restored.sigmas) {
            assert_eq!(a.to_vec(), b.to_vec());
            assert_eq!(a.shape(), b.shape());
        }
    }

    #[test]
    fn markov_resume_is_bitwise_identical() {
        let net = RamNet::<f32>::new(tiny_cfg(), 13);
        let meas: Vec<Measurement<f32>> = (0..6)
            .map(|i| {
                if i % 3 == 2 {
                    Measurement { t_us: (i + 1) * 10, sensor: SensorKind::Frame, data: frame_input(20 + i, 16, 16) }
                } else {
                    Measurement { t_us: (i + 1) * 10, sensor: SensorKind::Events, data: voxel_input(20 + i, 16, 16) }
                }
            })
            .collect();
        let full = net.forward_sequence(&meas).unwrap();

        // run half, serialize, restore, replay the rest
        let mut state = net.zero_state(1, 16, 16).unwrap();
        for m in &meas[..3] {
            state = net.step(&state, m).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mid.ckp");
        state.save(&path).unwrap();
        let mut resumed = FusionState::load(&path).unwrap();
        for (i, m) in meas[3..].iter().enumerate() {
            resumed = net.step(&resumed, m).unwrap();
            let pred = net.decode(&resumed).unwrap();
            assert_eq!(pred.to_vec(), full[3 + i].output.to_vec(), "step {i}");
        }
    }

    #[test]
    fn gradients_flow_to_all_exercised_params() {
        let net = RamNet::<f64>::new(tiny_cfg(), 14);
        let mut state = net.zero_state(1, 16, 16).unwrap();
        let mk = |seed: u64, sensor: SensorKind| {
            use rand::{Rng, SeedableRng};
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = if sensor == SensorKind::Events { 5 } else { 1 };
            let data: Vec<f64> = (0..c * 256).map(|_| rng.random_range(-1.0..1.0)).collect();
            Measurement { t_us: seed * 10, sensor, data: Tensor::from_vec(&[1, c, 16, 16], data).unwrap() }
        };
        // Each sensor must update a non-zero state at least once, otherwise
        // its reset gate sees r ⊙ 0 and genuinely has zero gradient.
        state = net.step(&state, &mk(1, SensorKind::Events)).unwrap();
        state = net.step(&state, &mk(2, SensorKind::Frame)).unwrap();
        state = net.step(&state, &mk(3, SensorKind::Events)).unwrap();
        state = net.step(&state, &mk(4, SensorKind::Frame)).unwrap();
        let pred = net.decode(&state).unwrap();
        let loss = ops::sum_all(&ops::mul(&pred, &pred).unwrap());
        loss.backward().unwrap();
        for (name, p) in net.named_params() {
            let g = p.grad().unwrap_or_else(|| panic!("no grad for {name}"));
            let total: f64 = g.iter().map(|v| v.abs()).sum();
            assert!(total > 0.0, "zero gradient for {name}");
        }
    }

    #[test]
    fn checkpoint_name_scheme() {
        let net = RamNet::<f32>::new(ModelConfig::default(), 15);
        let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
        for expected in [
            "events.enc0.w",
            "events.enc3.b",
            "frame.enc1.w",
            "events.gru1.z.w",
            "frame.gru3.phi.b",
            "res.1.w",
            "res.2.b",
            "dec3.w",
            "dec1.b",
            "head.w",
        ] {
            assert!(names.iter().any(|n| n == expected), "missing {expected}");
        }
    }
}
