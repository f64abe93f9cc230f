//! The cooperative CNN+LSTM+FC steering model and the single-network baselines.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{conv_output_len, Graph, Padding, Var};
use crate::data::{FrameRef, Role, WindowSpec};
use crate::error::{Error, Result};
use crate::nn::{Activation, Conv2DLayer, DenseLayer, Layer, LstmLayer};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arch {
    /// Ego frames followed by lead-vehicle frames through CNN, LSTM and FC.
    #[serde(rename = "coop")]
    Coop,
    /// Current ego frame through CNN and FC.
    #[serde(rename = "baselineA")]
    BaselineA,
    /// Difference of two ego frames through CNN and FC.
    #[serde(rename = "baselineD")]
    BaselineD,
    /// Two ego frames stacked on the channel axis through CNN and FC.
    #[serde(rename = "baselineE")]
    BaselineE,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Coop, Arch::BaselineA, Arch::BaselineD, Arch::BaselineE];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Coop => "coop",
            Arch::BaselineA => "baselineA",
            Arch::BaselineD => "baselineD",
            Arch::BaselineE => "baselineE",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown architecture `{s}` (expected coop, baselineA, baselineD or baselineE)")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    /// `(height, width)`
    pub stride: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Frames taken from each vehicle.
    pub x: usize,
    pub input_h: usize,
    pub input_w: usize,
    pub channels: usize,
    /// Frame gap between the two inputs of baselines D and E.
    pub pair_gap: usize,
    pub conv: Vec<ConvSpec>,
    pub lstm_units: Vec<usize>,
    pub fc: Vec<usize>,
}

/// `(filters, (stride_h, stride_w))` of the five 5×5 convolutions.
pub const CONV_TABLE: [(usize, (usize, usize)); 5] = [(24, (5, 4)), (32, (3, 2)), (48, (5, 4)), (64, (1, 1)), (128, (1, 2))];

/// Frame size `(h, w)` the layer table was designed for.
pub const REFERENCE_FRAME: (usize, usize) = (480, 640);

const fn table_feature_len(h: usize, w: usize) -> usize {
    let (mut h, mut w, mut c) = (h, w, 0);
    let mut i = 0;
    while i < CONV_TABLE.len() {
        let (filters, (sh, sw)) = CONV_TABLE[i];
        h = h.div_ceil(sh);
        w = w.div_ceil(sw);
        c = filters;
        i += 1;
    }
    h * w * c
}

/// Per-frame feature length at [`REFERENCE_FRAME`].
pub const REFERENCE_FEATURE_LEN: usize = table_feature_len(REFERENCE_FRAME.0, REFERENCE_FRAME.1);

// Editing the table so that 480×640 no longer yields 7×10×128 features fails the build.
const _: () = assert!(REFERENCE_FEATURE_LEN == 8960);

/// Five 5×5 convolutions, three 64-unit LSTMs and a 100-50-10-1 head.
pub fn default_conv_stack() -> Vec<ConvSpec> {
    CONV_TABLE
        .into_iter()
        .map(|(filters, stride)| ConvSpec {
            filters,
            kernel: 5,
            stride,
        })
        .collect()
}

impl ModelConfig {
    /// The reference layer table at the given input size.
    pub fn new(arch: Arch, x: usize, input_h: usize, input_w: usize) -> Self {
        ModelConfig {
            arch,
            x,
            input_h,
            input_w,
            channels: 3,
            pair_gap: 1,
            conv: default_conv_stack(),
            lstm_units: vec![64, 64, 64],
            fc: vec![100, 50, 10, 1],
        }
    }

    /// Frames in one sample for this architecture.
    pub fn frames_per_sample(&self) -> usize {
        match self.arch {
            Arch::Coop => 2 * self.x,
            Arch::BaselineA => 1,
            Arch::BaselineD | Arch::BaselineE => 2,
        }
    }

    fn first_layer_channels(&self) -> usize {
        match self.arch {
            Arch::BaselineE => 2 * self.channels,
            _ => self.channels,
        }
    }

    /// `(h, w, c)` after each convolution under same padding.
    pub fn conv_shapes(&self) -> Result<Vec<[usize; 3]>> {
        let (mut h, mut w) = (self.input_h, self.input_w);
        let mut shapes = Vec::with_capacity(self.conv.len());
        for spec in &self.conv {
            h = conv_output_len(h, spec.kernel, spec.stride.0, Padding::Same)?.0;
            w = conv_output_len(w, spec.kernel, spec.stride.1, Padding::Same)?.0;
            shapes.push([h, w, spec.filters]);
        }
        Ok(shapes)
    }

    /// Length of one frame's flattened convolutional features.
    pub fn feature_len(&self) -> Result<usize> {
        let shapes = self.conv_shapes()?;
        let [h, w, c] = shapes.last().copied().unwrap_or([self.input_h, self.input_w, self.first_layer_channels()]);
        Ok(h * w * c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x == 0 {
            return Err(Error::Config("x must be at least 1".into()));
        }
        if self.input_h == 0 || self.input_w == 0 || self.channels == 0 {
            return Err(Error::Config("input dimensions must be positive".into()));
        }
        if self.conv.is_empty() || self.fc.is_empty() {
            return Err(Error::Config("the layer table needs convolutions and a dense head".into()));
        }
        if self.fc.last() != Some(&1) {
            return Err(Error::Config("the dense head must end in a single output".into()));
        }
        if self.arch == Arch::Coop && self.lstm_units.is_empty() {
            return Err(Error::Config("the cooperative model needs at least one LSTM layer".into()));
        }
        if matches!(self.arch, Arch::BaselineD | Arch::BaselineE) && self.pair_gap == 0 {
            return Err(Error::Config("pair_gap must be at least 1".into()));
        }
        self.conv_shapes().map(|_| ())
    }

    /// Frames (by sequence index and role) that make up the sample of `window`.
    pub fn frame_refs(&self, window: &WindowSpec) -> Result<Vec<FrameRef>> {
        let ego = |index| FrameRef { index, role: Role::Ego };
        match self.arch {
            Arch::Coop => {
                if window.x != self.x {
                    return Err(Error::Config(format!(
                        "window built with x = {} but the model expects x = {}",
                        window.x, self.x
                    )));
                }
                let lead = |index| FrameRef { index, role: Role::Lead };
                Ok(window.ego_indices().map(ego).chain(window.lead_indices().map(lead)).collect())
            }
            Arch::BaselineA => Ok(vec![ego(window.anchor)]),
            Arch::BaselineD | Arch::BaselineE => {
                let earlier = window.anchor.checked_sub(self.pair_gap).ok_or_else(|| {
                    Error::Config(format!(
                        "anchor {} has no frame {} steps earlier for {}",
                        window.anchor, self.pair_gap, self.arch
                    ))
                })?;
                Ok(vec![ego(earlier), ego(window.anchor)])
            }
        }
    }
}

/// Any of the four architectures, sharing one layer table.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    conv: Vec<Conv2DLayer>,
    lstm: Vec<LstmLayer>,
    fc: Vec<DenseLayer>,
}

impl Model {
    /// All-zero parameters.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut cin = config.first_layer_channels();
        let mut conv = Vec::with_capacity(config.conv.len());
        for spec in &config.conv {
            conv.push(Conv2DLayer::new(spec.kernel, cin, spec.filters, spec.stride, Activation::Relu));
            cin = spec.filters;
        }
        let mut width = config.feature_len()?;
        let mut lstm = Vec::new();
        if config.arch == Arch::Coop {
            for &units in &config.lstm_units {
                lstm.push(LstmLayer::new(width, units));
                width = units;
            }
        }
        let mut fc = Vec::with_capacity(config.fc.len());
        for (i, &units) in config.fc.iter().enumerate() {
            let act = if i + 1 == config.fc.len() { Activation::Linear } else { Activation::Relu };
            fc.push(DenseLayer::new(width, units, act));
            width = units;
        }
        Ok(Model { config, conv, lstm, fc })
    }

    /// Glorot-initialized parameters drawn from one seeded stream, layer by layer.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in model.layers_mut() {
            layer.init_with(&mut rng);
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn arch(&self) -> Arch {
        self.config.arch
    }

    fn layers(&self) -> impl Iterator<Item = (String, &dyn Layer)> {
        let conv = self.conv.iter().enumerate().map(|(i, l)| (format!("conv{}", i + 1), l as &dyn Layer));
        let lstm = self.lstm.iter().enumerate().map(|(i, l)| (format!("lstm{}", i + 1), l as &dyn Layer));
        let fc = self.fc.iter().enumerate().map(|(i, l)| (format!("fc{}", i + 1), l as &dyn Layer));
        conv.chain(lstm).chain(fc)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut dyn Layer> {
        let conv = self.conv.iter_mut().map(|l| l as &mut dyn Layer);
        let lstm = self.lstm.iter_mut().map(|l| l as &mut dyn Layer);
        let fc = self.fc.iter_mut().map(|l| l as &mut dyn Layer);
        conv.chain(lstm).chain(fc)
    }

    /// `("conv1.kernels", tensor)`-style names in forward registration order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.layers()
            .flat_map(|(layer, l)| {
                l.params()
                    .into_iter()
                    .map(move |(name, t)| (format!("{layer}.{name}"), t))
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn count_params(&self) -> usize {
        self.layers().map(|(_, l)| l.param_count()).sum()
    }

    /// Order-sensitive 64-bit FNV-1a digest of every parameter bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (_, t) in self.named_params() {
            for v in t.data() {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= u64::from(byte);
                    h = h.wrapping_mul(0x100_0000_01b3);
                }
            }
        }
        h
    }

    /// Batched forward pass: `[batch, frames, h, w, c] -> [batch]` angles in radians.
    pub fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let shape = g.shape(batch).to_vec();
        let expected = self.config.frames_per_sample();
        let [_, frames, h, w, c] = shape[..] else {
            return Err(Error::Config(format!(
                "model input must be [batch, frames, h, w, c], got {shape:?}"
            )));
        };
        if frames != expected {
            return Err(Error::Config(format!(
                "{} expects {expected} frames per sample, got {frames}",
                self.config.arch
            )));
        }
        self.check_frame(h, w, c)?;
        match self.config.arch {
            Arch::Coop => self.forward_coop(g, batch),
            Arch::BaselineA => {
                let frame = g.select(batch, 0)?;
                self.forward_baseline_a(g, frame)
            }
            Arch::BaselineD => {
                let a = g.select(batch, 0)?;
                let b = g.select(batch, 1)?;
                self.forward_baseline_d(g, a, b)
            }
            Arch::BaselineE => {
                let a = g.select(batch, 0)?;
                let b = g.select(batch, 1)?;
                self.forward_baseline_e(g, a, b)
            }
        }
    }

    fn check_frame(&self, h: usize, w: usize, c: usize) -> Result<()> {
        let cfg = &self.config;
        if (h, w, c) != (cfg.input_h, cfg.input_w, cfg.channels) {
            return Err(Error::Config(format!(
                "frames are {h}x{w}x{c}, model expects {}x{}x{}",
                cfg.input_h, cfg.input_w, cfg.channels
            )));
        }
        Ok(())
    }

    /// Cooperative model over `[batch, 2x, h, w, c]` (or a single `[2x, h, w, c]` sample).
    ///
    /// Every frame passes through the same convolution stack; the flattened
    /// per-frame features form a `2x`-step sequence for the LSTM stack whose
    /// final hidden state feeds the dense head.
    pub fn forward_coop(&self, g: &mut Graph, frames: Var) -> Result<Var> {
        if self.config.arch != Arch::Coop {
            return Err(Error::Usage(format!("forward_coop on a {} model", self.config.arch)));
        }
        let frames = match *g.shape(frames) {
            [f, h, w, c] => g.reshape(frames, &[1, f, h, w, c])?,
            _ => frames,
        };
        let &[batch, count, h, w, c] = g.shape(frames) else {
            return Err(Error::Config(format!("coop input must be [batch, 2x, h, w, c], got {:?}", g.shape(frames))));
        };
        if count != 2 * self.config.x {
            return Err(Error::Config(format!(
                "coop model with x = {} expects {} frames, got {count}",
                self.config.x,
                2 * self.config.x
            )));
        }
        self.check_frame(h, w, c)?;
        let flat = g.reshape(frames, &[batch * count, h, w, c])?;
        let features = self.conv_features(g, flat)?;
        let width = g.shape(features)[1];
        let mut seq = g.reshape(features, &[batch, count, width])?;
        for (i, layer) in self.lstm.iter().enumerate() {
            let last = i + 1 == self.lstm.len();
            seq = layer.forward_sequence(g, seq, !last)?;
        }
        self.head(g, seq)
    }

    /// Single-frame CNN model over `[batch, h, w, c]`.
    pub fn forward_baseline_a(&self, g: &mut Graph, frame: Var) -> Result<Var> {
        if !matches!(self.config.arch, Arch::BaselineA | Arch::BaselineD) {
            return Err(Error::Usage(format!("forward_baseline_a on a {} model", self.config.arch)));
        }
        let features = self.conv_features(g, frame)?;
        self.head(g, features)
    }

    /// Runs the single-frame network on `frame_b - frame_a`.
    pub fn forward_baseline_d(&self, g: &mut Graph, frame_a: Var, frame_b: Var) -> Result<Var> {
        if self.config.arch != Arch::BaselineD {
            return Err(Error::Usage(format!("forward_baseline_d on a {} model", self.config.arch)));
        }
        pair_shapes_match(g, frame_a, frame_b)?;
        let diff = g.sub(frame_b, frame_a)?;
        self.forward_baseline_a(g, diff)
    }

    /// Runs the network on both frames stacked along the channel axis.
    pub fn forward_baseline_e(&self, g: &mut Graph, frame_a: Var, frame_b: Var) -> Result<Var> {
        if self.config.arch != Arch::BaselineE {
            return Err(Error::Usage(format!("forward_baseline_e on a {} model", self.config.arch)));
        }
        pair_shapes_match(g, frame_a, frame_b)?;
        let stacked = g.concat_last(frame_a, frame_b)?;
        let features = self.conv_features(g, stacked)?;
        self.head(g, features)
    }

    // [n, h, w, c] -> [n, features]
    fn conv_features(&self, g: &mut Graph, frames: Var) -> Result<Var> {
        let frames = match *g.shape(frames) {
            [h, w, c] => g.reshape(frames, &[1, h, w, c])?,
            _ => frames,
        };
        let n = g.shape(frames)[0];
        let mut x = frames;
        for layer in &self.conv {
            x = layer.forward(g, x)?;
        }
        let width = g.value(x).numel() / n;
        g.reshape(x, &[n, width])
    }

    // [batch, features] -> [batch]
    fn head(&self, g: &mut Graph, mut x: Var) -> Result<Var> {
        for layer in &self.fc {
            x = layer.forward(g, x)?;
        }
        let batch = g.shape(x)[0];
        g.reshape(x, &[batch])
    }

    /// Predictions for a `[batch, frames, h, w, c]` input without recording gradients.
    pub fn predict(&self, batch: Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let x = g.constant(batch);
        let y = self.forward(&mut g, x)?;
        g.check_finite()?;
        Ok(g.value(y).data().to_vec())
    }
}

fn pair_shapes_match(g: &Graph, a: Var, b: Var) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        return Err(Error::Config(format!(
            "frame pair shapes differ: {:?} vs {:?}",
            g.shape(a),
            g.shape(b)
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_feature_length() {
        let cfg = ModelConfig::new(Arch::Coop, 8, 480, 640);
        let shapes = cfg.conv_shapes().unwrap();
        assert_eq!(
            shapes,
            vec![[96, 160, 24], [32, 80, 32], [7, 20, 48], [7, 20, 64], [7, 10, 128]]
        );
        assert_eq!(cfg.feature_len().unwrap(), 8960);
    }

    #[test]
    fn desk_size_feature_length() {
        let cfg = ModelConfig::new(Arch::Coop, 4, 64, 64);
        assert_eq!(cfg.feature_len().unwrap(), 128);
    }

    #[test]
    fn arch_round_trips_through_str() {
        for a in Arch::ALL {
            assert_eq!(a.name().parse::<Arch>().unwrap(), a);
        }
        assert!("baselineB".parse::<Arch>().is_err());
    }

    #[test]
    fn zero_weights_predict_zero() {
        for arch in Arch::ALL {
            let cfg = ModelConfig::new(arch, 2, 16, 16);
            let frames = cfg.frames_per_sample();
            let model = Model::zeros(cfg).unwrap();
            let input = Tensor::full(&[3, frames, 16, 16, 3], 0.3);
            assert_eq!(model.predict(input).unwrap(), vec![0.0; 3], "{arch}");
        }
    }

    #[test]
    fn wrong_frame_count_is_config_error() {
        let model = Model::new(ModelConfig::new(Arch::Coop, 2, 16, 16), 0).unwrap();
        let input = Tensor::zeros(&[1, 3, 16, 16, 3]);
        assert!(matches!(model.predict(input), Err(Error::Config(_))));
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[3, 16, 16, 3]));
        assert!(matches!(model.forward_coop(&mut g, x), Err(Error::Config(_))));
    }

    #[test]
    fn sequence_length_is_two_x() {
        let cfg = ModelConfig::new(Arch::Coop, 8, 16, 16);
        assert_eq!(cfg.frames_per_sample(), 16);
        let w = WindowSpec::new(20, 8, 5);
        let refs = cfg.frame_refs(&w).unwrap();
        assert_eq!(refs.len(), 16);
        assert!(refs[..8].iter().all(|r| r.role == Role::Ego));
        assert_eq!(refs[8], FrameRef { index: 25, role: Role::Lead });
    }

    #[test]
    fn baseline_pairs_need_history() {
        let cfg = ModelConfig::new(Arch::BaselineD, 1, 16, 16);
        assert!(cfg.frame_refs(&WindowSpec::new(0, 1, 0)).is_err());
        let refs = cfg.frame_refs(&WindowSpec::new(3, 1, 0)).unwrap();
        assert_eq!(refs.iter().map(|r| r.index).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn named_params_follow_registration_order() {
        let model = Model::new(ModelConfig::new(Arch::Coop, 1, 16, 16), 4).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 2, 16, 16, 3]));
        model.forward(&mut g, x).unwrap();
        let named = model.named_params();
        assert_eq!(g.params().len(), named.len());
        for (&v, (name, t)) in g.params().iter().zip(&named) {
            assert_eq!(g.value(v), *t, "{name}");
        }
        assert_eq!(named[0].0, "conv1.kernels");
        assert_eq!(named.last().unwrap().0, "fc4.bias");
    }

    #[test]
    fn baselines_are_smaller_than_coop() {
        for (h, w) in [(64, 64), (480, 640)] {
            let coop = Model::zeros(ModelConfig::new(Arch::Coop, 8, h, w)).unwrap().count_params();
            let a = Model::zeros(ModelConfig::new(Arch::BaselineA, 8, h, w)).unwrap().count_params();
            assert!(a < coop, "{h}x{w}: {a} vs {coop}");
        }
    }

    #[test]
    fn baseline_e_reads_six_channels() {
        let model = Model::zeros(ModelConfig::new(Arch::BaselineE, 1, 16, 16)).unwrap();
        assert_eq!(model.conv[0].in_channels(), 6);
    }
}
