//! Quantized inference: the first convolution runs on the optical core, the
//! remaining layers run digitally in f64.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CoreConfig, Mode};
use crate::device::TernaryCode;
use crate::error::{Result, SimError};
use crate::fixture::{Fixture, FixtureKind};
use crate::mapper::{plan_layer, ConvSpec, KernelId, LayerSpec, Schedule, WeightSource};
use crate::opc::{ConvActivations, OpticalCore, ProgrammedSchedule};
use crate::pixel::{sense, Frame};
use crate::plane::Plane;
use crate::quant::{quantize_symmetric, QuantWeight};
use crate::seed::{self, TAG_SAMPLE};

/// Dense f64 activations with an explicit shape (`[C, H, W]` or `[N]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Features {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(SimError::ShapeMismatch(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Features { shape, data })
    }

    fn chw(&self, what: &str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(SimError::ShapeMismatch(format!(
                "{what} needs [C, H, W] input, got {:?}",
                self.shape
            ))),
        }
    }
}

/// Signed kernels `[out, in, k, k]` of the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTensor {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub bits: u8,
    pub weights: Vec<QuantWeight>,
}

impl KernelTensor {
    pub fn new(out_channels: usize, in_channels: usize, kernel: usize, bits: u8, weights: Vec<QuantWeight>) -> Result<Self> {
        if weights.len() != out_channels * in_channels * kernel * kernel {
            return Err(SimError::ShapeMismatch(format!(
                "{} weights for [{out_channels}, {in_channels}, {kernel}, {kernel}]",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.fits(bits)) {
            return Err(SimError::BitWidthOverflow { weight: w.value(), bits });
        }
        Ok(KernelTensor {
            out_channels,
            in_channels,
            kernel,
            bits,
            weights,
        })
    }

    pub fn at(&self, o: usize, c: usize, ky: usize, kx: usize) -> QuantWeight {
        let k = self.kernel;
        self.weights[((o * self.in_channels + c) * k + ky) * k + kx]
    }
}

impl WeightSource for KernelTensor {
    fn bit_width(&self) -> u8 {
        self.bits
    }

    fn weight(&self, kernel: KernelId, element: usize) -> QuantWeight {
        let k2 = self.kernel * self.kernel;
        self.weights[(kernel.output as usize * self.in_channels + kernel.part as usize) * k2 + element]
    }
}

/// Exact integer cross-correlation of ternary planes with signed kernels.
/// Output is `[out, oh, ow]`, raster order.
pub fn oracle_conv(planes: &[Plane<TernaryCode>], kernels: &KernelTensor, spec: &ConvSpec) -> Result<Vec<i64>> {
    LayerSpec::Conv(*spec).validate()?;
    if kernels.kernel != spec.kernel
        || kernels.in_channels != spec.in_channels
        || kernels.out_channels != spec.out_channels
        || planes.len() != spec.in_channels
        || planes.iter().any(|p| p.width() != spec.in_width || p.height() != spec.in_height)
    {
        return Err(SimError::ShapeMismatch(
            "frame planes, kernels and layer disagree".into(),
        ));
    }
    let (oh, ow, k) = (spec.out_height(), spec.out_width(), spec.kernel);
    let mut out = vec![0i64; spec.out_channels * oh * ow];
    for o in 0..spec.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0i64;
                for (c, plane) in planes.iter().enumerate() {
                    for ky in 0..k {
                        for kx in 0..k {
                            let y = (oy * spec.stride + ky) as isize - spec.padding as isize;
                            let x = (ox * spec.stride + kx) as isize - spec.padding as isize;
                            if let Some(a) = plane.get_padded(x, y) {
                                acc += a.value() as i64 * kernels.at(o, c, ky, kx).value() as i64;
                            }
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Ok(out)
}

/// A digitally evaluated layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Relu,
    MaxPool { size: usize, stride: usize },
    Conv2d {
        /// `[out, in, k, k]`
        weight: Vec<f64>,
        shape: [usize; 4],
        bias: Vec<f64>,
        stride: usize,
        padding: usize,
    },
    Flatten,
    Linear {
        /// `[out, in]`
        weight: Vec<f64>,
        outputs: usize,
        inputs: usize,
        bias: Vec<f64>,
    },
}

impl Layer {
    pub fn apply(&self, x: Features) -> Result<Features> {
        match self {
            Layer::Relu => Ok(Features {
                data: x.data.iter().map(|v| v.max(0.0)).collect(),
                shape: x.shape,
            }),
            Layer::Flatten => Features::new(vec![x.data.len()], x.data),
            Layer::MaxPool { size, stride } => {
                let (c, h, w) = x.chw("max_pool")?;
                if h < *size || w < *size {
                    return Err(SimError::ShapeMismatch(format!("{h}x{w} too small to pool by {size}")));
                }
                let (oh, ow) = ((h - size) / stride + 1, (w - size) / stride + 1);
                let mut out = Vec::with_capacity(c * oh * ow);
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut m = f64::NEG_INFINITY;
                            for dy in 0..*size {
                                for dx in 0..*size {
                                    m = m.max(x.data[(ch * h + oy * stride + dy) * w + ox * stride + dx]);
                                }
                            }
                            out.push(m);
                        }
                    }
                }
                Features::new(vec![c, oh, ow], out)
            }
            Layer::Conv2d {
                weight,
                shape,
                bias,
                stride,
                padding,
            } => {
                let (c, h, w) = x.chw("conv2d")?;
                let [o, ci, k, _] = *shape;
                if ci != c {
                    return Err(SimError::ShapeMismatch(format!("conv2d expects {ci} channels, got {c}")));
                }
                if h + 2 * padding < k || w + 2 * padding < k {
                    return Err(SimError::ShapeMismatch(format!("{h}x{w} input smaller than kernel {k}")));
                }
                let oh = (h + 2 * padding - k) / stride + 1;
                let ow = (w + 2 * padding - k) / stride + 1;
                let mut out = vec![0.0; o * oh * ow];
                for oc in 0..o {
                    let plane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
                    for ic in 0..c {
                        let input = &x.data[ic * h * w..(ic + 1) * h * w];
                        for ky in 0..k {
                            for kx in 0..k {
                                let wv = weight[((oc * c + ic) * k + ky) * k + kx];
                                // output columns whose tap lands inside the row
                                let lo = padding.saturating_sub(kx).div_ceil(*stride);
                                let hi = ((w + padding).saturating_sub(kx)).div_ceil(*stride).min(ow);
                                for oy in 0..oh {
                                    let y = (oy * stride + ky) as isize - *padding as isize;
                                    if y < 0 || y >= h as isize {
                                        continue;
                                    }
                                    let row = &input[y as usize * w..(y as usize + 1) * w];
                                    let dst = &mut plane[oy * ow..(oy + 1) * ow];
                                    for ox in lo..hi {
                                        dst[ox] += wv * row[ox * stride + kx - padding];
                                    }
                                }
                            }
                        }
                    }
                    plane.iter_mut().for_each(|v| *v += bias[oc]);
                }
                Features::new(vec![o, oh, ow], out)
            }
            Layer::Linear {
                weight,
                outputs,
                inputs,
                bias,
            } => {
                if x.data.len() != *inputs {
                    return Err(SimError::ShapeMismatch(format!(
                        "linear expects {inputs} inputs, got {}",
                        x.data.len()
                    )));
                }
                let out = (0..*outputs)
                    .map(|o| {
                        let row = &weight[o * inputs..(o + 1) * inputs];
                        row.iter().zip(&x.data).map(|(w, v)| w * v).sum::<f64>() + bias[o]
                    })
                    .collect();
                Features::new(vec![*outputs], out)
            }
        }
    }
}

/// Evaluates `layers` in order and flattens the result into logits.
pub fn run_rest(features: Features, layers: &[Layer]) -> Result<Vec<f64>> {
    Ok(layers.iter().try_fold(features, |x, l| l.apply(x))?.data)
}

/// Quantized first convolution plus its digital epilogue.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstLayer {
    pub spec: ConvSpec,
    pub kernels: KernelTensor,
    pub weight_scale: f64,
    /// Value represented by ternary code 1.
    pub activation_scale: f64,
    pub bias: Vec<f64>,
    master: Vec<f64>,
}

impl FirstLayer {
    /// Quantizes float `[out, in, k, k]` weights to `bits` magnitude bits.
    pub fn quantize(spec: ConvSpec, master: Vec<f64>, bias: Vec<f64>, activation_scale: f64, bits: u8) -> Result<Self> {
        LayerSpec::Conv(spec).validate()?;
        if bias.len() != spec.out_channels {
            return Err(SimError::ShapeMismatch(format!(
                "{} biases for {} output channels",
                bias.len(),
                spec.out_channels
            )));
        }
        let (q, weight_scale) = quantize_symmetric(&master, bits)?;
        let kernels = KernelTensor::new(spec.out_channels, spec.in_channels, spec.kernel, bits, q)?;
        Ok(FirstLayer {
            spec,
            kernels,
            weight_scale,
            activation_scale,
            bias,
            master,
        })
    }

    /// Converts integer-unit feature maps into real-valued activations.
    pub fn dequantize(&self, units: &[f64]) -> Result<Features> {
        let (oh, ow) = (self.spec.out_height(), self.spec.out_width());
        let per = oh * ow;
        let scale = self.weight_scale * self.activation_scale;
        if units.len() != per * self.spec.out_channels {
            return Err(SimError::ShapeMismatch(format!("{} first-layer outputs", units.len())));
        }
        let data = units
            .iter()
            .enumerate()
            .map(|(i, u)| u * scale + self.bias[i / per])
            .collect();
        Features::new(vec![self.spec.out_channels, oh, ow], data)
    }
}

/// A model whose first layer runs on the optical core.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    pub name: String,
    pub first: FirstLayer,
    pub layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct FirstLayerMeta {
    weight: String,
    bias: String,
    kernel: usize,
    stride: usize,
    padding: usize,
    in_channels: usize,
    out_channels: usize,
    bit_width: u8,
    activation_scale: f64,
}

#[derive(Deserialize)]
struct InputMeta {
    height: usize,
    width: usize,
}

impl QuantModel {
    /// Loads a model fixture, quantizing the first layer to `bits` (or the
    /// fixture's declared bit width).
    pub fn from_fixture(fx: &Fixture, bits: Option<u8>) -> Result<Self> {
        fx.expect_kind(FixtureKind::Model)?;
        let bad = |reason: String| SimError::fixture(&fx.dir, reason);
        let field = |key: &str| fx.meta.get(key).cloned().ok_or_else(|| bad(format!("meta.{key} missing")));
        let first: FirstLayerMeta =
            serde_json::from_value(field("first_layer")?).map_err(|e| bad(format!("meta.first_layer: {e}")))?;
        let input: InputMeta = serde_json::from_value(field("input")?).map_err(|e| bad(format!("meta.input: {e}")))?;
        let spec = ConvSpec {
            in_height: input.height,
            in_width: input.width,
            in_channels: first.in_channels,
            kernel: first.kernel,
            out_channels: first.out_channels,
            stride: first.stride,
            padding: first.padding,
        };
        let w = fx.tensor(&first.weight)?;
        if w.shape != [first.out_channels, first.in_channels, first.kernel, first.kernel] {
            return Err(bad(format!("{} has shape {:?}", first.weight, w.shape)));
        }
        let first_layer = FirstLayer::quantize(
            spec,
            w.to_f64(),
            fx.tensor(&first.bias)?.to_f64(),
            first.activation_scale,
            bits.unwrap_or(first.bit_width),
        )?;
        let descriptors = field("layers")?;
        let descriptors = descriptors
            .as_array()
            .ok_or_else(|| bad("meta.layers is not a list".into()))?;
        let layers = descriptors
            .iter()
            .map(|d| parse_layer(fx, d))
            .collect::<Result<Vec<_>>>()?;
        let name = fx.meta.get("name").and_then(|v| v.as_str()).unwrap_or("model").to_string();
        Ok(QuantModel {
            name,
            first: first_layer,
            layers,
        })
    }

    /// Same model with the first layer re-quantized from its float weights.
    pub fn requantize(&self, bits: u8) -> Result<Self> {
        let f = &self.first;
        Ok(QuantModel {
            first: FirstLayer::quantize(f.spec, f.master.clone(), f.bias.clone(), f.activation_scale, bits)?,
            ..self.clone()
        })
    }

    pub fn layer_spec(&self) -> LayerSpec {
        LayerSpec::Conv(self.first.spec)
    }

    pub fn bit_width(&self) -> u8 {
        self.first.kernels.bits
    }
}

fn parse_layer(fx: &Fixture, d: &serde_json::Value) -> Result<Layer> {
    let bad = |reason: String| SimError::fixture(&fx.dir, reason);
    let kind = d.get("kind").and_then(|k| k.as_str()).unwrap_or("<missing>");
    let usize_field = |key: &str, default: Option<usize>| -> Result<usize> {
        match d.get(key).and_then(|v| v.as_u64()) {
            Some(v) => Ok(v as usize),
            None => default.ok_or_else(|| bad(format!("{kind} layer needs `{key}`"))),
        }
    };
    let tensor = |key: &str| -> Result<&crate::fixture::Tensor> {
        let name = d
            .get(key)
            .and_then(|v| v.as_str())
            .ok_or_else(|| bad(format!("{kind} layer needs `{key}`")))?;
        fx.tensor(name)
    };
    match kind {
        "relu" => Ok(Layer::Relu),
        "flatten" => Ok(Layer::Flatten),
        "max_pool" => {
            let size = usize_field("size", None)?;
            Ok(Layer::MaxPool {
                size,
                stride: usize_field("stride", Some(size))?,
            })
        }
        "conv2d" => {
            let w = tensor("weight")?;
            let shape: [usize; 4] = w
                .shape
                .clone()
                .try_into()
                .map_err(|_| bad(format!("conv2d weight shape {:?}", w.shape)))?;
            let bias = tensor("bias")?.to_f64();
            if bias.len() != shape[0] || shape[2] != shape[3] {
                return Err(bad(format!("conv2d bias/weight shapes {:?}", w.shape)));
            }
            Ok(Layer::Conv2d {
                weight: w.to_f64(),
                shape,
                bias,
                stride: usize_field("stride", Some(1))?.max(1),
                padding: usize_field("padding", Some(0))?,
            })
        }
        "linear" => {
            let w = tensor("weight")?;
            let [outputs, inputs] = w.shape[..] else {
                return Err(bad(format!("linear weight shape {:?}", w.shape)));
            };
            let bias = tensor("bias")?.to_f64();
            if bias.len() != outputs {
                return Err(bad(format!("linear bias has {} entries", bias.len())));
            }
            Ok(Layer::Linear {
                weight: w.to_f64(),
                outputs,
                inputs,
                bias,
            })
        }
        other => Err(SimError::UnsupportedLayer(other.to_string())),
    }
}

/// The first layer planned and programmed onto one chip instance.
#[derive(Debug, Clone)]
pub struct FirstLayerEngine {
    pub schedule: Schedule,
    core: OpticalCore,
    programmed: ProgrammedSchedule,
    spec: ConvSpec,
}

impl FirstLayerEngine {
    /// `seed` selects the chip instance and its programming noise.
    pub fn new(first: &FirstLayer, cfg: &CoreConfig, mode: Mode, seed: u64) -> Result<Self> {
        let schedule = plan_layer(&LayerSpec::Conv(first.spec), cfg)?;
        let core = OpticalCore::new(cfg, mode, seed)?;
        let programmed = core.program(&schedule, &first.kernels)?;
        Ok(FirstLayerEngine {
            schedule,
            core,
            programmed,
            spec: first.spec,
        })
    }

    pub fn core(&self) -> &OpticalCore {
        &self.core
    }

    /// Integer-unit feature maps `[out, oh, ow]` for ternary input planes.
    pub fn run_codes(&self, planes: &[Plane<TernaryCode>], frame_seed: u64) -> Result<Vec<f64>> {
        let acts = ConvActivations::new(self.spec, planes)?;
        self.programmed.run(&self.core, &acts, frame_seed)
    }

    /// Senses `frame` through the pixel front end and runs the layer.
    pub fn run_frame(&self, frame: &Frame, frame_seed: u64) -> Result<Vec<f64>> {
        let cfg = self.core.config();
        let codes = sense(frame, &cfg.pixel, &cfg.vam)?;
        self.run_codes(std::slice::from_ref(&codes), frame_seed)
    }
}

/// Single-frame convenience: plans, programs and runs the first layer.
pub fn run_first_layer(frame: &Frame, model: &QuantModel, cfg: &CoreConfig, mode: Mode, seed: u64) -> Result<Vec<f64>> {
    FirstLayerEngine::new(&model.first, cfg, mode, seed)?.run_frame(frame, seed)
}

/// Full forward pass for one frame.
pub fn infer(engine: &FirstLayerEngine, model: &QuantModel, frame: &Frame, frame_seed: u64) -> Result<Vec<f64>> {
    let units = engine.run_frame(frame, frame_seed)?;
    run_rest(model.first.dequantize(&units)?, &model.layers)
}

/// Labeled grayscale images.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub classes: usize,
}

impl Dataset {
    pub fn from_fixture(fx: &Fixture) -> Result<Self> {
        fx.expect_kind(FixtureKind::Dataset)?;
        let images = fx.tensor("images")?;
        let labels = fx.tensor("labels")?;
        let bad = |reason: String| SimError::fixture(&fx.dir, reason);
        let [n, height, width] = images.shape[..] else {
            return Err(bad(format!("images shape {:?}", images.shape)));
        };
        let (Some(pixels), Some(labels)) = (images.as_u8(), labels.as_u8()) else {
            return Err(bad("images and labels must be u8".into()));
        };
        if labels.len() != n {
            return Err(bad(format!("{} labels for {n} images", labels.len())));
        }
        let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
        let classes = fx
            .meta
            .get("classes")
            .and_then(|c| c.as_u64())
            .map(|c| c as usize)
            .unwrap_or(max_label + 1);
        if max_label >= classes {
            return Err(bad(format!("label {max_label} outside {classes} classes")));
        }
        Ok(Dataset {
            name: fx.meta.get("name").and_then(|v| v.as_str()).unwrap_or("dataset").to_string(),
            height,
            width,
            images: pixels.to_vec(),
            labels: labels.to_vec(),
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn frame(&self, i: usize) -> Result<Frame> {
        let n = self.height * self.width;
        Frame::from_gray8(self.width, self.height, &self.images[i * n..(i + 1) * n])
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let px = self.height * self.width;
        Dataset {
            images: self.images[..n * px].to_vec(),
            labels: self.labels[..n].to_vec(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCount {
    pub correct: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    pub per_class: Vec<ClassCount>,
    /// `[W:A]`: weight magnitude bits and activation bits (ternary = 2).
    pub config_id: String,
    pub mode: Mode,
    /// Digest of every non-ideality setting.
    pub noise_hash: String,
    pub predictions: Vec<u8>,
}

/// Digest of the non-ideality settings of `cfg` in `mode`.
pub fn noise_hash(cfg: &CoreConfig, mode: Mode) -> String {
    let payload = serde_json::json!({
        "mode": mode,
        "noise": cfg.noise,
        "awc_gain_error_per_bit": cfg.awc.gain_error_per_bit,
        "awc_noise_sigma": cfg.awc.noise_sigma,
    });
    crate::fixture::sha256_hex(payload.to_string().as_bytes())[..16].to_string()
}

/// Seed of the per-cycle noise for sample `index`.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, &[TAG_SAMPLE, index as u64])
}

fn argmax(logits: &[f64]) -> usize {
    // first maximum wins, like numpy
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy of `model` on `dataset`. Samples run in parallel; results
/// depend only on `seed`, never on the thread count.
pub fn evaluate(dataset: &Dataset, model: &QuantModel, cfg: &CoreConfig, mode: Mode, seed: u64) -> Result<EvalResult> {
    if dataset.is_empty() {
        return Err(SimError::EmptyInput("dataset"));
    }
    let spec = &model.first.spec;
    if dataset.height != spec.in_height || dataset.width != spec.in_width || spec.in_channels != 1 {
        return Err(SimError::ShapeMismatch(format!(
            "{}x{} images for a {}x{}x{} model input",
            dataset.height, dataset.width, spec.in_channels, spec.in_height, spec.in_width
        )));
    }
    let engine = FirstLayerEngine::new(&model.first, cfg, mode, seed)?;
    let predictions = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let logits = infer(&engine, model, &dataset.frame(i)?, sample_seed(seed, i))?;
            Ok(argmax(&logits) as u8)
        })
        .collect::<Result<Vec<u8>>>()?;
    let mut per_class = vec![ClassCount::default(); dataset.classes];
    for (&p, &l) in predictions.iter().zip(&dataset.labels) {
        let c = &mut per_class[l as usize];
        c.total += 1;
        c.correct += (p == l) as u64;
    }
    let correct: u64 = per_class.iter().map(|c| c.correct).sum();
    let total = dataset.len() as u64;
    Ok(EvalResult {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        per_class,
        config_id: format!("[{}:2]", model.bit_width()),
        mode,
        noise_hash: noise_hash(cfg, mode),
        predictions,
    })
}
