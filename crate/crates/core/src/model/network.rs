use std::path::PathBuf;

use candle_core::{DType, Device, Module, Tensor, D};
use candle_nn::{Conv2d, Conv2dConfig, Linear, VarBuilder, VarMap};
use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::dataset::CROP_SIZE;
use crate::error::{Error, Result};

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

/// Layer plan of a VGG-style network.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneSpec {
    pub name: &'static str,
    /// Output channels of each 3x3 conv, grouped by pooling stage.
    pub stages: Vec<Vec<usize>>,
    /// Side of the adaptive average pool before the classifier.
    pub pool_to: usize,
    pub hidden: Vec<usize>,
    pub dropout: f32,
}

impl BackboneSpec {
    pub fn check_input_size(&self, size: u32) -> Result<()> {
        let min = 1u32 << self.stages.len();
        if size < min {
            return Err(Error::Config(format!("{} needs input_size >= {min}, got {size}", self.name)));
        }
        Ok(())
    }

    /// Name of the replaced final layer.
    pub fn head_name(&self) -> String {
        format!("classifier.{}", 3 * self.hidden.len())
    }
}

/// Registered backbones: `vgg16` and the small `vgg_mini` for desk-scale runs.
pub fn backbone_spec(name: &str) -> Result<BackboneSpec> {
    match name {
        "vgg16" => Ok(BackboneSpec {
            name: "vgg16",
            stages: vec![vec![64, 64], vec![128, 128], vec![256, 256, 256], vec![512, 512, 512], vec![512, 512, 512]],
            pool_to: 7,
            hidden: vec![4096, 4096],
            dropout: 0.5,
        }),
        "vgg_mini" => Ok(BackboneSpec {
            name: "vgg_mini",
            stages: vec![vec![16], vec![32], vec![64], vec![64]],
            pool_to: 2,
            hidden: vec![64],
            dropout: 0.0,
        }),
        other => Err(Error::Config(format!("unknown backbone `{other}` (registered: vgg16, vgg_mini)"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub probabilities: Vec<f32>,
}

/// VGG-style classifier whose last layer has `num_classes` outputs.
pub struct Classifier {
    config: ModelConfig,
    spec: BackboneSpec,
    varmap: VarMap,
    convs: Vec<Vec<Conv2d>>,
    linears: Vec<Linear>,
    device: Device,
}

impl std::fmt::Debug for Classifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Classifier").field("config", &self.config).finish_non_exhaustive()
    }
}

/// Builds the network: weights drawn from `seed`, then backbone weights
/// replaced by the pretrained file when `config.pretrained` is set.
pub fn build_classifier(config: &ModelConfig, seed: u64) -> Result<Classifier> {
    let mut model = Classifier::random(config, seed)?;
    if config.pretrained {
        model.load_pretrained()?;
    }
    Ok(model)
}

impl Classifier {
    /// Architecture with seeded initial weights and no pretrained load.
    pub fn random(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let spec = backbone_spec(&config.backbone)?;
        let device = Device::Cpu;
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &device);

        let conv_cfg = Conv2dConfig {
            padding: 1,
            ..Default::default()
        };
        let mut in_ch = 3;
        let mut idx = 0;
        let mut convs = Vec::new();
        for stage in &spec.stages {
            let mut layers = Vec::new();
            for &out_ch in stage {
                layers.push(candle_nn::conv2d(in_ch, out_ch, 3, conv_cfg, vb.pp(format!("features.{idx}")))?);
                in_ch = out_ch;
                idx += 2;
            }
            idx += 1;
            convs.push(layers);
        }
        let mut in_dim = in_ch * spec.pool_to * spec.pool_to;
        let mut linears = Vec::new();
        for (i, &h) in spec.hidden.iter().enumerate() {
            linears.push(candle_nn::linear(in_dim, h, vb.pp(format!("classifier.{}", 3 * i)))?);
            in_dim = h;
        }
        linears.push(candle_nn::linear(in_dim, config.num_classes, vb.pp(spec.head_name()))?);

        let model = Classifier {
            config: config.clone(),
            spec,
            varmap,
            convs,
            linears,
            device,
        };
        model.reinitialize(seed)?;
        Ok(model)
    }

    /// Conv weights ~ N(0, 2 / fan_out), linear weights ~ N(0, 0.01^2), zero biases.
    fn reinitialize(&self, seed: u64) -> Result<()> {
        let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
        for (name, var) in self.named_vars() {
            let dims = var.dims().to_vec();
            let n: usize = dims.iter().product();
            let values: Vec<f32> = if name.ends_with(".bias") {
                vec![0.0; n]
            } else {
                let std = if dims.len() == 4 {
                    (2.0 / (dims[0] * dims[2] * dims[3]) as f64).sqrt()
                } else {
                    0.01
                };
                let normal = Normal::new(0.0, std).expect("positive std");
                (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
            };
            var.set(&Tensor::from_vec(values, dims, &self.device)?)?;
        }
        Ok(())
    }

    pub fn pretrained_weights_path(&self) -> PathBuf {
        if let Some(p) = &self.config.weights_path {
            return p.clone();
        }
        let dir = std::env::var_os("PYROSORT_WEIGHTS_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("weights"));
        dir.join(format!("{}.safetensors", self.config.backbone))
    }

    /// Copies every backbone tensor from the pretrained file; the head keeps
    /// its seeded initialisation.
    fn load_pretrained(&mut self) -> Result<()> {
        let path = self.pretrained_weights_path();
        if !path.is_file() {
            return Err(Error::WeightsUnavailable {
                backbone: self.config.backbone.clone(),
                path,
            });
        }
        let tensors = candle_core::safetensors::load(&path, &self.device)?;
        let head = self.spec.head_name();
        for (name, var) in self.named_vars() {
            if name.starts_with(&format!("{head}.")) {
                continue;
            }
            let t = tensors
                .get(&name)
                .ok_or_else(|| Error::Config(format!("{}: missing tensor `{name}`", path.display())))?;
            if t.dims() != var.dims() {
                return Err(Error::Config(format!(
                    "{}: tensor `{name}` has shape {:?}, expected {:?}",
                    path.display(),
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(DType::F32)?)?;
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Variables sorted by name.
    pub fn named_vars(&self) -> Vec<(String, candle_core::Var)> {
        let data = self.varmap.data().lock().expect("varmap lock");
        let mut vars: Vec<_> = data.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        vars.sort_by(|a, b| a.0.cmp(&b.0));
        vars
    }

    pub fn trainable_vars(&self, head_only: bool) -> Vec<candle_core::Var> {
        let head = format!("{}.", self.spec.head_name());
        self.named_vars()
            .into_iter()
            .filter(|(name, _)| !head_only || name.starts_with(&head))
            .map(|(_, v)| v)
            .collect()
    }

    /// Overwrites weights from a name → tensor map holding every variable.
    pub fn load_weights(&self, tensors: &std::collections::HashMap<String, Tensor>) -> Result<()> {
        for (name, var) in self.named_vars() {
            let t = tensors
                .get(&name)
                .ok_or_else(|| Error::Consistency(format!("weights payload is missing `{name}`")))?;
            if t.dims() != var.dims() {
                return Err(Error::Consistency(format!("weights payload `{name}` has shape {:?}", t.dims())));
            }
            var.set(t)?;
        }
        Ok(())
    }

    /// All weights as a safetensors byte buffer.
    pub fn weights_bytes(&self) -> Result<Vec<u8>> {
        let vars = self.named_vars();
        let tensors: Vec<(String, Tensor)> = vars.iter().map(|(n, v)| (n.clone(), v.as_tensor().clone())).collect();
        safetensors::serialize(tensors.iter().map(|(n, t)| (n.as_str(), t)), None)
            .map_err(|e| Error::Training(format!("serialising weights: {e}")))
    }

    /// Logits for a `(N, 3, S, S)` batch. Dropout is active only when an RNG is supplied.
    pub fn forward(&self, x: &Tensor, mut dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let mut h = x.clone();
        for stage in &self.convs {
            for conv in stage {
                h = conv.forward(&h)?.relu()?;
            }
            h = h.max_pool2d(2)?;
        }
        h = adaptive_avg_pool2d(&h, self.spec.pool_to)?.flatten_from(1)?;
        let last = self.linears.len() - 1;
        for (i, layer) in self.linears.iter().enumerate() {
            h = layer.forward(&h)?;
            if i < last {
                h = h.relu()?;
                if let Some(rng) = dropout_rng.as_deref_mut() {
                    h = dropout(&h, self.spec.dropout, rng)?;
                }
            }
        }
        Ok(h)
    }

    /// `(N, 3, S, S)` input tensor, normalised for the configured weights.
    pub fn input_tensor(&self, images: &[RgbImage]) -> Result<Tensor> {
        let size = self.config.input_size;
        let plane = (size * size) as usize;
        let mut data = vec![0f32; images.len() * 3 * plane];
        for (n, img) in images.iter().enumerate() {
            let resized;
            let img = if img.dimensions() == (size, size) {
                img
            } else {
                resized = imageops::resize(img, size, size, FilterType::Triangle);
                &resized
            };
            let base = n * 3 * plane;
            for (i, px) in img.pixels().enumerate() {
                for c in 0..3 {
                    let v = px[c] as f32 / 255.0;
                    data[base + c * plane + i] = if self.config.pretrained {
                        (v - IMAGENET_MEAN[c]) / IMAGENET_STD[c]
                    } else {
                        v
                    };
                }
            }
        }
        Ok(Tensor::from_vec(data, (images.len(), 3, size as usize, size as usize), &self.device)?)
    }

    /// Softmax probabilities and argmax for 500x500 crops.
    pub fn predict(&self, crops: &[RgbImage]) -> Result<Vec<Prediction>> {
        if let Some(bad) = crops.iter().find(|c| c.dimensions() != (CROP_SIZE, CROP_SIZE)) {
            return Err(Error::Argument(format!(
                "crops must be {CROP_SIZE}x{CROP_SIZE}, got {}x{}",
                bad.width(),
                bad.height()
            )));
        }
        let mut out = Vec::with_capacity(crops.len());
        for chunk in crops.chunks(32) {
            let logits = self.forward(&self.input_tensor(chunk)?, None)?;
            let probs = candle_nn::ops::softmax(&logits, D::Minus1)?.to_vec2::<f32>()?;
            for p in probs {
                let class_index = argmax(&p);
                out.push(Prediction {
                    class_index,
                    probabilities: p,
                });
            }
        }
        Ok(out)
    }
}

pub(crate) fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn dropout(x: &Tensor, p: f32, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    if p <= 0.0 {
        return Ok(x.clone());
    }
    let keep = 1.0 - p;
    let mask: Vec<f32> = (0..x.elem_count())
        .map(|_| if rng.random::<f32>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    let mask = Tensor::from_vec(mask, x.shape(), x.device())?;
    Ok(x.mul(&mask)?)
}

/// Average pooling to an `out x out` grid with PyTorch's bin boundaries.
fn adaptive_avg_pool2d(x: &Tensor, out: usize) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    if h == out && w == out {
        return Ok(x.clone());
    }
    if h == w && h % out == 0 {
        return Ok(x.avg_pool2d(h / out)?);
    }
    let bins = |len: usize, i: usize| (i * len / out, ((i + 1) * len).div_ceil(out));
    let mut rows = Vec::with_capacity(out);
    for i in 0..out {
        let (y0, y1) = bins(h, i);
        let band = x.narrow(2, y0, y1 - y0)?;
        let mut cells = Vec::with_capacity(out);
        for j in 0..out {
            let (x0, x1) = bins(w, j);
            cells.push(band.narrow(3, x0, x1 - x0)?.mean_keepdim(2)?.mean_keepdim(3)?);
        }
        rows.push(Tensor::cat(&cells, 3)?);
    }
    Ok(Tensor::cat(&rows, 2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini(num_classes: usize, input_size: u32) -> ModelConfig {
        ModelConfig {
            backbone: "vgg_mini".into(),
            pretrained: false,
            num_classes,
            input_size,
            weights_path: None,
        }
    }

    fn crops(n: usize) -> Vec<RgbImage> {
        (0..n)
            .map(|k| RgbImage::from_fn(CROP_SIZE, CROP_SIZE, |x, y| image::Rgb([(x + k as u32) as u8, y as u8, (x ^ y) as u8])))
            .collect()
    }

    #[test]
    fn unknown_backbone() {
        let cfg = ModelConfig { backbone: "resnet50".into(), ..mini(4, 32) };
        assert!(matches!(build_classifier(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn missing_pretrained_weights() {
        let cfg = ModelConfig {
            pretrained: true,
            weights_path: Some("/nonexistent/vgg_mini.safetensors".into()),
            ..mini(4, 32)
        };
        let err = build_classifier(&cfg, 0).unwrap_err();
        assert!(matches!(err, Error::WeightsUnavailable { .. }));
        assert!(err.to_string().contains("/nonexistent/vgg_mini.safetensors"));
    }

    #[test]
    fn probabilities_are_normalised() {
        for k in [4, 2] {
            let model = build_classifier(&mini(k, 32), 1).unwrap();
            let preds = model.predict(&crops(3)).unwrap();
            for p in preds {
                assert_eq!(p.probabilities.len(), k);
                let s: f32 = p.probabilities.iter().sum();
                assert!((s - 1.0).abs() < 1e-5);
                assert_eq!(p.class_index, argmax(&p.probabilities));
            }
        }
    }

    #[test]
    fn prediction_is_deterministic() {
        let model = build_classifier(&mini(4, 32), 5).unwrap();
        let batch = crops(2);
        assert_eq!(model.predict(&batch).unwrap(), model.predict(&batch).unwrap());
        let again = build_classifier(&mini(4, 32), 5).unwrap();
        assert_eq!(model.predict(&batch).unwrap(), again.predict(&batch).unwrap());
    }

    #[test]
    fn wrong_crop_shape() {
        let model = build_classifier(&mini(4, 32), 1).unwrap();
        let small = vec![RgbImage::new(64, 64)];
        assert!(matches!(model.predict(&small), Err(Error::Argument(_))));
    }

    #[test]
    fn class_count_changes_only_head_shape() {
        let four = build_classifier(&mini(4, 32), 1).unwrap();
        let two = build_classifier(&mini(2, 32), 1).unwrap();
        let head = four.spec().head_name();
        let (a, b) = (four.named_vars(), two.named_vars());
        assert_eq!(a.len(), b.len());
        for ((na, va), (nb, vb)) in a.iter().zip(&b) {
            assert_eq!(na, nb);
            if na.starts_with(&head) {
                assert_ne!(va.dims(), vb.dims());
            } else {
                assert_eq!(va.dims(), vb.dims(), "{na}");
            }
        }
    }

    #[test]
    fn pretrained_differs_from_scratch_except_head_shape() {
        let dir = tempfile::tempdir().unwrap();
        let weights = dir.path().join("vgg_mini.safetensors");
        let donor = Classifier::random(&mini(4, 32), 99).unwrap();
        std::fs::write(&weights, donor.weights_bytes().unwrap()).unwrap();

        let scratch = build_classifier(&mini(4, 32), 3).unwrap();
        let pretrained = build_classifier(
            &ModelConfig {
                pretrained: true,
                weights_path: Some(weights),
                ..mini(4, 32)
            },
            3,
        )
        .unwrap();
        let head = scratch.spec().head_name();
        for ((name, a), (_, b)) in scratch.named_vars().iter().zip(pretrained.named_vars().iter()) {
            let same = a.as_tensor().eq(b.as_tensor()).unwrap().min_all().unwrap().to_scalar::<u8>().unwrap() == 1;
            if name.starts_with(&head) {
                assert!(same, "head {name} should keep the seeded init");
            } else if name.ends_with(".weight") {
                assert!(!same, "{name} should come from the pretrained file");
            }
        }
    }

    #[test]
    fn adaptive_pool_uneven_bins() {
        let x = Tensor::arange(0f32, 25.0, &Device::Cpu).unwrap().reshape((1, 1, 5, 5)).unwrap();
        let y = adaptive_avg_pool2d(&x, 2).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        // bins rows/cols {0..3, 2..5}
        let cell = |r0: usize, c0: usize| {
            let mut s = 0.0;
            for r in r0..r0 + 3 {
                for c in c0..c0 + 3 {
                    s += (r * 5 + c) as f32;
                }
            }
            s / 9.0
        };
        assert_eq!(y, vec![cell(0, 0), cell(0, 2), cell(2, 0), cell(2, 2)]);
    }

    #[test]
    fn input_size_floor() {
        assert!(mini(4, 8).validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
    }
}
