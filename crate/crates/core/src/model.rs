//! Model architectures and their resolution into concrete complex layer
//! widths once an assignment scheme and decoder are chosen.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentScheme;
use crate::codec::{build_head, DecoderKind, HeadSpec, DEFAULT_REFERENCE_AMPLITUDE};
use crate::complex::{Activation, Detection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Complex network fed with real-valued inputs.
    #[default]
    Cvnn,
    /// Complex network fed with assigned (packed) inputs.
    Scvnn,
    /// Real network: imaginary parts pinned at zero.
    Rvnn,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Cvnn => "cvnn",
            Flavor::Scvnn => "scvnn",
            Flavor::Rvnn => "rvnn",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cvnn" => Ok(Flavor::Cvnn),
            "scvnn" => Ok(Flavor::Scvnn),
            "rvnn" => Ok(Flavor::Rvnn),
            other => Err(Error::Config(format!("unknown flavor '{other}'"))),
        }
    }
}

/// One layer of a conventional (uncompressed) architecture. Input widths
/// are inferred from the preceding layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        out: usize,
    },
    Conv {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: usize,
    },
    MaxPool {
        size: usize,
    },
    GlobalAvgPool,
    Flatten,
    /// Basic residual block: two 3×3 convolutions, plus a 1×1 projection
    /// shortcut when the channel count changes. Area accounting only.
    Residual {
        out_channels: usize,
        #[serde(default = "one")]
        stride: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub name: String,
    /// `(H, W, C)` of the real input image.
    pub input: (usize, usize, usize),
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    pub fn zoo(name: &str) -> Result<Self> {
        let dense = |outs: &[usize]| outs.iter().map(|&out| LayerSpec::Dense { out }).collect();
        let arch = |name: &str, input, classes, layers| Architecture {
            name: name.to_string(),
            input,
            classes,
            layers,
        };
        Ok(match name {
            "fcnn" => arch(name, (28, 28, 1), 10, dense(&[100, 10])),
            "fcnn-m1" => arch(name, (28, 28, 1), 10, dense(&[400, 10])),
            "fcnn-m2" => arch(name, (14, 14, 1), 10, dense(&[70, 10])),
            "fcnn-m3" => arch(name, (28, 28, 1), 10, dense(&[400, 128, 10])),
            "fcnn-m4" => arch(name, (14, 14, 1), 10, dense(&[160, 160, 10])),
            "lenet5" => arch(
                name,
                (32, 32, 3),
                10,
                vec![
                    LayerSpec::Conv { out_channels: 6, kernel: 5, stride: 1, pad: 0 },
                    LayerSpec::MaxPool { size: 2 },
                    LayerSpec::Conv { out_channels: 16, kernel: 5, stride: 1, pad: 0 },
                    LayerSpec::MaxPool { size: 2 },
                    LayerSpec::Flatten,
                    LayerSpec::Dense { out: 120 },
                    LayerSpec::Dense { out: 84 },
                    LayerSpec::Dense { out: 10 },
                ],
            ),
            "resnet20" => resnet(name, 3, 10),
            "resnet32" => resnet(name, 5, 100),
            "resnet56" => resnet(name, 9, 10),
            other => return Err(Error::Config(format!("unknown model '{other}'"))),
        })
    }

    pub const ZOO: [&'static str; 9] = [
        "fcnn", "fcnn-m1", "fcnn-m2", "fcnn-m3", "fcnn-m4", "lenet5", "resnet20", "resnet32", "resnet56",
    ];

    /// Whether the trainer can run this architecture.
    pub fn trainable(&self) -> bool {
        !self.layers.iter().any(|l| matches!(l, LayerSpec::Residual { .. }))
    }
}

/// CIFAR-style ResNet: 3×3 stem with 16 channels, three stages of
/// `blocks` basic blocks at 16/32/64 channels (stride 2 entering stages 2
/// and 3), global average pooling and one dense classifier.
fn resnet(name: &str, blocks: usize, classes: usize) -> Architecture {
    let mut layers = vec![LayerSpec::Conv { out_channels: 16, kernel: 3, stride: 1, pad: 1 }];
    for (stage, ch) in [16, 32, 64].into_iter().enumerate() {
        for b in 0..blocks {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            layers.push(LayerSpec::Residual { out_channels: ch, stride });
        }
    }
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::Dense { out: classes });
    Architecture {
        name: name.to_string(),
        input: (32, 32, 3),
        classes,
        layers,
    }
}

/// Architecture plus everything needed to build the complex network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub flavor: Flavor,
    pub scheme: Option<AssignmentScheme>,
    pub decoder: DecoderKind,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub detection: Detection,
    #[serde(default = "default_reference")]
    pub reference_amplitude: f64,
}

fn default_reference() -> f64 {
    DEFAULT_REFERENCE_AMPLITUDE
}

/// Zoo model with the usual scheme for its flavor: spatial interlace for
/// fully connected models, channel lossless for convolutional ones.
pub fn zoo(name: &str, flavor: Flavor, decoder: DecoderKind) -> Result<ModelSpec> {
    let arch = Architecture::zoo(name)?;
    let scheme = (flavor == Flavor::Scvnn).then(|| AssignmentScheme::new(default_scheme(&arch)));
    Ok(ModelSpec {
        arch,
        flavor,
        scheme,
        decoder,
        activation: Activation::default(),
        detection: Detection::default(),
        reference_amplitude: DEFAULT_REFERENCE_AMPLITUDE,
    })
}

pub fn default_scheme(arch: &Architecture) -> crate::assignment::SchemeKind {
    use crate::assignment::SchemeKind;
    if arch.layers.iter().all(|l| matches!(l, LayerSpec::Dense { .. } | LayerSpec::Flatten)) {
        SchemeKind::SpatialInterlace
    } else {
        SchemeKind::ChannelLossless
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenseRole {
    Hidden,
    /// Final weight layer before the decoder.
    Output,
    /// Learnable linear decoder.
    Decoder,
}

/// A layer with all widths fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedLayer {
    Dense {
        inputs: usize,
        outputs: usize,
        role: DenseRole,
        activated: bool,
    },
    Conv {
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        in_hw: (usize, usize),
        out_hw: (usize, usize),
        activated: bool,
    },
    MaxPool {
        size: usize,
        channels: usize,
        in_hw: (usize, usize),
        out_hw: (usize, usize),
    },
    GlobalAvgPool {
        channels: usize,
        in_hw: (usize, usize),
    },
    Residual {
        c_in: usize,
        c_out: usize,
        stride: usize,
        in_hw: (usize, usize),
        out_hw: (usize, usize),
    },
    UnitaryHead {
        width: usize,
    },
}

impl ResolvedLayer {
    pub fn label(&self) -> String {
        match *self {
            ResolvedLayer::Dense { inputs, outputs, role, .. } => match role {
                DenseRole::Decoder => format!("decoder {inputs}->{outputs}"),
                _ => format!("dense {inputs}->{outputs}"),
            },
            ResolvedLayer::Conv { c_in, c_out, kernel, .. } => format!("conv {c_in}->{c_out} k{kernel}"),
            ResolvedLayer::MaxPool { size, .. } => format!("maxpool {size}"),
            ResolvedLayer::GlobalAvgPool { .. } => "global avgpool".into(),
            ResolvedLayer::Residual { c_in, c_out, stride, .. } => {
                format!("residual {c_in}->{c_out} s{stride}")
            }
            ResolvedLayer::UnitaryHead { width } => format!("unitary {width}x{width}"),
        }
    }

    pub fn has_weights(&self) -> bool {
        matches!(
            self,
            ResolvedLayer::Dense { .. }
                | ResolvedLayer::Conv { .. }
                | ResolvedLayer::Residual { .. }
                | ResolvedLayer::UnitaryHead { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedModel {
    /// Complex input `(C, H, W)`.
    pub input: (usize, usize, usize),
    pub layers: Vec<ResolvedLayer>,
    pub head: HeadSpec,
}

impl ResolvedModel {
    /// Complex input ports of the first weight layer.
    pub fn input_ports(&self) -> usize {
        self.layers
            .iter()
            .find_map(|l| match *l {
                ResolvedLayer::Dense { inputs, .. } => Some(inputs),
                ResolvedLayer::Conv { c_in, kernel, .. } => Some(c_in * kernel * kernel),
                ResolvedLayer::Residual { c_in, .. } => Some(c_in * 9),
                _ => None,
            })
            .unwrap_or(0)
    }
}

fn halve(n: usize, what: &str) -> Result<usize> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidShape(format!("{what} of {n} cannot be halved")));
    }
    Ok(n / 2)
}

fn conv_out(size: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if size + 2 * pad < kernel || stride == 0 {
        return Err(Error::InvalidShape(format!(
            "kernel {kernel} (pad {pad}, stride {stride}) does not fit input {size}"
        )));
    }
    Ok((size + 2 * pad - kernel) / stride + 1)
}

impl ModelSpec {
    pub fn classes(&self) -> usize {
        self.arch.classes
    }

    /// The conventional network this model is measured against.
    pub fn baseline(&self) -> ModelSpec {
        ModelSpec {
            arch: self.arch.clone(),
            flavor: Flavor::Cvnn,
            scheme: None,
            decoder: DecoderKind::Merge,
            activation: self.activation,
            detection: self.detection,
            reference_amplitude: self.reference_amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.flavor, self.scheme.is_some()) {
            (Flavor::Scvnn, false) => Err(Error::Config("scvnn models need an assignment scheme".into())),
            (Flavor::Cvnn | Flavor::Rvnn, true) => Err(Error::Config(format!(
                "{} models take real inputs and no assignment scheme",
                self.flavor
            ))),
            _ => Ok(()),
        }?;
        if self.flavor == Flavor::Rvnn && self.decoder != DecoderKind::Merge {
            return Err(Error::Config("rvnn models use the merge (direct) head only".into()));
        }
        if !(self.reference_amplitude > 0.0) {
            return Err(Error::Config("reference amplitude must be positive".into()));
        }
        match self.arch.layers.iter().rev().find(|l| matches!(l, LayerSpec::Dense { .. })) {
            Some(LayerSpec::Dense { out }) if *out == self.arch.classes => Ok(()),
            Some(LayerSpec::Dense { out }) => Err(Error::Config(format!(
                "last dense layer has {out} outputs for {} classes",
                self.arch.classes
            ))),
            _ => Err(Error::Config("architecture has no dense classifier".into())),
        }
    }

    /// Fixes every layer width. With an assignment scheme, hidden dense
    /// widths are halved, and channel schemes also halve every convolution's
    /// output channels.
    pub fn resolve(&self) -> Result<ResolvedModel> {
        self.validate()?;
        let (h, w, c) = self.arch.input;
        let (h, w, c) = match &self.scheme {
            Some(s) => s.output_shape((h, w, c))?,
            None => (h, w, c),
        };
        let compress = self.scheme.is_some();
        let channel_compress = self.scheme.map(|s| !s.kind().is_spatial()).unwrap_or(false);
        let head = build_head(self.arch.classes, self.decoder)?;
        let last_dense = self
            .arch
            .layers
            .iter()
            .rposition(|l| matches!(l, LayerSpec::Dense { .. }))
            .expect("validated");

        let (mut ch, mut hw) = (c, (h, w));
        let mut layers = Vec::with_capacity(self.arch.layers.len() + 1);
        for (idx, layer) in self.arch.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv { out_channels, kernel, stride, pad } => {
                    let c_out = if channel_compress { halve(out_channels, "conv channels")? } else { out_channels };
                    let out_hw = (conv_out(hw.0, kernel, stride, pad)?, conv_out(hw.1, kernel, stride, pad)?);
                    layers.push(ResolvedLayer::Conv {
                        c_in: ch,
                        c_out,
                        kernel,
                        stride,
                        pad,
                        in_hw: hw,
                        out_hw,
                        activated: true,
                    });
                    ch = c_out;
                    hw = out_hw;
                }
                LayerSpec::Residual { out_channels, stride } => {
                    let c_out = if channel_compress { halve(out_channels, "block channels")? } else { out_channels };
                    let out_hw = (conv_out(hw.0, 3, stride, 1)?, conv_out(hw.1, 3, stride, 1)?);
                    layers.push(ResolvedLayer::Residual { c_in: ch, c_out, stride, in_hw: hw, out_hw });
                    ch = c_out;
                    hw = out_hw;
                }
                LayerSpec::MaxPool { size } => {
                    if size == 0 || hw.0 < size || hw.1 < size {
                        return Err(Error::InvalidShape(format!("pool {size} on {}x{}", hw.0, hw.1)));
                    }
                    let out_hw = (hw.0 / size, hw.1 / size);
                    layers.push(ResolvedLayer::MaxPool { size, channels: ch, in_hw: hw, out_hw });
                    hw = out_hw;
                }
                LayerSpec::GlobalAvgPool => {
                    layers.push(ResolvedLayer::GlobalAvgPool { channels: ch, in_hw: hw });
                    hw = (1, 1);
                }
                LayerSpec::Flatten => {}
                LayerSpec::Dense { out } => {
                    let inputs = ch * hw.0 * hw.1;
                    let (outputs, role) = if idx == last_dense {
                        (head.last_out, DenseRole::Output)
                    } else if compress {
                        (halve(out, "dense width")?, DenseRole::Hidden)
                    } else {
                        (out, DenseRole::Hidden)
                    };
                    layers.push(ResolvedLayer::Dense {
                        inputs,
                        outputs,
                        role,
                        activated: idx != last_dense,
                    });
                    ch = outputs;
                    hw = (1, 1);
                }
            }
        }
        if last_dense + 1 != self.arch.layers.len() {
            return Err(Error::Config("the dense classifier must be the last layer".into()));
        }
        match (head.kind, head.extra_layer) {
            (DecoderKind::Linear, Some((i, o))) => layers.push(ResolvedLayer::Dense {
                inputs: i,
                outputs: o,
                role: DenseRole::Decoder,
                activated: false,
            }),
            (DecoderKind::Unitary, Some((n, _))) => layers.push(ResolvedLayer::UnitaryHead { width: n }),
            _ => {}
        }
        Ok(ResolvedModel {
            input: (c, h, w),
            layers,
            head,
        })
    }
}

/// Parses `name[-cvnn|-scvnn|-rvnn]`; without a suffix the flavor is
/// `default`.
pub fn parse_model_name(name: &str, default: Flavor) -> Result<(String, Flavor)> {
    for suffix in ["cvnn", "scvnn", "rvnn"] {
        if let Some(base) = name.strip_suffix(&format!("-{suffix}")) {
            return Ok((base.to_string(), suffix.parse()?));
        }
    }
    Ok((name.to_string(), default))
}
