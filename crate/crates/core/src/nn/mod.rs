//! Complex-valued networks on optical fields: dense and convolutional
//! layers (convolution as one GEMM over unrolled patches), split max
//! pooling, global average pooling, a trainable unitary mesh head, and
//! photodiode or coherent readout.
//!
//! Feature maps are stored as `channels x (batch * height * width)` so that
//! every weight layer is a single complex matrix product. Gradients pack
//! `dL/dRe + j dL/dIm`; for `Y = W X` that gives `dW = dY X^H` and
//! `dX = W^H dY`, the same numbers real backprop on the realified matrix
//! produces with paired entries tied.

pub mod loss;
pub mod optim;
pub mod train;

use ndarray::{Array2, Array3, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::assignment::{assign, encode_real};
use crate::codec::DecoderKind;
use crate::complex::{Activation, Detection, C64, ZERO};
use crate::data::Dataset;
use crate::error::{dims, Error, Result};
use crate::model::{Flavor, ModelSpec, ResolvedLayer, ResolvedModel};
use crate::photonic::{mzi_mat2, mzi_mat2_grad, MziMesh, MziSetting};

/// A batch of complex feature maps, `channels x (batch * height * width)`,
/// columns ordered by sample, then row, then column.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub data: Array2<C64>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub batch: usize,
}

impl FieldMap {
    pub fn new(data: Array2<C64>, channels: usize, height: usize, width: usize, batch: usize) -> Result<Self> {
        if data.dim() != (channels, batch * height * width) {
            return Err(dims(
                "field map",
                format!("{channels}x{}", batch * height * width),
                format!("{:?}", data.dim()),
            ));
        }
        Ok(FieldMap {
            data,
            channels,
            height,
            width,
            batch,
        })
    }

    /// Stacks `H x W x C` complex images.
    pub fn from_images(images: &[Array3<C64>]) -> Result<Self> {
        let (h, w, c) = images.first().map(|i| i.dim()).unwrap_or((1, 1, 1));
        let hw = h * w;
        let mut data = Array2::zeros((c, images.len() * hw));
        for (b, img) in images.iter().enumerate() {
            if img.dim() != (h, w, c) {
                return Err(dims("batch image", format!("{:?}", (h, w, c)), format!("{:?}", img.dim())));
            }
            for ((y, x, ch), &v) in img.indexed_iter() {
                data[[ch, b * hw + y * w + x]] = v;
            }
        }
        FieldMap::new(data, c, h, w, images.len())
    }

    /// One column per sample, features ordered channel-major.
    pub fn flattened(&self) -> Array2<C64> {
        let hw = self.height * self.width;
        if hw == 1 {
            return self.data.clone();
        }
        Array2::from_shape_fn((self.channels * hw, self.batch), |(f, b)| {
            self.data[[f / hw, b * hw + f % hw]]
        })
    }
}

fn unflatten(g: &Array2<C64>, channels: usize, hw: usize) -> Array2<C64> {
    let batch = g.ncols();
    Array2::from_shape_fn((channels, batch * hw), |(c, col)| g[[c * hw + col % hw, col / hw]])
}

/// Encodes real `H x W x C` images in [0, 1] the way `spec` feeds them to
/// the optics: an assignment scheme packs pairs into complex values, the
/// conventional flavors put every pixel on the real axis.
pub fn encode_images(spec: &ModelSpec, images: &[ArrayView3<'_, f64>]) -> Result<FieldMap> {
    let fields = images
        .iter()
        .map(|img| {
            if img.dim() != spec.arch.input {
                return Err(dims("input image", format!("{:?}", spec.arch.input), format!("{:?}", img.dim())));
            }
            Ok(match &spec.scheme {
                Some(s) => assign(*img, s)?.data,
                None => encode_real(*img),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FieldMap::from_images(&fields)
}

pub fn encode_batch(spec: &ModelSpec, data: &Dataset, indices: &[usize]) -> Result<FieldMap> {
    let images: Vec<Array3<f64>> = indices.iter().map(|&i| data.image(i)).collect();
    let views: Vec<_> = images.iter().map(|i| i.view()).collect();
    encode_images(spec, &views)
}

/// A trainable tensor. Real-only parameters (phases, real-valued network
/// weights) keep a zero imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<C64>,
    pub real_only: bool,
}

/// Waveguide pair of every stage of a triangular mesh, in the order the
/// decomposition emits them.
pub fn triangular_pairs(width: usize) -> Vec<usize> {
    (1..width).rev().flat_map(|r| 0..r).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    resolved: ResolvedModel,
    /// First parameter of each layer, if it has any.
    slots: Vec<Option<usize>>,
    pub params: Vec<Param>,
}

enum Cached {
    Dense { input: Array2<C64>, pre: Option<Array2<C64>>, in_hw: usize, in_channels: usize },
    Conv { cols: Array2<C64>, pre: Option<Array2<C64>> },
    MaxPool { re_idx: Vec<usize>, im_idx: Vec<usize>, in_dim: (usize, usize) },
    Gap { hw: usize },
    Unitary { out: Array2<C64> },
}

/// Evaluates one weight layer: `(layer index, input columns) -> output`.
pub type LayerApply<'a> = dyn FnMut(usize, &Array2<C64>) -> Result<Array2<C64>> + 'a;

/// A forward pass awaiting its loss.
pub struct Pass {
    cache: Vec<Cached>,
    fields: Array2<C64>,
    pub logits: Array2<f64>,
    batch: usize,
}

/// Output of one loss evaluation.
pub struct StepOutput {
    pub loss: f64,
    pub ce: f64,
    pub kd: f64,
    /// `batch x classes`.
    pub logits: Array2<f64>,
    pub grads: Vec<Array2<C64>>,
}

fn glorot<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize, real: bool) -> Array2<C64> {
    let normal = Normal::new(0.0, (1.0 / (fan_in + fan_out) as f64).sqrt()).expect("positive variance");
    Array2::from_shape_simple_fn((rows, cols), || {
        let re = normal.sample(rng);
        let im = if real { 0.0 } else { normal.sample(rng) };
        C64::new(re, im)
    })
}

fn conj_t(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// `g x^H` computed as `conj(conj(g) x^T)`, which conjugates the small
/// factor instead of copying the large one.
fn outer_grad(g: &Array2<C64>, x: &Array2<C64>) -> Array2<C64> {
    let mut out = g.mapv(|z| z.conj()).dot(&x.t());
    out.mapv_inplace(|z| z.conj());
    out
}

impl Network {
    /// Builds the network for `spec` with freshly initialized weights.
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        let resolved = spec.resolve()?;
        let real = spec.flavor == Flavor::Rvnn;
        let mut params = Vec::new();
        let mut slots = Vec::new();
        for (i, layer) in resolved.layers.iter().enumerate() {
            let first = params.len();
            match *layer {
                ResolvedLayer::Dense { inputs, outputs, .. } => params.push(Param {
                    name: format!("layer{i}.weight"),
                    value: glorot(rng, outputs, inputs, inputs, outputs, real),
                    real_only: real,
                }),
                ResolvedLayer::Conv { c_in, c_out, kernel, .. } => {
                    let k2 = kernel * kernel;
                    params.push(Param {
                        name: format!("layer{i}.kernel"),
                        value: glorot(rng, c_out, c_in * k2, c_in * k2, c_out * k2, real),
                        real_only: real,
                    })
                }
                ResolvedLayer::UnitaryHead { width } => {
                    let stages = triangular_pairs(width).len();
                    let angles = |name: &str, n: usize, rng: &mut R| Param {
                        name: format!("layer{i}.{name}"),
                        value: Array2::from_shape_simple_fn((n, 1), || {
                            C64::new(rng.random_range(0.0..std::f64::consts::TAU), 0.0)
                        }),
                        real_only: true,
                    };
                    let theta = angles("theta", stages, rng);
                    let phi = angles("phi", stages, rng);
                    params.extend([theta, phi]);
                    params.push(Param {
                        name: format!("layer{i}.phase_screen"),
                        value: Array2::zeros((width, 1)),
                        real_only: true,
                    });
                }
                ResolvedLayer::Residual { .. } => {
                    return Err(Error::Config(format!(
                        "{}: residual blocks are supported for area counting only",
                        spec.arch.name
                    )))
                }
                _ => {}
            }
            slots.push((params.len() > first).then_some(first));
        }
        Ok(Network {
            spec,
            resolved,
            slots,
            params,
        })
    }

    /// Rebuilds a network from stored parameter values.
    pub fn from_params(spec: ModelSpec, values: Vec<Array2<C64>>) -> Result<Self> {
        let mut net = Network::new(spec, &mut ChaCha8Rng::seed_from_u64(0))?;
        if values.len() != net.params.len() {
            return Err(dims("parameter count", net.params.len(), values.len()));
        }
        for (p, v) in net.params.iter_mut().zip(values) {
            if p.value.dim() != v.dim() {
                return Err(dims("parameter shape", format!("{:?}", p.value.dim()), format!("{:?}", v.dim())));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite("parameter"));
            }
            p.value = v;
        }
        Ok(net)
    }

    pub fn resolved(&self) -> &ResolvedModel {
        &self.resolved
    }

    pub fn classes(&self) -> usize {
        self.spec.arch.classes
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len() * if p.real_only { 1 } else { 2 }).sum()
    }

    /// `(layer index, weight matrix)` for every matrix-valued layer.
    pub fn weight_matrices(&self) -> Vec<(usize, &Array2<C64>)> {
        self.resolved
            .layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                ResolvedLayer::Dense { .. } | ResolvedLayer::Conv { .. } => {
                    Some((i, &self.params[self.slots[i].expect("weight slot")].value))
                }
                _ => None,
            })
            .collect()
    }

    /// The trained mesh of a unitary head layer.
    pub fn unitary_mesh(&self, layer: usize) -> Option<MziMesh> {
        let ResolvedLayer::UnitaryHead { width } = self.resolved.layers.get(layer)? else {
            return None;
        };
        let p = self.slots[layer]?;
        let (theta, phi, screen) = (&self.params[p].value, &self.params[p + 1].value, &self.params[p + 2].value);
        Some(MziMesh {
            width: *width,
            stages: triangular_pairs(*width)
                .into_iter()
                .enumerate()
                .map(|(s, i)| MziSetting {
                    i,
                    theta: theta[[s, 0]].re,
                    phi: phi[[s, 0]].re,
                })
                .collect(),
            phase_screen: screen.column(0).iter().map(|z| z.re).collect(),
        })
    }

    fn check_input(&self, x: &FieldMap) -> Result<()> {
        let (c, h, w) = self.resolved.input;
        if (x.channels, x.height, x.width) != (c, h, w) {
            return Err(dims(
                "network input",
                format!("{c}x{h}x{w}"),
                format!("{}x{}x{}", x.channels, x.height, x.width),
            ));
        }
        Ok(())
    }

    fn activation(&self) -> Activation {
        self.spec.activation
    }

    /// Complex fields at the head, `outputs x batch`.
    pub fn fields(&self, x: &FieldMap) -> Result<Array2<C64>> {
        self.run(x, None, None)
    }

    /// Like [`Network::fields`], but every weight layer (dense, conv GEMM,
    /// unitary mesh) is evaluated by `apply(layer index, input columns)`.
    /// Pooling, activations and flattening stay as in software.
    pub fn fields_with(&self, x: &FieldMap, apply: &mut LayerApply<'_>) -> Result<Array2<C64>> {
        self.run(x, None, Some(apply))
    }

    fn run(&self, x: &FieldMap, mut cache: Option<&mut Vec<Cached>>, mut apply: Option<&mut LayerApply<'_>>) -> Result<Array2<C64>> {
        self.check_input(x)?;
        let act = self.activation();
        let batch = x.batch;
        let mut cur = x.data.clone();
        let (mut ch, mut hw) = (x.channels, x.height * x.width);
        for (i, layer) in self.resolved.layers.iter().enumerate() {
            match *layer {
                ResolvedLayer::Dense { activated, .. } => {
                    let input = if hw > 1 {
                        FieldMap::new(cur, ch, hw, 1, batch)?.flattened()
                    } else {
                        cur
                    };
                    let w = &self.params[self.slots[i].expect("slot")].value;
                    if w.ncols() != input.nrows() {
                        return Err(dims("dense input", w.ncols(), input.nrows()));
                    }
                    let mut z = match apply.as_deref_mut() {
                        Some(f) => f(i, &input)?,
                        None => w.dot(&input),
                    };
                    let pre = activated.then(|| z.clone());
                    if activated {
                        z.mapv_inplace(|v| act.apply(v));
                    }
                    if let Some(c) = cache.as_deref_mut() {
                        c.push(Cached::Dense { input, pre, in_hw: hw, in_channels: ch });
                    }
                    ch = z.nrows();
                    hw = 1;
                    cur = z;
                }
                ResolvedLayer::Conv { c_in, kernel, stride, pad, in_hw, out_hw, activated, .. } => {
                    let cols = im2col(&cur, c_in, in_hw, kernel, stride, pad, out_hw, batch);
                    let mut z = match apply.as_deref_mut() {
                        Some(f) => f(i, &cols)?,
                        None => self.params[self.slots[i].expect("slot")].value.dot(&cols),
                    };
                    let pre = activated.then(|| z.clone());
                    if activated {
                        z.mapv_inplace(|v| act.apply(v));
                    }
                    if let Some(c) = cache.as_deref_mut() {
                        c.push(Cached::Conv { cols, pre });
                    }
                    ch = z.nrows();
                    hw = out_hw.0 * out_hw.1;
                    cur = z;
                }
                ResolvedLayer::MaxPool { size, in_hw, out_hw, .. } => {
                    let (out, re_idx, im_idx) = split_max_pool(&cur, ch, in_hw, size, out_hw, batch);
                    if let Some(c) = cache.as_deref_mut() {
                        c.push(Cached::MaxPool { re_idx, im_idx, in_dim: cur.dim() });
                    }
                    hw = out_hw.0 * out_hw.1;
                    cur = out;
                }
                ResolvedLayer::GlobalAvgPool { .. } => {
                    let out = Array2::from_shape_fn((ch, batch), |(c, b)| {
                        (0..hw).map(|p| cur[[c, b * hw + p]]).sum::<C64>() / hw as f64
                    });
                    if let Some(c) = cache.as_deref_mut() {
                        c.push(Cached::Gap { hw });
                    }
                    hw = 1;
                    cur = out;
                }
                ResolvedLayer::UnitaryHead { .. } => {
                    match apply.as_deref_mut() {
                        Some(f) => cur = f(i, &cur)?,
                        None => self.unitary_mesh(i).expect("unitary layer").forward_columns(&mut cur)?,
                    }
                    if let Some(c) = cache.as_deref_mut() {
                        c.push(Cached::Unitary { out: cur.clone() });
                    }
                }
                ResolvedLayer::Residual { .. } => unreachable!("rejected at construction"),
            }
        }
        Ok(cur)
    }

    /// Class scores from head fields: photodiode readings, or for coherent
    /// detection the real and imaginary parts of each field in turn.
    pub fn readout(&self, fields: &Array2<C64>) -> Array2<f64> {
        let classes = self.classes();
        let batch = fields.ncols();
        if self.spec.decoder == DecoderKind::Coherent {
            Array2::from_shape_fn((batch, classes), |(b, j)| {
                let z = fields[[j / 2, b]];
                if j % 2 == 0 {
                    z.re
                } else {
                    z.im
                }
            })
        } else {
            let det = self.spec.detection;
            Array2::from_shape_fn((batch, classes), |(b, j)| det.apply(fields[[j, b]]))
        }
    }

    fn readout_backward(&self, fields: &Array2<C64>, g: &Array2<f64>) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros(fields.raw_dim());
        if self.spec.decoder == DecoderKind::Coherent {
            for ((b, j), &v) in g.indexed_iter() {
                let z = &mut out[[j / 2, b]];
                if j % 2 == 0 {
                    z.re += v;
                } else {
                    z.im += v;
                }
            }
        } else {
            let det: Detection = self.spec.detection;
            for ((b, j), &v) in g.indexed_iter() {
                out[[j, b]] = det.backward(fields[[j, b]], v);
            }
        }
        out
    }

    /// Class scores, `batch x classes`.
    pub fn forward(&self, x: &FieldMap) -> Result<Array2<f64>> {
        Ok(self.readout(&self.fields(x)?))
    }

    /// Forward pass that keeps what backpropagation needs.
    pub fn begin(&self, x: &FieldMap) -> Result<Pass> {
        let mut cache = Vec::with_capacity(self.resolved.layers.len());
        let fields = self.run(x, Some(&mut cache), None)?;
        let logits = self.readout(&fields);
        Ok(Pass {
            cache,
            fields,
            logits,
            batch: x.batch,
        })
    }

    /// Loss `CE + alpha * KL(self || teacher)` for a pass started with
    /// [`Network::begin`], and gradients for every parameter. Without a
    /// teacher the loss is plain cross-entropy.
    pub fn finish(&self, pass: Pass, labels: &[usize], teacher: Option<(&Array2<f64>, f64, f64)>) -> Result<StepOutput> {
        let Pass { cache, fields, logits, batch } = pass;
        let (ce, mut g_logits) = loss::cross_entropy(logits.view(), labels)?;
        let mut kd = 0.0;
        if let Some((t_logits, alpha, temperature)) = teacher {
            let (k, g) = loss::kd_loss_grad(logits.view(), t_logits.view(), temperature)?;
            kd = k;
            g_logits.scaled_add(alpha, &g);
        }
        let loss = ce + teacher.map(|(_, a, _)| a).unwrap_or(0.0) * kd;
        let g_fields = self.readout_backward(&fields, &g_logits);
        let grads = self.backward(cache, g_fields, batch)?;
        Ok(StepOutput {
            loss,
            ce,
            kd,
            logits,
            grads,
        })
    }

    pub fn loss_and_grad(
        &self,
        x: &FieldMap,
        labels: &[usize],
        teacher: Option<(&Array2<f64>, f64, f64)>,
    ) -> Result<StepOutput> {
        self.finish(self.begin(x)?, labels, teacher)
    }

    fn backward(&self, mut cache: Vec<Cached>, mut g: Array2<C64>, batch: usize) -> Result<Vec<Array2<C64>>> {
        let act = self.activation();
        let mut grads: Vec<Array2<C64>> = self.params.iter().map(|p| Array2::zeros(p.value.raw_dim())).collect();
        for (i, layer) in self.resolved.layers.iter().enumerate().rev() {
            let cached = cache.pop().expect("one cache entry per layer");
            match (layer, cached) {
                (ResolvedLayer::Dense { .. }, Cached::Dense { input, pre, in_hw, in_channels }) => {
                    if let Some(pre) = pre {
                        ndarray::Zip::from(&mut g).and(&pre).for_each(|g, &z| *g = act.backward(z, *g));
                    }
                    let slot = self.slots[i].expect("slot");
                    grads[slot] = outer_grad(&g, &input);
                    let gx = conj_t(&self.params[slot].value).dot(&g);
                    g = if in_hw > 1 { unflatten(&gx, in_channels, in_hw) } else { gx };
                }
                (
                    &ResolvedLayer::Conv { c_in, kernel, stride, pad, in_hw, out_hw, .. },
                    Cached::Conv { cols, pre },
                ) => {
                    if let Some(pre) = pre {
                        ndarray::Zip::from(&mut g).and(&pre).for_each(|g, &z| *g = act.backward(z, *g));
                    }
                    let slot = self.slots[i].expect("slot");
                    grads[slot] = outer_grad(&g, &cols);
                    let gcols = conj_t(&self.params[slot].value).dot(&g);
                    g = col2im(&gcols, c_in, in_hw, kernel, stride, pad, out_hw, batch);
                }
                (ResolvedLayer::MaxPool { .. }, Cached::MaxPool { re_idx, im_idx, in_dim }) => {
                    let mut gin = Array2::<C64>::zeros(in_dim);
                    let flat = gin.as_slice_mut().expect("standard layout");
                    for (o, gv) in g.iter().enumerate() {
                        flat[re_idx[o]].re += gv.re;
                        flat[im_idx[o]].im += gv.im;
                    }
                    g = gin;
                }
                (ResolvedLayer::GlobalAvgPool { .. }, Cached::Gap { hw }) => {
                    let ch = g.nrows();
                    g = Array2::from_shape_fn((ch, batch * hw), |(c, col)| g[[c, col / hw]] / hw as f64);
                }
                (&ResolvedLayer::UnitaryHead { width }, Cached::Unitary { out }) => {
                    let slot = self.slots[i].expect("slot");
                    g = self.unitary_backward(slot, width, out, g, &mut grads);
                }
                _ => unreachable!("cache entries follow the layer order"),
            }
        }
        for (gr, p) in grads.iter_mut().zip(&self.params) {
            if p.real_only {
                gr.mapv_inplace(|z| C64::new(z.re, 0.0));
            }
        }
        Ok(grads)
    }

    /// Walks the mesh backwards, undoing each unitary stage to recover its
    /// input instead of storing every intermediate field.
    fn unitary_backward(
        &self,
        slot: usize,
        width: usize,
        mut y: Array2<C64>,
        mut g: Array2<C64>,
        grads: &mut [Array2<C64>],
    ) -> Array2<C64> {
        let theta = &self.params[slot].value;
        let phi = &self.params[slot + 1].value;
        let screen = &self.params[slot + 2].value;
        for k in 0..width {
            let e = C64::from_polar(1.0, -screen[[k, 0]].re);
            let mut d = 0.0;
            for (yv, gv) in y.row_mut(k).iter_mut().zip(g.row_mut(k).iter_mut()) {
                // d y / d psi = j y
                d += (gv.conj() * C64::new(-yv.im, yv.re)).re;
                *yv *= e;
                *gv *= e;
            }
            grads[slot + 2][[k, 0]] = C64::new(d, 0.0);
        }
        let pairs = triangular_pairs(width);
        for (s, &p) in pairs.iter().enumerate().rev() {
            let (th, ph) = (theta[[s, 0]].re, phi[[s, 0]].re);
            let t = mzi_mat2(th, ph);
            let (dt, dp) = mzi_mat2_grad(th, ph);
            let (mut d_theta, mut d_phi) = (0.0, 0.0);
            for b in 0..y.ncols() {
                let (o0, o1) = (y[[p, b]], y[[p + 1, b]]);
                let i0 = t[0][0].conj() * o0 + t[1][0].conj() * o1;
                let i1 = t[0][1].conj() * o0 + t[1][1].conj() * o1;
                let (g0, g1) = (g[[p, b]], g[[p + 1, b]]);
                d_theta += (g0.conj() * (dt[0][0] * i0 + dt[0][1] * i1) + g1.conj() * (dt[1][0] * i0 + dt[1][1] * i1)).re;
                d_phi += (g0.conj() * (dp[0][0] * i0 + dp[0][1] * i1) + g1.conj() * (dp[1][0] * i0 + dp[1][1] * i1)).re;
                y[[p, b]] = i0;
                y[[p + 1, b]] = i1;
                g[[p, b]] = t[0][0].conj() * g0 + t[1][0].conj() * g1;
                g[[p + 1, b]] = t[0][1].conj() * g0 + t[1][1].conj() * g1;
            }
            grads[slot][[s, 0]] = C64::new(d_theta, 0.0);
            grads[slot + 1][[s, 0]] = C64::new(d_phi, 0.0);
        }
        g
    }

    pub fn param_values_mut(&mut self) -> Vec<&mut Array2<C64>> {
        self.params.iter_mut().map(|p| &mut p.value).collect()
    }
}

/// Unrolls `k x k` patches: row `(c, ky, kx)`, one column per output pixel.
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    x: &Array2<C64>,
    c_in: usize,
    (h, w): (usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
    (oh, ow): (usize, usize),
    batch: usize,
) -> Array2<C64> {
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let n_in = batch * h * w;
    let mut cols = Array2::zeros((c_in * k * k, batch * oh * ow));
    for c in 0..c_in {
        for ky in 0..k {
            for kx in 0..k {
                let mut row = cols.row_mut((c * k + ky) * k + kx);
                let rs = row.as_slice_mut().expect("contiguous row");
                for b in 0..batch {
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = c * n_in + (b * h + iy as usize) * w;
                        let out = (b * oh + oy) * ow;
                        for ox in 0..ow {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                rs[out + ox] = xs[base + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    cols: &Array2<C64>,
    c_in: usize,
    (h, w): (usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
    (oh, ow): (usize, usize),
    batch: usize,
) -> Array2<C64> {
    let mut x = Array2::<C64>::zeros((c_in, batch * h * w));
    let n_in = batch * h * w;
    let xs = x.as_slice_mut().expect("standard layout");
    for c in 0..c_in {
        for ky in 0..k {
            for kx in 0..k {
                let row = cols.row((c * k + ky) * k + kx);
                for b in 0..batch {
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = c * n_in + (b * h + iy as usize) * w;
                        let out = (b * oh + oy) * ow;
                        for ox in 0..ow {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                xs[base + ix as usize] += row[out + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// Max pooling applied separately to real and imaginary parts. Returns the
/// pooled map and, per output element, the flat input index of each
/// part's maximum.
fn split_max_pool(
    x: &Array2<C64>,
    channels: usize,
    (h, w): (usize, usize),
    size: usize,
    (oh, ow): (usize, usize),
    batch: usize,
) -> (Array2<C64>, Vec<usize>, Vec<usize>) {
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let n_in = batch * h * w;
    let mut out = Array2::from_elem((channels, batch * oh * ow), ZERO);
    let mut re_idx = vec![0; out.len()];
    let mut im_idx = vec![0; out.len()];
    let os = out.as_slice_mut().expect("standard layout");
    for c in 0..channels {
        for b in 0..batch {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = c * batch * oh * ow + (b * oh + oy) * ow + ox;
                    let (mut br, mut bi) = (usize::MAX, usize::MAX);
                    for dy in 0..size {
                        for dx in 0..size {
                            let idx = c * n_in + (b * h + oy * size + dy) * w + ox * size + dx;
                            if br == usize::MAX || xs[idx].re > xs[br].re {
                                br = idx;
                            }
                            if bi == usize::MAX || xs[idx].im > xs[bi].im {
                                bi = idx;
                            }
                        }
                    }
                    os[o] = C64::new(xs[br].re, xs[bi].im);
                    re_idx[o] = br;
                    im_idx[o] = bi;
                }
            }
        }
    }
    (out, re_idx, im_idx)
}

#[cfg(test)]
mod tests;
