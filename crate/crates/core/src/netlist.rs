//! Whole-network compilation to MZI meshes, netlist files and optical
//! inference with a verification pass against software inference.
//!
//! Every dense or convolution weight becomes an SVD circuit (input mesh,
//! attenuators, output mesh, global scale); a unitary head is already a mesh
//! and is copied as is. In verification failures a stage index counts the
//! input-mesh stages first, then the output-mesh stages.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::codec::{coherent_decode, coherent_measure, DecoderKind};
use crate::complex::{ComplexMatrix, C64};
use crate::data::Dataset;
use crate::error::{dims, Error, Result};
use crate::model::ModelSpec;
use crate::nn::{encode_batch, Network};
use crate::photonic::{compile_matrix, MziMesh, PhotonicLayer};

/// Largest logit deviation that still counts as a faithful compilation.
pub const VERIFY_TOLERANCE: f64 = 1e-5;

/// Angle difference above which a recompiled stage is reported as changed.
const STAGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerNetlist {
    Svd {
        layer: usize,
        label: String,
        #[serde(flatten)]
        circuit: PhotonicLayer,
    },
    Unitary {
        layer: usize,
        label: String,
        mesh: MziMesh,
    },
}

impl LayerNetlist {
    pub fn layer(&self) -> usize {
        match self {
            LayerNetlist::Svd { layer, .. } | LayerNetlist::Unitary { layer, .. } => *layer,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            LayerNetlist::Svd { label, .. } | LayerNetlist::Unitary { label, .. } => label,
        }
    }

    pub fn mzi_count(&self) -> usize {
        match self {
            LayerNetlist::Svd { circuit, .. } => circuit.mzi_count(),
            LayerNetlist::Unitary { mesh, .. } => mesh.mzi_count(),
        }
    }

    /// Optical result for each input column, rescaled by the global scale so
    /// it is comparable with the software layer output.
    pub fn apply(&self, x: &Array2<C64>) -> Result<Array2<C64>> {
        match self {
            LayerNetlist::Svd { circuit, .. } => {
                let mut y = circuit.forward_columns(x.clone())?;
                let s = circuit.global_scale;
                y.mapv_inplace(|v| v * s);
                Ok(y)
            }
            LayerNetlist::Unitary { mesh, .. } => {
                let mut y = x.clone();
                mesh.forward_columns(&mut y)?;
                Ok(y)
            }
        }
    }

    fn stages(&self) -> Vec<(f64, f64)> {
        let take = |m: &MziMesh| m.stages.iter().map(|s| (s.theta, s.phi)).collect::<Vec<_>>();
        match self {
            LayerNetlist::Svd { circuit, .. } => [take(&circuit.v_mesh), take(&circuit.u_mesh)].concat(),
            LayerNetlist::Unitary { mesh, .. } => take(mesh),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledNetwork {
    pub model: ModelSpec,
    pub layers: Vec<LayerNetlist>,
}

impl CompiledNetwork {
    pub fn mzi_count(&self) -> usize {
        self.layers.iter().map(LayerNetlist::mzi_count).sum()
    }

    fn layer(&self, index: usize) -> Option<&LayerNetlist> {
        self.layers.iter().find(|l| l.layer() == index)
    }
}

fn compile_layer(net: &Network, index: usize) -> Result<LayerNetlist> {
    let label = net.resolved().layers[index].label();
    if let Some(mesh) = net.unitary_mesh(index) {
        return Ok(LayerNetlist::Unitary { layer: index, label, mesh });
    }
    let (_, w) = net
        .weight_matrices()
        .into_iter()
        .find(|(i, _)| *i == index)
        .ok_or_else(|| Error::Config(format!("layer {index} has no weights")))?;
    let circuit = compile_matrix(&ComplexMatrix::from_array(w.clone())?)?;
    Ok(LayerNetlist::Svd { layer: index, label, circuit })
}

/// Compiles every weight layer of `net`.
pub fn compile_network(net: &Network) -> Result<CompiledNetwork> {
    compile_network_threaded(net, 1)
}

/// [`compile_network`] with layers spread over up to `threads` threads.
/// The result does not depend on the thread count.
pub fn compile_network_threaded(net: &Network, threads: usize) -> Result<CompiledNetwork> {
    let indices: Vec<usize> = (0..net.resolved().layers.len())
        .filter(|&i| net.resolved().layers[i].has_weights())
        .collect();
    let threads = threads.clamp(1, indices.len().max(1));
    let layers = if threads == 1 {
        indices.iter().map(|&i| compile_layer(net, i)).collect::<Result<Vec<_>>>()?
    } else {
        let mut slots: Vec<Option<Result<LayerNetlist>>> = (0..indices.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            for (t, chunk) in slots.chunks_mut(indices.len().div_ceil(threads)).enumerate() {
                let start = t * indices.len().div_ceil(threads);
                let indices = &indices;
                scope.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(compile_layer(net, indices[start + k]));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every slot filled")).collect::<Result<Vec<_>>>()?
    };
    Ok(CompiledNetwork { model: net.spec.clone(), layers })
}

fn check_model(net: &Network, compiled: &CompiledNetwork) -> Result<()> {
    if compiled.model != net.spec {
        return Err(Error::Config("netlist was compiled for a different model".into()));
    }
    for (i, l) in net.resolved().layers.iter().enumerate() {
        if l.has_weights() && compiled.layer(i).is_none() {
            return Err(Error::Config(format!("netlist has no circuit for layer {i} ({})", l.label())));
        }
    }
    Ok(())
}

/// Class scores of the optical network for one encoded batch. Coherent heads
/// are read through the three-measurement receiver.
pub fn simulate_batch(net: &Network, compiled: &CompiledNetwork, x: &crate::nn::FieldMap) -> Result<Array2<f64>> {
    check_model(net, compiled)?;
    let mut apply = |i: usize, input: &Array2<C64>| compiled.layer(i).expect("checked").apply(input);
    let fields = net.fields_with(x, &mut apply)?;
    optical_readout(net, fields)
}

fn optical_readout(net: &Network, mut fields: Array2<C64>) -> Result<Array2<f64>> {
    if net.spec.decoder == DecoderKind::Coherent {
        let r = net.spec.reference_amplitude;
        for z in fields.iter_mut() {
            let (a, b, c) = coherent_measure(*z, r);
            *z = coherent_decode(a, b, c, r)?;
        }
    }
    Ok(net.readout(&fields))
}

/// Outcome of comparing optical and software inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub samples: usize,
    pub max_logit_deviation: f64,
    /// Largest deviation of each compiled layer's output from the software
    /// product on the same input, `(layer, deviation)`.
    pub layer_deviation: Vec<(usize, f64)>,
    pub tolerance: f64,
    pub passed: bool,
}

impl Verification {
    /// The offending layer and stage as an error, if verification failed.
    pub fn into_result(self, net: &Network, compiled: &CompiledNetwork) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        let (layer, _) = self
            .layer_deviation
            .iter()
            .cloned()
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        Err(Error::Verification {
            layer,
            stage: locate_stage(net, compiled, layer),
            deviation: self.max_logit_deviation,
        })
    }
}

/// First stage whose angles differ from a fresh compilation of the layer's
/// software weights.
pub fn locate_stage(net: &Network, compiled: &CompiledNetwork, layer: usize) -> Option<usize> {
    let stored = compiled.layer(layer)?.stages();
    let fresh = compile_layer(net, layer).ok()?.stages();
    if stored.len() != fresh.len() {
        return Some(stored.len().min(fresh.len()));
    }
    stored.iter().zip(&fresh).position(|(a, b)| {
        let d = |x: f64, y: f64| {
            let r = (x - y).rem_euclid(std::f64::consts::TAU);
            r.min(std::f64::consts::TAU - r)
        };
        d(a.0, b.0) > STAGE_TOLERANCE || d(a.1, b.1) > STAGE_TOLERANCE
    })
}

/// Runs `indices` of `data` through both the compiled and the software
/// network.
pub fn verify(net: &Network, compiled: &CompiledNetwork, data: &Dataset, indices: &[usize]) -> Result<Verification> {
    check_model(net, compiled)?;
    let mut layer_dev: Vec<(usize, f64)> = compiled.layers.iter().map(|l| (l.layer(), 0.0)).collect();
    let mut max_dev: f64 = 0.0;
    let weights = net.weight_matrices();
    for chunk in indices.chunks(64) {
        let x = encode_batch(&net.spec, data, chunk)?;
        let software = net.forward(&x)?;
        let mut apply = |i: usize, input: &Array2<C64>| -> Result<Array2<C64>> {
            let optical = compiled.layer(i).expect("checked").apply(input)?;
            let reference = match weights.iter().find(|(j, _)| *j == i) {
                Some((_, w)) => w.dot(input),
                None => {
                    let mut y = input.clone();
                    net.unitary_mesh(i).expect("unitary layer").forward_columns(&mut y)?;
                    y
                }
            };
            if optical.dim() != reference.dim() {
                return Err(dims("compiled layer output", format!("{:?}", reference.dim()), format!("{:?}", optical.dim())));
            }
            let dev = optical.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let slot = layer_dev.iter_mut().find(|(j, _)| *j == i).expect("layer listed");
            slot.1 = slot.1.max(dev);
            Ok(optical)
        };
        let optical = optical_readout(net, net.fields_with(&x, &mut apply)?)?;
        for (a, b) in optical.iter().zip(&software) {
            let d = (a - b).abs();
            if !d.is_finite() {
                return Err(Error::NonFinite("simulated logits"));
            }
            max_dev = max_dev.max(d);
        }
    }
    Ok(Verification {
        samples: indices.len(),
        max_logit_deviation: max_dev,
        layer_deviation: layer_dev,
        tolerance: VERIFY_TOLERANCE,
        passed: max_dev <= VERIFY_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkIndex {
    model: ModelSpec,
    layers: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    layer: usize,
    label: String,
    file: String,
    mzi: usize,
}

pub const INDEX_FILE: &str = "network.json";

pub fn layer_file_name(layer: usize) -> String {
    format!("layer{layer:02}.json")
}

/// Writes `network.json` plus one JSON netlist per compiled layer.
pub fn write_netlists(compiled: &CompiledNetwork, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for l in &compiled.layers {
        let file = layer_file_name(l.layer());
        fs::write(dir.join(&file), serde_json::to_vec_pretty(l)?)?;
        entries.push(IndexEntry {
            layer: l.layer(),
            label: l.label().to_string(),
            file,
            mzi: l.mzi_count(),
        });
    }
    let index = NetworkIndex { model: compiled.model.clone(), layers: entries };
    fs::write(dir.join(INDEX_FILE), serde_json::to_vec_pretty(&index)?)?;
    Ok(())
}

pub fn read_netlists(dir: impl AsRef<Path>) -> Result<CompiledNetwork> {
    let dir = dir.as_ref();
    let index: NetworkIndex = serde_json::from_slice(&fs::read(dir.join(INDEX_FILE))?)?;
    let mut layers = Vec::with_capacity(index.layers.len());
    for e in &index.layers {
        let l: LayerNetlist = serde_json::from_slice(&fs::read(dir.join(&e.file))?)?;
        if l.layer() != e.layer {
            return Err(Error::Config(format!("{} holds layer {}, index says {}", e.file, l.layer(), e.layer)));
        }
        if let LayerNetlist::Svd { circuit, .. } = &l {
            circuit.validate()?;
        }
        layers.push(l);
    }
    Ok(CompiledNetwork { model: index.model, layers })
}
