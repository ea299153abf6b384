//! Optical device accounting: MZIs, directional couplers and phase
//! shifters per layer, and the reduction against the conventional network.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::DecoderKind;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ResolvedLayer};
use crate::photonic::{count_mzis, count_unitary_mzis};

/// Devices making up one MZI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DeviceProfile {
    /// Two couplers, two phase shifters.
    #[default]
    #[serde(rename = "2dc2ps")]
    TwoDcTwoPs,
    /// Two couplers, one phase shifter.
    #[serde(rename = "2dc1ps")]
    TwoDcOnePs,
}

impl DeviceProfile {
    pub fn dc_per_mzi(&self) -> u64 {
        2
    }

    pub fn ps_per_mzi(&self) -> u64 {
        match self {
            DeviceProfile::TwoDcTwoPs => 2,
            DeviceProfile::TwoDcOnePs => 1,
        }
    }
}

impl fmt::Display for DeviceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceProfile::TwoDcTwoPs => "2dc2ps",
            DeviceProfile::TwoDcOnePs => "2dc1ps",
        })
    }
}

impl FromStr for DeviceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2dc2ps" => Ok(DeviceProfile::TwoDcTwoPs),
            "2dc1ps" => Ok(DeviceProfile::TwoDcOnePs),
            other => Err(Error::Config(format!("unknown device profile '{other}' (2dc2ps|2dc1ps)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerArea {
    pub index: usize,
    pub label: String,
    /// Output and input width of the weight matrix (conv layers: GEMM form).
    pub rows: usize,
    pub cols: usize,
    pub mzi: u64,
    /// Output phase-screen shifters (included in `ps`, not part of any MZI).
    pub screen_ps: u64,
    pub dc: u64,
    pub ps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub model: String,
    pub flavor: String,
    pub scheme: Option<String>,
    pub decoder: DecoderKind,
    pub profile: DeviceProfile,
    pub layers: Vec<LayerArea>,
    /// One coupler per complex input port when inputs are assigned.
    pub encoder_dc: u64,
    pub mzi_count: u64,
    pub dc_count: u64,
    pub ps_count: u64,
    /// Share of `ps_count` spent on mesh phase screens.
    pub screen_ps_count: u64,
    pub baseline_mzi_count: u64,
    pub reduction_ratio: f64,
    /// Merge decoder only: the reduction if the last layer were not widened.
    pub reduction_without_output_doubling: Option<f64>,
    pub needs_reference_signal: bool,
    pub notes: Vec<String>,
}

/// `(rows, cols, mzis, screen phase shifters)` per weight layer.
fn layer_cost(layer: &ResolvedLayer) -> Option<(usize, usize, u64, u64)> {
    let svd = |m: usize, n: usize| (count_mzis(m, n), (m + n) as u64);
    match *layer {
        ResolvedLayer::Dense { inputs, outputs, .. } => {
            let (mzi, ps) = svd(outputs, inputs);
            Some((outputs, inputs, mzi, ps))
        }
        ResolvedLayer::Conv { c_in, c_out, kernel, .. } => {
            let n = c_in * kernel * kernel;
            let (mzi, ps) = svd(c_out, n);
            Some((c_out, n, mzi, ps))
        }
        ResolvedLayer::Residual { c_in, c_out, .. } => {
            let (a, pa) = svd(c_out, c_in * 9);
            let (b, pb) = svd(c_out, c_out * 9);
            let (p, pp) = if c_in != c_out { svd(c_out, c_in) } else { (0, 0) };
            Some((c_out, c_in * 9, a + b + p, pa + pb + pp))
        }
        ResolvedLayer::UnitaryHead { width } => {
            Some((width, width, count_unitary_mzis(width), width as u64))
        }
        _ => None,
    }
}

fn total_mzis(model: &ModelSpec) -> Result<u64> {
    Ok(model.resolve()?.layers.iter().filter_map(layer_cost).map(|c| c.2).sum())
}

/// Device counts for `model` and its reduction against the conventional
/// network (same architecture, real inputs, one output per class).
pub fn area_report(model: &ModelSpec, profile: DeviceProfile) -> Result<AreaReport> {
    let resolved = model.resolve()?;
    let mut layers = Vec::new();
    for (index, layer) in resolved.layers.iter().enumerate() {
        if let Some((rows, cols, mzi, screen_ps)) = layer_cost(layer) {
            layers.push(LayerArea {
                index,
                label: layer.label(),
                rows,
                cols,
                mzi,
                screen_ps,
                dc: mzi * profile.dc_per_mzi(),
                ps: mzi * profile.ps_per_mzi() + screen_ps,
            });
        }
    }
    let encoder_dc = if model.scheme.is_some() { resolved.input_ports() as u64 } else { 0 };
    let mzi_count: u64 = layers.iter().map(|l| l.mzi).sum();
    let dc_count = layers.iter().map(|l| l.dc).sum::<u64>() + encoder_dc;
    let ps_count = layers.iter().map(|l| l.ps).sum();
    let screen_ps_count = layers.iter().map(|l| l.screen_ps).sum();
    let baseline_mzi_count = total_mzis(&model.baseline())?;
    let reduction_ratio = 1.0 - mzi_count as f64 / baseline_mzi_count as f64;

    let reduction_without_output_doubling = if model.decoder == DecoderKind::Merge && model.scheme.is_some() {
        let mut narrow = model.clone();
        narrow.decoder = DecoderKind::Coherent;
        Some(1.0 - total_mzis(&narrow)? as f64 / baseline_mzi_count as f64)
    } else {
        None
    };

    let mut notes = Vec::new();
    if model.arch.layers.iter().any(|l| matches!(l, crate::model::LayerSpec::Residual { .. })) {
        notes.push(
            "resnet assumptions: 3x3 stem (16 ch), stages of basic blocks at 16/32/64 channels, \
             stride 2 entering stages 2 and 3, 1x1 projection shortcut counted when channels change, \
             global average pooling, one dense classifier"
                .to_string(),
        );
    }
    notes.push("conv layers counted as one GEMM matrix (c_out) x (c_in*k*k)".to_string());
    notes.push(format!(
        "device profile {profile}: {} DC + {} PS per MZI; phase screens add PS only",
        profile.dc_per_mzi(),
        profile.ps_per_mzi()
    ));
    if resolved.head.needs_reference {
        notes.push(
            "coherent detection: needs a reference signal, 3 readings per output and post-processing".to_string(),
        );
    }
    Ok(AreaReport {
        model: model.arch.name.clone(),
        flavor: model.flavor.to_string(),
        scheme: model.scheme.map(|s| s.kind().code().to_string()),
        decoder: model.decoder,
        profile,
        layers,
        encoder_dc,
        mzi_count,
        dc_count,
        ps_count,
        screen_ps_count,
        baseline_mzi_count,
        reduction_ratio,
        reduction_without_output_doubling,
        needs_reference_signal: resolved.head.needs_reference,
        notes,
    })
}

/// `x` in units of 10^4, one decimal, as table entries are printed.
pub fn in_ten_thousands(x: u64) -> String {
    format!("{:.1}", x as f64 / 1e4)
}

impl AreaReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["layer", "label", "rows", "cols", "mzi", "mzi_x1e4", "dc", "ps", "screen_ps"])
            .map_err(io)?;
        for l in &self.layers {
            out.write_record([
                l.index.to_string(),
                l.label.clone(),
                l.rows.to_string(),
                l.cols.to_string(),
                l.mzi.to_string(),
                in_ten_thousands(l.mzi),
                l.dc.to_string(),
                l.ps.to_string(),
                l.screen_ps.to_string(),
            ])
            .map_err(io)?;
        }
        out.write_record([
            "encoder".to_string(),
            "dc encoder".into(),
            String::new(),
            String::new(),
            "0".into(),
            "0.0".into(),
            self.encoder_dc.to_string(),
            "0".into(),
            "0".into(),
        ])
        .map_err(io)?;
        out.write_record([
            "total".to_string(),
            format!("reduction {:.2}% vs baseline {}", self.reduction_ratio * 100.0, self.baseline_mzi_count),
            String::new(),
            String::new(),
            self.mzi_count.to_string(),
            in_ten_thousands(self.mzi_count),
            self.dc_count.to_string(),
            self.ps_count.to_string(),
            self.screen_ps_count.to_string(),
        ])
        .map_err(io)?;
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} [{}{}, decoder {}, {}]\n  MZIs {} ({} x1e4), baseline {} ({} x1e4), reduction {:.2}%\n  DCs {} (encoder {}), PSs {}",
            self.model,
            self.flavor,
            self.scheme.as_deref().map(|s| format!(" {s}")).unwrap_or_default(),
            self.decoder,
            self.profile,
            self.mzi_count,
            in_ten_thousands(self.mzi_count),
            self.baseline_mzi_count,
            in_ten_thousands(self.baseline_mzi_count),
            self.reduction_ratio * 100.0,
            self.dc_count,
            self.encoder_dc,
            self.ps_count,
        );
        if let Some(r) = self.reduction_without_output_doubling {
            s.push_str(&format!("\n  reduction without output doubling {:.2}%", r * 100.0));
        }
        for n in &self.notes {
            s.push_str(&format!("\n  note: {n}"));
        }
        s
    }
}
