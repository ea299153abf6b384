//! Optical input encoding and output decoding.
//!
//! The encoder interferes two amplitude-modulated beams in a 50:50
//! directional coupler so that the top port carries `a1 + j a2`. Decoders
//! turn complex output fields into real class scores, either through
//! photodiodes behind a learnable head or by coherent detection against a
//! reference beam.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complex::{C64, J};
use crate::error::{Error, Result};
use crate::photonic::{count_mzis, count_unitary_mzis, directional_coupler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Last layer widened to one output per class; photodiode readings are
    /// the logits.
    #[default]
    Merge,
    /// Half-width last layer followed by a learnable dense layer.
    Linear,
    /// Full-width last layer followed by a learnable unitary mesh.
    Unitary,
    /// Half-width last layer read out by interference with a reference.
    Coherent,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 4] = [
        DecoderKind::Merge,
        DecoderKind::Linear,
        DecoderKind::Unitary,
        DecoderKind::Coherent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DecoderKind::Merge => "merge",
            DecoderKind::Linear => "linear",
            DecoderKind::Unitary => "unitary",
            DecoderKind::Coherent => "coherent",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "merge" => Ok(DecoderKind::Merge),
            "linear" => Ok(DecoderKind::Linear),
            "unitary" => Ok(DecoderKind::Unitary),
            "coherent" => Ok(DecoderKind::Coherent),
            other => Err(Error::Config(format!(
                "unknown decoder '{other}' (expected merge|linear|unitary|coherent)"
            ))),
        }
    }
}

/// Amplitude of the reference beam used for coherent detection.
pub const DEFAULT_REFERENCE_AMPLITUDE: f64 = 1.0;

/// Top output port of the DC encoder fed with `sqrt(2) a1` and `sqrt(2) a2`
/// in phase. The coupler's cross path supplies the quarter-wave shift that
/// lands `a2` on the imaginary axis.
pub fn encode_dc(a1: f64, a2: f64) -> C64 {
    encode_dc_ports(a1, a2).0
}

/// Both output ports of the encoder; the bottom one carries `j a1 + a2`
/// and is discarded in hardware.
pub fn encode_dc_ports(a1: f64, a2: f64) -> (C64, C64) {
    let s = std::f64::consts::SQRT_2;
    let top_in = C64::new(s * a1, 0.0);
    let bottom_in = C64::new(s * a2, 0.0);
    let dc = directional_coupler();
    let top = dc[0][0] * top_in + dc[0][1] * bottom_in;
    let bottom = dc[1][0] * top_in + dc[1][1] * bottom_in;
    (top, bottom)
}

/// Recovers `z` from three photodiode readings: `|z|^2`, `|z + R|^2` and
/// `|z + jR|^2`.
pub fn coherent_decode(i_z: f64, i_zr: f64, i_zjr: f64, reference: f64) -> Result<C64> {
    if !(reference > 0.0) {
        return Err(Error::Config(format!(
            "coherent detection needs a positive reference amplitude, got {reference}"
        )));
    }
    let r2 = reference * reference;
    Ok(C64::new(
        (i_zr - i_z - r2) / (2.0 * reference),
        (i_zjr - i_z - r2) / (2.0 * reference),
    ))
}

/// The three readings a coherent receiver takes for field `z`.
pub fn coherent_measure(z: C64, reference: f64) -> (f64, f64, f64) {
    (
        z.norm_sqr(),
        (z + reference).norm_sqr(),
        (z + J * reference).norm_sqr(),
    )
}

/// Output structure of a network head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub kind: DecoderKind,
    pub classes: usize,
    /// Complex outputs of the last weight layer.
    pub last_out: usize,
    /// Width of the extra learnable layer, if any (`(in, out)`).
    pub extra_layer: Option<(usize, usize)>,
    /// Requires a reference beam and post-processing.
    pub needs_reference: bool,
    /// Intensity readings per output field.
    pub readings_per_output: usize,
}

/// Half the class count, rounded up.
pub fn half_classes(classes: usize) -> usize {
    classes.div_ceil(2)
}

pub fn build_head(classes: usize, kind: DecoderKind) -> Result<HeadSpec> {
    if classes == 0 {
        return Err(Error::Config("head needs at least one class".into()));
    }
    let k = half_classes(classes);
    let spec = match kind {
        DecoderKind::Merge => HeadSpec {
            kind,
            classes,
            last_out: classes,
            extra_layer: None,
            needs_reference: false,
            readings_per_output: 1,
        },
        DecoderKind::Linear => HeadSpec {
            kind,
            classes,
            last_out: k,
            extra_layer: Some((k, classes)),
            needs_reference: false,
            readings_per_output: 1,
        },
        DecoderKind::Unitary => HeadSpec {
            kind,
            classes,
            last_out: classes,
            extra_layer: Some((classes, classes)),
            needs_reference: false,
            readings_per_output: 1,
        },
        DecoderKind::Coherent => HeadSpec {
            kind,
            classes,
            last_out: k,
            extra_layer: None,
            needs_reference: true,
            readings_per_output: 3,
        },
    };
    Ok(spec)
}

impl HeadSpec {
    /// MZIs of the last weight layer plus the head, given the last layer's
    /// input width.
    pub fn mzi_count(&self, last_in: usize) -> u64 {
        let base = count_mzis(self.last_out, last_in);
        base + match (self.kind, self.extra_layer) {
            (DecoderKind::Linear, Some((i, o))) => count_mzis(o, i),
            (DecoderKind::Unitary, Some((n, _))) => count_unitary_mzis(n),
            _ => 0,
        }
    }
}

/// Extra MZIs of `kind` over the coherent-detection head.
pub fn decoder_area_delta(kind: DecoderKind, classes: usize, last_in: usize) -> Result<i64> {
    let head = build_head(classes, kind)?;
    let baseline = build_head(classes, DecoderKind::Coherent)?;
    Ok(head.mzi_count(last_in) as i64 - baseline.mzi_count(last_in) as i64)
}
