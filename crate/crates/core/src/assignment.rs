//! Real-to-complex data assignment: packing two real pixels (or channels)
//! into the real and imaginary parts of one complex input.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::complex::C64;
use crate::error::{Error, Result};
use crate::model::{Flavor, ModelSpec, ResolvedLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    SpatialInterlace,
    SpatialHalfHalf,
    SpatialSymmetric,
    ChannelLossless,
    ChannelRemapping,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::SpatialInterlace,
        SchemeKind::SpatialHalfHalf,
        SchemeKind::SpatialSymmetric,
        SchemeKind::ChannelLossless,
        SchemeKind::ChannelRemapping,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            SchemeKind::SpatialInterlace => "si",
            SchemeKind::SpatialHalfHalf => "sh",
            SchemeKind::SpatialSymmetric => "ss",
            SchemeKind::ChannelLossless => "cl",
            SchemeKind::ChannelRemapping => "cr",
        }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(
            self,
            SchemeKind::SpatialInterlace | SchemeKind::SpatialHalfHalf | SchemeKind::SpatialSymmetric
        )
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown assignment '{s}' (expected si|sh|ss|cl|cr)")))
    }
}

/// Luminance and red-green opponent rows.
pub const DEFAULT_REMAP: [[f64; 3]; 2] = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.5, -0.5, 0.0]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentScheme {
    kind: SchemeKind,
    remap: Option<[[f64; 3]; 2]>,
    /// Pair columns `(2c, 2c+1)` instead of rows for spatial interlace.
    #[serde(default)]
    horizontal: bool,
}

impl AssignmentScheme {
    /// Scheme without a remap matrix; channel remapping gets the default one.
    pub fn new(kind: SchemeKind) -> Self {
        let remap = (kind == SchemeKind::ChannelRemapping).then_some(DEFAULT_REMAP);
        Self {
            kind,
            remap,
            horizontal: false,
        }
    }

    pub fn remapping(matrix: [[f64; 3]; 2]) -> Result<Self> {
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("remap matrix"));
        }
        Ok(Self {
            kind: SchemeKind::ChannelRemapping,
            remap: Some(matrix),
            horizontal: false,
        })
    }

    /// Horizontal pairing for spatial interlace.
    pub fn with_horizontal_pairs(mut self, horizontal: bool) -> Self {
        self.horizontal = horizontal && self.kind == SchemeKind::SpatialInterlace;
        self
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn remap(&self) -> Option<&[[f64; 3]; 2]> {
        self.remap.as_ref()
    }

    pub fn horizontal(&self) -> bool {
        self.horizontal
    }

    fn validate(&self) -> Result<()> {
        match (self.kind, self.remap.is_some()) {
            (SchemeKind::ChannelRemapping, false) => {
                Err(Error::Config("channel remapping requires a remap matrix".into()))
            }
            (SchemeKind::ChannelRemapping, true) | (_, false) => Ok(()),
            (k, true) => Err(Error::Config(format!("scheme {k} does not take a remap matrix"))),
        }
    }

    /// Complex input shape `(H', W', C')` for a real `(H, W, C)` image.
    pub fn output_shape(&self, (h, w, c): (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        self.validate()?;
        match self.kind {
            k if k.is_spatial() => {
                if self.horizontal {
                    if w % 2 != 0 {
                        return Err(Error::InvalidShape(format!("{k} needs an even width, got {w}")));
                    }
                    Ok((h, w / 2, c))
                } else {
                    if h % 2 != 0 {
                        return Err(Error::InvalidShape(format!("{k} needs an even height, got {h}")));
                    }
                    Ok((h / 2, w, c))
                }
            }
            SchemeKind::ChannelLossless => Ok((h, w, c.div_ceil(2))),
            _ => {
                if c != 3 {
                    return Err(Error::InvalidShape(format!(
                        "channel remapping needs 3 channels, got {c}"
                    )));
                }
                Ok((h, w, 1))
            }
        }
    }
}

/// An image after assignment, `H' × W' × C'`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignedInput {
    pub data: Array3<C64>,
    pub source_shape: (usize, usize, usize),
    pub scheme: AssignmentScheme,
}

/// Packs a real `H × W × C` image into complex values.
pub fn assign(image: ArrayView3<'_, f64>, scheme: &AssignmentScheme) -> Result<AssignedInput> {
    let (h, w, c) = image.dim();
    let out_shape = scheme.output_shape((h, w, c))?;
    let c64 = C64::new;
    let data = match scheme.kind {
        SchemeKind::SpatialInterlace if scheme.horizontal => {
            Array3::from_shape_fn(out_shape, |(r, col, ch)| {
                c64(image[[r, 2 * col, ch]], image[[r, 2 * col + 1, ch]])
            })
        }
        SchemeKind::SpatialInterlace => Array3::from_shape_fn(out_shape, |(r, col, ch)| {
            c64(image[[2 * r, col, ch]], image[[2 * r + 1, col, ch]])
        }),
        SchemeKind::SpatialHalfHalf => Array3::from_shape_fn(out_shape, |(r, col, ch)| {
            c64(image[[r, col, ch]], image[[r + h / 2, col, ch]])
        }),
        SchemeKind::SpatialSymmetric => Array3::from_shape_fn(out_shape, |(r, col, ch)| {
            c64(image[[r, col, ch]], image[[h - 1 - r, w - 1 - col, ch]])
        }),
        SchemeKind::ChannelLossless => Array3::from_shape_fn(out_shape, |(r, col, k)| {
            let re = image[[r, col, 2 * k]];
            let im = if 2 * k + 1 < c { image[[r, col, 2 * k + 1]] } else { 0.0 };
            c64(re, im)
        }),
        SchemeKind::ChannelRemapping => {
            let m = scheme.remap.expect("validated");
            Array3::from_shape_fn(out_shape, |(r, col, _)| {
                let px = [image[[r, col, 0]], image[[r, col, 1]], image[[r, col, 2]]];
                let dot = |row: &[f64; 3]| row.iter().zip(&px).map(|(a, b)| a * b).sum::<f64>();
                c64(dot(&m[0]), dot(&m[1]))
            })
        }
    };
    Ok(AssignedInput {
        data,
        source_shape: (h, w, c),
        scheme: *scheme,
    })
}

/// The conventional encoding: every pixel on the real axis.
pub fn encode_real(image: ArrayView3<'_, f64>) -> Array3<C64> {
    image.mapv(|v| C64::new(v, 0.0))
}

/// Inverts a lossless assignment. Channel remapping is rank-deficient and
/// has no inverse.
pub fn reconstruct(input: &AssignedInput) -> Result<Array3<f64>> {
    let (h, w, c) = input.source_shape;
    let d = &input.data;
    let mut out = Array3::zeros((h, w, c));
    match input.scheme.kind {
        SchemeKind::SpatialInterlace if input.scheme.horizontal => {
            for ((r, col, ch), z) in d.indexed_iter() {
                out[[r, 2 * col, ch]] = z.re;
                out[[r, 2 * col + 1, ch]] = z.im;
            }
        }
        SchemeKind::SpatialInterlace => {
            for ((r, col, ch), z) in d.indexed_iter() {
                out[[2 * r, col, ch]] = z.re;
                out[[2 * r + 1, col, ch]] = z.im;
            }
        }
        SchemeKind::SpatialHalfHalf => {
            for ((r, col, ch), z) in d.indexed_iter() {
                out[[r, col, ch]] = z.re;
                out[[r + h / 2, col, ch]] = z.im;
            }
        }
        SchemeKind::SpatialSymmetric => {
            for ((r, col, ch), z) in d.indexed_iter() {
                out[[r, col, ch]] = z.re;
                out[[h - 1 - r, w - 1 - col, ch]] = z.im;
            }
        }
        SchemeKind::ChannelLossless => {
            for ((r, col, k), z) in d.indexed_iter() {
                out[[r, col, 2 * k]] = z.re;
                if 2 * k + 1 < c {
                    out[[r, col, 2 * k + 1]] = z.im;
                }
            }
        }
        SchemeKind::ChannelRemapping => {
            return Err(Error::Config("channel remapping is not invertible".into()));
        }
    }
    Ok(out)
}

/// Complex `(in, out)` widths of each weight layer of `model` once the
/// scheme is applied (conv layers report `(c_in*k*k, c_out)`).
pub fn compressed_dims(model: &ModelSpec, scheme: Option<&AssignmentScheme>) -> Result<Vec<(usize, usize)>> {
    let mut spec = model.clone();
    spec.scheme = scheme.copied();
    spec.flavor = if scheme.is_some() { Flavor::Scvnn } else { Flavor::Cvnn };
    let resolved = spec.resolve()?;
    Ok(resolved
        .layers
        .iter()
        .flat_map(|l| match *l {
            ResolvedLayer::Dense { inputs, outputs, .. } => vec![(inputs, outputs)],
            ResolvedLayer::Conv { c_in, c_out, kernel, .. } => vec![(c_in * kernel * kernel, c_out)],
            ResolvedLayer::Residual { c_in, c_out, .. } => {
                let mut v = vec![(c_in * 9, c_out), (c_out * 9, c_out)];
                if c_in != c_out {
                    v.push((c_in, c_out));
                }
                v
            }
            ResolvedLayer::UnitaryHead { width } => vec![(width, width)],
            _ => vec![],
        })
        .collect())
}
