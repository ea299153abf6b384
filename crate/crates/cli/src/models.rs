//! Model selection: zoo names (`fcnn`, `lenet5-cvnn`, ...) or TOML files.

use std::path::Path;

use serde::Deserialize;
use splitonn::assignment::{AssignmentScheme, SchemeKind};
use splitonn::codec::DecoderKind;
use splitonn::complex::{Activation, Detection};
use splitonn::model::{parse_model_name, zoo, Architecture, Flavor, ModelSpec};
use splitonn::{Error, Result};

/// Contents of a model file. Either `model` names a zoo architecture or an
/// `[arch]` table defines one; the remaining keys override the defaults.
///
/// ```toml
/// model = "fcnn"
/// flavor = "scvnn"
/// assignment = "si"
/// decoder = "merge"
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    model: Option<String>,
    arch: Option<Architecture>,
    flavor: Option<Flavor>,
    assignment: Option<String>,
    remap: Option<[[f64; 3]; 2]>,
    horizontal_pairs: Option<bool>,
    decoder: Option<DecoderKind>,
    activation: Option<Activation>,
    detection: Option<Detection>,
    reference_amplitude: Option<f64>,
}

/// Command-line overrides applied on top of a model name or file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub assignment: Option<SchemeKind>,
    pub decoder: Option<DecoderKind>,
}

fn build(
    arch: Architecture,
    flavor: Option<Flavor>,
    scheme: Option<SchemeKind>,
    decoder: DecoderKind,
) -> Result<ModelSpec> {
    // An assignment implies the split-complex flavor unless one was named.
    let flavor = flavor.unwrap_or(if scheme.is_some() { Flavor::Scvnn } else { Flavor::Cvnn });
    let mut spec = zoo("fcnn", flavor, decoder)?;
    spec.scheme = match (flavor, scheme) {
        (Flavor::Scvnn, Some(k)) => Some(AssignmentScheme::new(k)),
        (Flavor::Scvnn, None) => Some(AssignmentScheme::new(splitonn::model::default_scheme(&arch))),
        (_, Some(k)) => return Err(Error::Config(format!("assignment '{k}' needs the scvnn flavor, not {flavor}"))),
        (_, None) => None,
    };
    spec.arch = arch;
    Ok(spec)
}

/// Resolves `--model`: a path ending in `.toml`, or a zoo name with an
/// optional `-cvnn`/`-scvnn`/`-rvnn` suffix.
pub fn resolve(model: &str, over: &Overrides) -> Result<ModelSpec> {
    let spec = if model.ends_with(".toml") {
        from_file(Path::new(model), over)?
    } else {
        let (base, flavor) = parse_model_name(model, Flavor::Cvnn)?;
        let explicit = model != base;
        build(
            Architecture::zoo(&base)?,
            explicit.then_some(flavor),
            over.assignment,
            over.decoder.unwrap_or_default(),
        )?
    };
    spec.validate()?;
    Ok(spec)
}

fn from_file(path: &Path, over: &Overrides) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    let arch = match (&file.model, file.arch) {
        (Some(name), None) => {
            let (base, _) = parse_model_name(name, Flavor::Cvnn)?;
            Architecture::zoo(&base)?
        }
        (None, Some(a)) => a,
        _ => return Err(Error::Config(format!("{}: give exactly one of `model` or `[arch]`", path.display()))),
    };
    let from_name = file
        .model
        .as_deref()
        .map(|m| parse_model_name(m, Flavor::Cvnn))
        .transpose()?
        .and_then(|(base, f)| (Some(base.as_str()) != file.model.as_deref()).then_some(f));
    let scheme = match over.assignment {
        Some(k) => Some(k),
        None => file.assignment.as_deref().map(str::parse).transpose()?,
    };
    let mut spec = build(
        arch,
        file.flavor.or(from_name),
        scheme,
        over.decoder.or(file.decoder).unwrap_or_default(),
    )?;
    if let Some(s) = spec.scheme.as_mut() {
        if let Some(m) = file.remap {
            if s.kind() != SchemeKind::ChannelRemapping {
                return Err(Error::Config("`remap` only applies to the cr assignment".into()));
            }
            *s = AssignmentScheme::remapping(m)?;
        }
        if let Some(h) = file.horizontal_pairs {
            *s = s.with_horizontal_pairs(h);
        }
    }
    if let Some(a) = file.activation {
        spec.activation = a;
    }
    if let Some(d) = file.detection {
        spec.detection = d;
    }
    if let Some(r) = file.reference_amplitude {
        spec.reference_amplitude = r;
    }
    Ok(spec)
}

/// Short display name: `fcnn-scvnn-si-merge`.
pub fn tag(spec: &ModelSpec) -> String {
    let mut s = format!("{}-{}", spec.arch.name, spec.flavor);
    if let Some(k) = &spec.scheme {
        s.push_str(&format!("-{}", k.kind()));
    }
    s.push_str(&format!("-{}", spec.decoder));
    s
}
