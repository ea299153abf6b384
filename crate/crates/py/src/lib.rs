//! Python bindings: area reports, MZI algebra, mesh compilation and input
//! assignment. Structured results come back as plain dicts and lists.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use splitonn_core::area::{area_report, DeviceProfile};
use splitonn_core::assignment::{assign as assign_image, AssignmentScheme, SchemeKind};
use splitonn_core::codec::{coherent_decode as decode, coherent_measure, encode_dc as encode};
use splitonn_core::model::{parse_model_name, zoo, Flavor};
use splitonn_core::photonic::{self, PhotonicLayer};
use splitonn_core::{ComplexMatrix, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::DimensionMismatch { .. } | Error::InvalidShape(_) | Error::NonUnitary { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn matrix(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMatrix> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    ComplexMatrix::new(m, n, rows.into_iter().flatten().collect()).map_err(err)
}

fn rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    m.as_array().rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Device counts for a zoo model, e.g. `count("fcnn", assignment="si")`.
#[pyfunction]
#[pyo3(signature = (model, assignment=None, decoder=None, profile="2dc2ps"))]
fn count(py: Python<'_>, model: &str, assignment: Option<&str>, decoder: Option<&str>, profile: &str) -> PyResult<Py<PyAny>> {
    let scheme: Option<SchemeKind> = assignment.map(str::parse).transpose().map_err(err)?;
    let (base, flavor) = parse_model_name(model, if scheme.is_some() { Flavor::Scvnn } else { Flavor::Cvnn }).map_err(err)?;
    let decoder = decoder.map(str::parse).transpose().map_err(err)?.unwrap_or_default();
    let mut spec = zoo(&base, flavor, decoder).map_err(err)?;
    if let Some(k) = scheme {
        spec.scheme = Some(AssignmentScheme::new(k));
    }
    let profile: DeviceProfile = profile.parse().map_err(err)?;
    let report = area_report(&spec, profile).map_err(err)?;
    to_py(py, &serde_json::to_value(&report).map_err(|e| err(e.into()))?)
}

/// MZIs needed for an `m x n` weight matrix.
#[pyfunction]
fn count_mzis(m: usize, n: usize) -> u64 {
    photonic::count_mzis(m, n)
}

/// 2x2 transfer matrix of one MZI.
#[pyfunction]
fn mzi_transfer(theta: f64, phi: f64) -> Vec<Vec<Complex64>> {
    rows(&photonic::mzi_transfer(theta, phi))
}

/// Compiles a complex matrix (list of rows) into an SVD mesh netlist,
/// returned as a JSON string.
#[pyfunction]
fn compile_matrix(w: Vec<Vec<Complex64>>) -> PyResult<String> {
    let layer = photonic::compile_matrix(&matrix(w)?).map_err(err)?;
    serde_json::to_string(&layer).map_err(|e| err(e.into()))
}

/// Transfer matrix of a netlist from [`compile_matrix`], multiplied back
/// by its global scale.
#[pyfunction]
fn netlist_matrix(netlist: &str) -> PyResult<Vec<Vec<Complex64>>> {
    let layer: PhotonicLayer = serde_json::from_str(netlist).map_err(|e| err(e.into()))?;
    let m = layer.to_matrix().map_err(err)?.scale(layer.global_scale);
    Ok(rows(&m))
}

/// Number of MZIs in a netlist from [`compile_matrix`].
#[pyfunction]
fn netlist_mzis(netlist: &str) -> PyResult<usize> {
    let layer: PhotonicLayer = serde_json::from_str(netlist).map_err(|e| err(e.into()))?;
    Ok(layer.mzi_count())
}

/// Packs a real `H x W x C` image (nested lists) into complex values with
/// the given assignment code (si, sh, ss, cl, cr).
#[pyfunction]
fn assign(image: Vec<Vec<Vec<f64>>>, scheme: &str) -> PyResult<Vec<Vec<Vec<Complex64>>>> {
    let (h, w) = (image.len(), image.first().map_or(0, Vec::len));
    let c = image.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if image.iter().any(|r| r.len() != w || r.iter().any(|p| p.len() != c)) {
        return Err(PyValueError::new_err("image must be a regular H x W x C array"));
    }
    let flat: Vec<f64> = image.into_iter().flatten().flatten().collect();
    let arr = ndarray::Array3::from_shape_vec((h, w, c), flat).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let kind: SchemeKind = scheme.parse().map_err(err)?;
    let out = assign_image(arr.view(), &AssignmentScheme::new(kind)).map_err(err)?;
    let (oh, ow, _) = out.data.dim();
    Ok((0..oh)
        .map(|y| (0..ow).map(|x| out.data.slice(ndarray::s![y, x, ..]).to_vec()).collect())
        .collect())
}

/// Field leaving the DC encoder for amplitudes `a1`, `a2`.
#[pyfunction]
fn encode_dc(a1: f64, a2: f64) -> Complex64 {
    encode(a1, a2)
}

/// Recovers a field from the three readings of a coherent receiver.
#[pyfunction]
#[pyo3(signature = (z, reference=1.0))]
fn coherent_roundtrip(z: Complex64, reference: f64) -> PyResult<Complex64> {
    let (a, b, c) = coherent_measure(z, reference);
    decode(a, b, c, reference).map_err(err)
}

#[pymodule]
fn splitonn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(count, m)?)?;
    m.add_function(wrap_pyfunction!(count_mzis, m)?)?;
    m.add_function(wrap_pyfunction!(mzi_transfer, m)?)?;
    m.add_function(wrap_pyfunction!(compile_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(netlist_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(netlist_mzis, m)?)?;
    m.add_function(wrap_pyfunction!(assign, m)?)?;
    m.add_function(wrap_pyfunction!(encode_dc, m)?)?;
    m.add_function(wrap_pyfunction!(coherent_roundtrip, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
