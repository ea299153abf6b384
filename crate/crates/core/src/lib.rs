// Negated float comparisons in this crate are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod area;
pub mod assignment;
pub mod checkpoint;
pub mod codec;
pub mod complex;
pub mod data;
pub mod error;
pub mod model;
pub mod netlist;
pub mod nn;
pub mod photonic;
pub mod sampling;

pub use complex::{ComplexMatrix, RealMatrix, C64};
pub use error::{Error, Result};
