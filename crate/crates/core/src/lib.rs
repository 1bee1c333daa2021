#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod critical;
pub mod error;
pub mod flow;
pub mod fountain;
pub mod functional;
pub mod nonlinearity;
pub mod oracles;
pub mod quadrature;
pub mod run;

pub use basis::{Domain, EigenBasis, GalerkinVector};
pub use error::{Error, Result};
