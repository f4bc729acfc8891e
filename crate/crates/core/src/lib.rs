//! Rosen continued fractions, mediant convergents and the planar natural extensions of the
//! mediant map for the Hecke groups G_k, k >= 4.

pub mod context;
pub mod error;
pub mod interval;
pub mod maps;
pub mod parse;
pub mod planar;
pub mod poly;
pub mod ring;
pub mod stats;

pub use context::{ConstantsReport, HeckeContext, Parity};
pub use error::{Error, Result};
pub use ring::{LambdaRing, MobiusZL, ProjZL, ZLambda};
