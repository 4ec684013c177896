//! Curve-based, style-aware photo enhancement: the numeric core.
//!
//! - [`curves`]: monotone cubic curves on uniform knots.
//! - [`enhancer`]: fifteen-curve residual transform rendered through lookup tables.
//! - [`colorspace`]: sRGB to CIELab and the Lab L1 loss.
//! - [`style`]: normalized-softmax loss, style centroids, Recall@1.

pub mod colorspace;
pub mod curves;
pub mod enhancer;
pub mod error;
pub mod image;
pub mod io;
mod jsonfmt;
pub mod style;

pub use crate::error::{Error, Result};
pub use crate::image::{BitDepth, Image, Sample};
