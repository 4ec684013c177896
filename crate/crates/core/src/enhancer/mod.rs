//! Full-resolution curve enhancer.
//!
//! Fifteen curves map each input channel `i` in `{r, g, b, x, y}` to an
//! additive contribution on output channel `j` in `{r, g, b}`. The curves
//! are sampled into lookup tables once per image size and bit depth, the
//! five contributions are summed into a residual image, and the residual is
//! added to the input.

mod curveset;
mod file;
mod render;

pub use curveset::{
    apply_sliders, curve_key, parse_curve_key, set_knot, CurveSet, InputChannel, KnotLayout,
    OutputChannel, SliderSettings, CURVE_COUNT, SLIDER_MAX, SLIDER_MIN,
};
pub use file::{parse_sliders, CurveSetFile, CURVESET_FORMAT_VERSION};
pub use render::{
    build_lut_set, color_index, enhance, enhance_with, render_residual, render_residual_serial,
    LutSet, RenderMode, DEFAULT_DEPTH, MAX_DEPTH,
};
