//! Named style sets used by the CLI and the desk-scale benchmarks.

use crate::dataset::StyleEntry;
use crate::error::{invalid, Result};
use crate::synth::SyntheticStyleSpec;

fn entry(id: &str, spec: SyntheticStyleSpec) -> StyleEntry {
    StyleEntry {
        id: id.to_string(),
        spec,
    }
}

/// Warm white balance with a lifted red and a darkened blue.
pub fn warm() -> StyleEntry {
    entry(
        "warm",
        SyntheticStyleSpec {
            gains: [1.0, 0.95, 0.8],
            gamma: [0.85, 1.0, 1.1],
            ..SyntheticStyleSpec::identity()
        },
    )
}

/// Mirror image of [`warm`].
pub fn cool() -> StyleEntry {
    entry(
        "cool",
        SyntheticStyleSpec {
            gains: [0.8, 0.95, 1.0],
            gamma: [1.1, 1.0, 0.85],
            ..SyntheticStyleSpec::identity()
        },
    )
}

pub fn faded() -> StyleEntry {
    entry(
        "faded",
        SyntheticStyleSpec {
            gamma: [1.1; 3],
            saturation: 0.6,
            lift: 0.08,
            gain: 0.85,
            ..SyntheticStyleSpec::identity()
        },
    )
}

pub fn vivid() -> StyleEntry {
    entry(
        "vivid",
        SyntheticStyleSpec {
            gamma: [0.9; 3],
            saturation: 1.35,
            vignette: 0.2,
            ..SyntheticStyleSpec::identity()
        },
    )
}

/// Mild look kept out of training to probe generalization.
pub fn unseen() -> StyleEntry {
    entry(
        "unseen",
        SyntheticStyleSpec {
            gains: [0.95, 1.0, 0.9],
            gamma: [0.95, 1.0, 1.05],
            saturation: 0.8,
            lift: 0.03,
            ..SyntheticStyleSpec::identity()
        },
    )
}

pub const PRESET_NAMES: [&str; 3] = ["two", "four", "five"];

/// `two`: warm and cool; `four`: adds faded and vivid; `five`: adds unseen.
pub fn preset(name: &str) -> Result<Vec<StyleEntry>> {
    let mut styles = vec![warm(), cool()];
    match name {
        "two" => {}
        "four" => styles.extend([faded(), vivid()]),
        "five" => styles.extend([faded(), vivid(), unseen()]),
        other => {
            return Err(invalid(format!(
                "unknown preset {other:?}, expected one of {PRESET_NAMES:?}"
            )))
        }
    }
    Ok(styles)
}
