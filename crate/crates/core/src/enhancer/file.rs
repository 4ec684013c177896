//! JSON persistence for curve sets.
//!
//! ```json
//! {
//!   "version": 1,
//!   "curves": { "r_to_r": [..], "g_to_r": [..], ..., "y_to_b": [..] },
//!   "sliders": { "r_to_r": 1.0, ... }
//! }
//! ```
//!
//! `sliders` is optional; when present, missing keys read as 1.

use std::path::Path;

use serde_json::Value;

use super::curveset::{parse_slot_key, slot_key, CurveSet, SliderSettings, CURVE_COUNT};
use crate::curves::CurveKnots;
use crate::error::{Error, Result};
use crate::jsonfmt;

pub const CURVESET_FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CurveSetFile {
    pub curves: CurveSet,
    pub sliders: Option<SliderSettings>,
}

impl CurveSetFile {
    pub fn new(curves: CurveSet) -> Self {
        Self {
            curves,
            sliders: None,
        }
    }

    pub fn to_json(&self) -> String {
        let curves: Vec<(String, String)> = (0..CURVE_COUNT)
            .map(|s| (slot_key(s), jsonfmt::array(self.curves.slot(s).values())))
            .collect();
        let mut top = vec![
            ("version".to_string(), CURVESET_FORMAT_VERSION.to_string()),
            ("curves".to_string(), jsonfmt::object(&curves, 2)),
        ];
        if let Some(sliders) = &self.sliders {
            let betas: Vec<(String, String)> = sliders
                .betas()
                .iter()
                .enumerate()
                .map(|(s, b)| (slot_key(s), jsonfmt::number(*b)))
                .collect();
            top.push(("sliders".to_string(), jsonfmt::object(&betas, 2)));
        }
        let mut out = jsonfmt::object(&top, 0);
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)?;
        Self::from_value(&root)
    }

    pub fn from_value(root: &Value) -> Result<Self> {
        let obj = root
            .as_object()
            .ok_or_else(|| Error::invalid("curve set must be a JSON object"))?;
        match obj.get("version").and_then(Value::as_u64) {
            Some(CURVESET_FORMAT_VERSION) => {}
            other => {
                return Err(Error::invalid(format!(
                    "unsupported curve set version {other:?}"
                )))
            }
        }
        let curves_obj = obj
            .get("curves")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::invalid("missing \"curves\" object"))?;
        let mut curves: Vec<Option<CurveKnots>> = vec![None; CURVE_COUNT];
        for (key, value) in curves_obj {
            let s = parse_slot_key(key)
                .ok_or_else(|| Error::invalid(format!("unknown curve key {key:?}")))?;
            let values = value
                .as_array()
                .ok_or_else(|| Error::invalid(format!("{key} must be an array")))?
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| Error::invalid(format!("{key} holds a non-number")))
                })
                .collect::<Result<Vec<f64>>>()?;
            curves[s] = Some(CurveKnots::new(values)?);
        }
        let curves = curves
            .into_iter()
            .enumerate()
            .map(|(s, c)| c.ok_or_else(|| Error::invalid(format!("missing curve {}", slot_key(s)))))
            .collect::<Result<Vec<_>>>()?;
        let curves = CurveSet::from_curves(curves)?;

        let sliders = match obj.get("sliders") {
            None | Some(Value::Null) => None,
            Some(v) => Some(parse_sliders(v)?),
        };
        Ok(Self { curves, sliders })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Reads a `{"r_to_g": beta, ...}` object; absent keys stay at 1.
pub fn parse_sliders(v: &Value) -> Result<SliderSettings> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::invalid("sliders must be a JSON object"))?;
    let mut betas = [1.0; CURVE_COUNT];
    for (key, value) in obj {
        let s = parse_slot_key(key)
            .ok_or_else(|| Error::invalid(format!("unknown slider key {key:?}")))?;
        betas[s] = value
            .as_f64()
            .ok_or_else(|| Error::invalid(format!("slider {key} must be a number")))?;
    }
    SliderSettings::new(betas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhancer::{InputChannel, KnotLayout, OutputChannel};

    fn sample_set() -> CurveSet {
        let layout = KnotLayout::default();
        let u: Vec<f64> = (0..layout.total())
            .map(|k| (k as f64 * 0.7316).sin() / 7.0)
            .collect();
        CurveSet::from_flat(&u, &layout).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut sliders = SliderSettings::identity();
        sliders
            .set(InputChannel::X, OutputChannel::G, 0.37)
            .unwrap();
        let file = CurveSetFile {
            curves: sample_set(),
            sliders: Some(sliders),
        };
        let text = file.to_json();
        assert!(text.contains("\"y_to_b\""));
        let back = CurveSetFile::from_json(&text).unwrap();
        assert_eq!(back, file);
        for (a, b) in back.curves.to_flat().iter().zip(file.curves.to_flat()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sliders_optional_and_partial() {
        let text = CurveSetFile::new(sample_set()).to_json();
        assert!(!text.contains("sliders"));
        assert_eq!(CurveSetFile::from_json(&text).unwrap().sliders, None);

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["sliders"] = serde_json::json!({"r_to_b": 0.5});
        let f = CurveSetFile::from_value(&v).unwrap();
        let s = f.sliders.unwrap();
        assert_eq!(s.get(InputChannel::R, OutputChannel::B), 0.5);
        assert_eq!(s.get(InputChannel::R, OutputChannel::R), 1.0);
    }

    #[test]
    fn rejects_malformed() {
        let good: Value = serde_json::from_str(&CurveSetFile::new(sample_set()).to_json()).unwrap();
        let mut v = good.clone();
        v["version"] = 2.into();
        assert!(CurveSetFile::from_value(&v).is_err());
        let mut v = good.clone();
        v["curves"].as_object_mut().unwrap().remove("x_to_r");
        assert!(CurveSetFile::from_value(&v).is_err());
        let mut v = good.clone();
        v["curves"]["q_to_r"] = serde_json::json!([0.0, 1.0]);
        assert!(CurveSetFile::from_value(&v).is_err());
        let mut v = good.clone();
        v["curves"]["r_to_r"] = serde_json::json!([0.0]);
        assert!(CurveSetFile::from_value(&v).is_err());
        let mut v = good;
        v["sliders"] = serde_json::json!({"r_to_r": 2.5});
        assert!(CurveSetFile::from_value(&v).is_err());
    }
}
