//! Interactive editing sessions: predicted curves cached per image so slider
//! and knot edits re-render without running any network.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;
use serde_json::Value;
use stylecurve_core::enhancer::{
    apply_sliders, parse_curve_key, set_knot, CurveSet, InputChannel, OutputChannel, SliderSettings,
};
use stylecurve_core::Image;

use crate::engine::render;
use crate::error::{invalid, Result};

/// Largest preview, in pixels.
pub const PREVIEW_MAX_WIDTH: usize = 1280;
pub const PREVIEW_MAX_HEIGHT: usize = 720;
pub const DEFAULT_SESSION_CAPACITY: usize = 32;

/// Absolute replacement of one knot, applied after the sliders.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnotOverride {
    pub input: InputChannel,
    pub output: OutputChannel,
    pub index: usize,
    pub value: f64,
}

/// Reads `[{"curve": "r_to_g", "index": 3, "value": 0.1}, ...]`.
pub fn parse_knot_overrides(v: &Value) -> Result<Vec<KnotOverride>> {
    let items = v
        .as_array()
        .ok_or_else(|| invalid("knots must be a JSON array"))?;
    items
        .iter()
        .map(|item| {
            let key = item
                .get("curve")
                .and_then(Value::as_str)
                .ok_or_else(|| invalid("knot override needs a \"curve\" key"))?;
            let (input, output) =
                parse_curve_key(key).ok_or_else(|| invalid(format!("unknown curve {key:?}")))?;
            let index = item
                .get("index")
                .and_then(Value::as_u64)
                .ok_or_else(|| invalid("knot override needs an integer \"index\""))?
                as usize;
            let value = item
                .get("value")
                .and_then(Value::as_f64)
                .ok_or_else(|| invalid("knot override needs a numeric \"value\""))?;
            Ok(KnotOverride {
                input,
                output,
                index,
                value,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Session {
    image: Image<f32>,
    preview: Image<f32>,
    curves: CurveSet,
    sliders: SliderSettings,
    overrides: Vec<KnotOverride>,
}

impl Session {
    pub fn new(image: Image<f32>, curves: CurveSet) -> Result<Self> {
        let preview = image.fit_within(PREVIEW_MAX_WIDTH, PREVIEW_MAX_HEIGHT)?;
        Ok(Self {
            image,
            preview,
            curves,
            sliders: SliderSettings::identity(),
            overrides: Vec::new(),
        })
    }

    pub fn image(&self) -> &Image<f32> {
        &self.image
    }

    pub fn preview(&self) -> &Image<f32> {
        &self.preview
    }

    /// Curves as predicted, before any edit.
    pub fn base_curves(&self) -> &CurveSet {
        &self.curves
    }

    pub fn sliders(&self) -> &SliderSettings {
        &self.sliders
    }

    /// Base curves with the sliders and then the knot overrides applied.
    pub fn current_curves(&self) -> Result<CurveSet> {
        edited(&self.curves, &self.sliders, &self.overrides)
    }

    /// Replaces the edit state; nothing changes when the edits are invalid.
    pub fn set_edits(
        &mut self,
        sliders: SliderSettings,
        overrides: Vec<KnotOverride>,
    ) -> Result<()> {
        edited(&self.curves, &sliders, &overrides)?;
        self.sliders = sliders;
        self.overrides = overrides;
        Ok(())
    }

    /// Preview render with coordinate tables sized for the preview.
    pub fn render_preview(&self, depth: u32) -> Result<Image<f32>> {
        render(&self.preview, &self.current_curves()?, depth)
    }

    /// Full-resolution render, with or without the edits.
    pub fn render_full(&self, depth: u32, with_edits: bool) -> Result<Image<f32>> {
        if with_edits {
            render(&self.image, &self.current_curves()?, depth)
        } else {
            render(&self.image, &self.curves, depth)
        }
    }
}

fn edited(
    curves: &CurveSet,
    sliders: &SliderSettings,
    overrides: &[KnotOverride],
) -> Result<CurveSet> {
    let mut out = apply_sliders(curves, sliders)?;
    for o in overrides {
        out = set_knot(&out, o.input, o.output, o.index, o.value)?;
    }
    Ok(out)
}

/// In-memory sessions with least-recently-used eviction.
#[derive(Debug)]
pub struct SessionStore {
    capacity: usize,
    nonce: u64,
    next: AtomicU64,
    sessions: Mutex<IndexMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("session capacity must be positive"));
        }
        Ok(Self {
            capacity,
            nonce: rand::random(),
            next: AtomicU64::new(0),
            sessions: Mutex::new(IndexMap::new()),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores a session under a fresh id, evicting the oldest when full.
    pub fn insert(&self, session: Session) -> String {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        let id = format!("{:016x}{n:08x}", self.nonce);
        let mut map = self.sessions.lock().expect("session map poisoned");
        while map.len() >= self.capacity {
            map.shift_remove_index(0);
        }
        map.insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    /// Looks a session up and marks it as most recently used.
    pub fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        let mut map = self.sessions.lock().expect("session map poisoned");
        let s = map.shift_remove(id)?;
        map.insert(id.to_string(), s.clone());
        Some(s)
    }
}
