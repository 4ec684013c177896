use std::fmt;

use serde::{Deserialize, Serialize};

use crate::curves::CurveKnots;
use crate::error::{Error, Result};

pub const CURVE_COUNT: usize = 15;
pub const SLIDER_MIN: f64 = 0.0;
pub const SLIDER_MAX: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputChannel {
    R,
    G,
    B,
    X,
    Y,
}

impl InputChannel {
    pub const ALL: [InputChannel; 5] = [Self::R, Self::G, Self::B, Self::X, Self::Y];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::R => "r",
            Self::G => "g",
            Self::B => "b",
            Self::X => "x",
            Self::Y => "y",
        }
    }

    pub fn is_color(self) -> bool {
        matches!(self, Self::R | Self::G | Self::B)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputChannel {
    R,
    G,
    B,
}

impl OutputChannel {
    pub const ALL: [OutputChannel; 3] = [Self::R, Self::G, Self::B];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::R => "r",
            Self::G => "g",
            Self::B => "b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Flat position of curve `(i, j)`: input-major, `(r, g, b, x, y) x (r, g, b)`.
#[inline]
pub(crate) fn slot(i: InputChannel, j: OutputChannel) -> usize {
    i.index() * 3 + j.index()
}

pub(crate) fn slot_channels(slot: usize) -> (InputChannel, OutputChannel) {
    (InputChannel::ALL[slot / 3], OutputChannel::ALL[slot % 3])
}

/// `"r_to_g"` style key used in files and HTTP payloads.
pub(crate) fn slot_key(slot: usize) -> String {
    let (i, j) = slot_channels(slot);
    format!("{}_to_{}", i.name(), j.name())
}

pub(crate) fn parse_slot_key(key: &str) -> Option<usize> {
    let (i, j) = key.split_once("_to_")?;
    Some(slot(InputChannel::parse(i)?, OutputChannel::parse(j)?))
}

/// Public form of the `"r_to_g"` key.
pub fn curve_key(i: InputChannel, j: OutputChannel) -> String {
    slot_key(slot(i, j))
}

pub fn parse_curve_key(key: &str) -> Option<(InputChannel, OutputChannel)> {
    parse_slot_key(key).map(slot_channels)
}

/// Knot count for each of the fifteen curves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnotLayout {
    counts: [usize; CURVE_COUNT],
}

impl Default for KnotLayout {
    /// 17 knots on color curves, 9 on coordinate curves.
    fn default() -> Self {
        Self::uniform(17, 9).expect("valid default layout")
    }
}

impl KnotLayout {
    pub fn uniform(color: usize, coord: usize) -> Result<Self> {
        let mut counts = [0; CURVE_COUNT];
        for (s, c) in counts.iter_mut().enumerate() {
            *c = if slot_channels(s).0.is_color() {
                color
            } else {
                coord
            };
        }
        Self::from_counts(counts)
    }

    pub fn from_counts(counts: [usize; CURVE_COUNT]) -> Result<Self> {
        if let Some(s) = counts.iter().position(|&c| c < 2) {
            return Err(Error::invalid(format!(
                "curve {} needs at least 2 knots, got {}",
                slot_key(s),
                counts[s]
            )));
        }
        Ok(Self { counts })
    }

    pub fn count(&self, i: InputChannel, j: OutputChannel) -> usize {
        self.counts[slot(i, j)]
    }

    pub fn counts(&self) -> &[usize; CURVE_COUNT] {
        &self.counts
    }

    /// Length of the flat parameter vector.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Start of each curve inside the flat parameter vector.
    pub fn offsets(&self) -> [usize; CURVE_COUNT] {
        let mut out = [0; CURVE_COUNT];
        let mut acc = 0;
        for (o, c) in out.iter_mut().zip(self.counts) {
            *o = acc;
            acc += c;
        }
        out
    }
}

/// The fifteen knot vectors `u_{i,j}`: the enhancer's whole transform state.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSet {
    curves: Vec<CurveKnots>,
}

impl CurveSet {
    pub fn zeros(layout: &KnotLayout) -> Self {
        Self {
            curves: layout
                .counts
                .iter()
                .map(|&m| CurveKnots::zeros(m).expect("layout counts are >= 2"))
                .collect(),
        }
    }

    /// Curves in flat slot order.
    pub fn from_curves(curves: Vec<CurveKnots>) -> Result<Self> {
        if curves.len() != CURVE_COUNT {
            return Err(Error::invalid(format!(
                "expected {CURVE_COUNT} curves, got {}",
                curves.len()
            )));
        }
        Ok(Self { curves })
    }

    /// Splits a flat parameter vector (as emitted by the curve encoder).
    pub fn from_flat(u: &[f64], layout: &KnotLayout) -> Result<Self> {
        if u.len() != layout.total() {
            return Err(Error::invalid(format!(
                "parameter vector has {} values, layout needs {}",
                u.len(),
                layout.total()
            )));
        }
        let mut curves = Vec::with_capacity(CURVE_COUNT);
        let mut rest = u;
        for &m in &layout.counts {
            let (head, tail) = rest.split_at(m);
            curves.push(CurveKnots::new(head.to_vec())?);
            rest = tail;
        }
        Ok(Self { curves })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.curves
            .iter()
            .flat_map(|c| c.values().iter().copied())
            .collect()
    }

    pub fn layout(&self) -> KnotLayout {
        let mut counts = [0; CURVE_COUNT];
        for (c, k) in counts.iter_mut().zip(&self.curves) {
            *c = k.len();
        }
        KnotLayout { counts }
    }

    #[inline]
    pub fn get(&self, i: InputChannel, j: OutputChannel) -> &CurveKnots {
        &self.curves[slot(i, j)]
    }

    pub fn knot(&self, i: InputChannel, j: OutputChannel, k: usize) -> Result<f64> {
        let c = self.get(i, j);
        c.values().get(k).copied().ok_or_else(|| {
            Error::invalid(format!(
                "knot {k} out of range for {}_to_{} ({} knots)",
                i.name(),
                j.name(),
                c.len()
            ))
        })
    }

    /// Curves with their channels, in slot order.
    pub fn iter(&self) -> impl Iterator<Item = (InputChannel, OutputChannel, &CurveKnots)> {
        self.curves.iter().enumerate().map(|(s, c)| {
            let (i, j) = slot_channels(s);
            (i, j, c)
        })
    }

    pub fn is_zero(&self) -> bool {
        self.curves.iter().all(CurveKnots::is_zero)
    }

    pub(crate) fn slot(&self, s: usize) -> &CurveKnots {
        &self.curves[s]
    }
}

/// Replaces one knot; everything else is copied unchanged.
pub fn set_knot(
    curves: &CurveSet,
    i: InputChannel,
    j: OutputChannel,
    k: usize,
    value: f64,
) -> Result<CurveSet> {
    curves.knot(i, j, k)?;
    if !value.is_finite() {
        return Err(Error::invalid(format!("knot value {value} is not finite")));
    }
    let mut out = curves.clone();
    out.curves[slot(i, j)].set(k, value);
    Ok(out)
}

/// Per-curve contribution scales `beta_{i,j}` in `[0, 2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliderSettings {
    betas: [f64; CURVE_COUNT],
}

impl Default for SliderSettings {
    fn default() -> Self {
        Self::identity()
    }
}

impl SliderSettings {
    pub fn identity() -> Self {
        Self {
            betas: [1.0; CURVE_COUNT],
        }
    }

    pub fn uniform(beta: f64) -> Result<Self> {
        Self::new([beta; CURVE_COUNT])
    }

    pub fn new(betas: [f64; CURVE_COUNT]) -> Result<Self> {
        for (s, b) in betas.iter().enumerate() {
            check_beta(slot_key(s), *b)?;
        }
        Ok(Self { betas })
    }

    pub fn get(&self, i: InputChannel, j: OutputChannel) -> f64 {
        self.betas[slot(i, j)]
    }

    pub fn set(&mut self, i: InputChannel, j: OutputChannel, beta: f64) -> Result<()> {
        check_beta(slot_key(slot(i, j)), beta)?;
        self.betas[slot(i, j)] = beta;
        Ok(())
    }

    pub fn betas(&self) -> &[f64; CURVE_COUNT] {
        &self.betas
    }

    pub fn is_identity(&self) -> bool {
        self.betas.iter().all(|b| *b == 1.0)
    }
}

fn check_beta(key: impl fmt::Display, beta: f64) -> Result<()> {
    if !beta.is_finite() || !(SLIDER_MIN..=SLIDER_MAX).contains(&beta) {
        return Err(Error::invalid(format!(
            "slider {key} = {beta} outside [{SLIDER_MIN}, {SLIDER_MAX}]"
        )));
    }
    Ok(())
}

/// Scales every curve's knots by its slider: `u'_{i,j} = beta_{i,j} * u_{i,j}`.
pub fn apply_sliders(curves: &CurveSet, sliders: &SliderSettings) -> Result<CurveSet> {
    for (s, b) in sliders.betas.iter().enumerate() {
        check_beta(slot_key(s), *b)?;
    }
    Ok(CurveSet {
        curves: curves
            .curves
            .iter()
            .zip(sliders.betas)
            .map(|(c, b)| c.scaled(b))
            .collect(),
    })
}
