//! Monotone piecewise-cubic curves on uniform knots.
//!
//! A curve is `M` ordinates placed at `t_k = k / (M - 1)` on `[0, 1]`.
//! Tangents follow the Fritsch–Carlson shape-preserving rule (the PCHIP
//! variant): interior tangents are the harmonic mean of the neighbouring
//! secants, endpoint tangents use the three-point one-sided formula with
//! the usual sign and `3 * secant` clamps. Tangents are expressed per knot
//! step, so collinear knots `[0, 0.5, 1]` have tangent `0.5` everywhere.
//!
//! Every cubic segment is monotone and bounded by its two end knots. The
//! evaluator clamps to that interval, which only ever removes rounding
//! excursions.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CurveKnots {
    values: Vec<f64>,
}

impl CurveKnots {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "a curve needs at least 2 knots, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("knot {k} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn zeros(count: usize) -> Result<Self> {
        Self::new(vec![0.0; count])
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, beta: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| beta * v).collect(),
        }
    }

    pub(crate) fn set(&mut self, k: usize, value: f64) {
        self.values[k] = value;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve {
    values: Vec<f64>,
}

impl SampledCurve {
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[inline]
fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Which branch of the tangent rule fired; needed for the knot Jacobian.
#[derive(Clone, Copy, Debug, PartialEq)]
enum TangentBranch {
    Zero,
    /// Harmonic mean of the secants on either side.
    Harmonic,
    /// Three-point one-sided estimate, `(3 * near - far) / 2`.
    Endpoint,
    /// Endpoint estimate clamped to `3 * near`.
    EndpointClamped,
    /// Two-knot curve: the single secant.
    Secant,
}

fn harmonic(a: f64, b: f64) -> (f64, TangentBranch) {
    if sign(a) * sign(b) > 0 {
        (2.0 * a * b / (a + b), TangentBranch::Harmonic)
    } else {
        (0.0, TangentBranch::Zero)
    }
}

fn endpoint(near: f64, far: f64) -> (f64, TangentBranch) {
    let d = (3.0 * near - far) / 2.0;
    if sign(d) != sign(near) {
        (0.0, TangentBranch::Zero)
    } else if sign(near) != sign(far) && d.abs() > 3.0 * near.abs() {
        (3.0 * near, TangentBranch::EndpointClamped)
    } else {
        (d, TangentBranch::Endpoint)
    }
}

fn slopes_with_branches(u: &[f64]) -> Vec<(f64, TangentBranch)> {
    let m = u.len();
    if m == 2 {
        let s = u[1] - u[0];
        return vec![(s, TangentBranch::Secant); 2];
    }
    let secants: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = Vec::with_capacity(m);
    out.push(endpoint(secants[0], secants[1]));
    for k in 1..m - 1 {
        out.push(harmonic(secants[k - 1], secants[k]));
    }
    out.push(endpoint(secants[m - 2], secants[m - 3]));
    out
}

fn check_knots(u: &[f64]) -> Result<()> {
    if u.len() < 2 {
        return Err(Error::invalid(format!(
            "a curve needs at least 2 knots, got {}",
            u.len()
        )));
    }
    if let Some(k) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("knot {k} is not finite")));
    }
    Ok(())
}

/// Shape-preserving tangents, one per knot, in units of value per knot step.
pub fn monotone_slopes(knots: &[f64]) -> Result<Vec<f64>> {
    check_knots(knots)?;
    Ok(slopes_with_branches(knots)
        .into_iter()
        .map(|(d, _)| d)
        .collect())
}

/// Segment index and local parameter for position `t` on an `m`-knot grid.
///
/// Positions within rounding distance of a knot snap onto it, so that
/// `t = k / (m - 1)` reproduces knot `k` exactly even when the division and
/// the multiplication back do not round-trip.
#[inline]
fn locate(t: f64, m: usize) -> (usize, f64) {
    let steps = (m - 1) as f64;
    let mut s = t * steps;
    let r = s.round();
    if (s - r).abs() <= 4.0 * f64::EPSILON * r.max(1.0) {
        s = r;
    }
    let i = (s.floor() as usize).min(m - 2);
    (i, s - i as f64)
}

#[inline]
fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return y0;
    }
    if tau == 1.0 {
        return y1;
    }
    let delta = y1 - y0;
    let c2 = 3.0 * delta - 2.0 * d0 - d1;
    let c3 = d0 + d1 - 2.0 * delta;
    let v = y0 + tau * (d0 + tau * (c2 + tau * c3));
    let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
    v.clamp(lo, hi)
}

#[inline]
fn eval_with_slopes(u: &[f64], d: &[f64], t: f64) -> f64 {
    let (i, tau) = locate(t, u.len());
    hermite(u[i], u[i + 1], d[i], d[i + 1], tau)
}

fn check_position(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!(
            "curve position {t} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// Value of the interpolating curve at `t` in `[0, 1]`.
pub fn eval_curve(knots: &CurveKnots, t: f64) -> Result<f64> {
    check_position(t)?;
    let d = monotone_slopes(knots.values())?;
    Ok(eval_with_slopes(knots.values(), &d, t))
}

/// Dense sampling `v_k = eval_curve(u, k / (n - 1))`.
pub fn sample_curve(knots: &CurveKnots, n: usize) -> Result<SampledCurve> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    let u = knots.values();
    let d = monotone_slopes(u)?;
    let last = (n - 1) as f64;
    let values = (0..n)
        .map(|k| eval_with_slopes(u, &d, k as f64 / last))
        .collect();
    Ok(SampledCurve { values })
}

/// Partial derivatives of one tangent with respect to the knots it reads.
fn slope_partials(u: &[f64], k: usize, branch: TangentBranch) -> [(usize, f64); 3] {
    let m = u.len();
    match branch {
        TangentBranch::Zero => [(k, 0.0); 3],
        TangentBranch::Secant => [(0, -1.0), (1, 1.0), (0, 0.0)],
        TangentBranch::Harmonic => {
            let a = u[k] - u[k - 1];
            let b = u[k + 1] - u[k];
            let s2 = (a + b) * (a + b);
            let da = 2.0 * b * b / s2;
            let db = 2.0 * a * a / s2;
            [(k - 1, -da), (k, da - db), (k + 1, db)]
        }
        TangentBranch::Endpoint | TangentBranch::EndpointClamped => {
            let (wn, wf) = if branch == TangentBranch::Endpoint {
                (1.5, -0.5)
            } else {
                (3.0, 0.0)
            };
            if k == 0 {
                // near = u1 - u0, far = u2 - u1
                [(0, -wn), (1, wn - wf), (2, wf)]
            } else {
                // near = u[m-1] - u[m-2], far = u[m-2] - u[m-3]
                [(m - 1, wn), (m - 2, -wn + wf), (m - 3, -wf)]
            }
        }
    }
}

/// Jacobian of [`sample_curve`] with respect to the knot values.
#[derive(Clone, Debug)]
pub struct SampleJacobian {
    samples: usize,
    knots: usize,
    /// Row-major `samples x knots`.
    data: Vec<f64>,
}

impl SampleJacobian {
    pub fn new(knots: &CurveKnots, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let u = knots.values();
        let m = u.len();
        let branches = slopes_with_branches(u);
        let partials: Vec<[(usize, f64); 3]> = branches
            .iter()
            .enumerate()
            .map(|(k, (_, b))| slope_partials(u, k, *b))
            .collect();
        let mut data = vec![0.0; samples * m];
        let last = (samples - 1) as f64;
        for s in 0..samples {
            let (i, tau) = locate(s as f64 / last, m);
            let row = &mut data[s * m..(s + 1) * m];
            let t2 = tau * tau;
            let t3 = t2 * tau;
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + tau;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            row[i] += h00;
            row[i + 1] += h01;
            for (idx, c) in partials[i] {
                row[idx] += h10 * c;
            }
            for (idx, c) in partials[i + 1] {
                row[idx] += h11 * c;
            }
        }
        Ok(Self {
            samples,
            knots: m,
            data,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn knots(&self) -> usize {
        self.knots
    }

    #[inline]
    pub fn get(&self, sample: usize, knot: usize) -> f64 {
        self.data[sample * self.knots + knot]
    }

    /// Accumulates `J^T * grad_samples` into `grad_knots`.
    pub fn accumulate_transpose(&self, grad_samples: &[f64], grad_knots: &mut [f64]) {
        debug_assert_eq!(grad_samples.len(), self.samples);
        debug_assert_eq!(grad_knots.len(), self.knots);
        for (s, g) in grad_samples.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let row = &self.data[s * self.knots..(s + 1) * self.knots];
            for (acc, j) in grad_knots.iter_mut().zip(row) {
                *acc += g * j;
            }
        }
    }
}
