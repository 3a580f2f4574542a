//! Horizontal curves driven by piecewise-constant controls.
//!
//! For a constant velocity `z` the system `ẋ = f(x, z)` with
//! `f(x, z) = (z1, z2, (z2 x1 − z1 x2)/2)` is solved in closed form by the
//! right translation `x(t) = ξ∘(t z1, t z2, 0)`, so trajectories under
//! piecewise-constant controls carry no truncation error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{dist_g, dist_g_in, group_mul, inverse, HPoint};
use crate::scalar::{Real, TwoFloat};

/// A vector of the horizontal plane: a velocity, a control value or a
/// multiplier paired with a horizontal gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaneVector {
    pub z1: f64,
    pub z2: f64,
}

impl PlaneVector {
    pub const ZERO: PlaneVector = PlaneVector::new(0.0, 0.0);

    pub const fn new(z1: f64, z2: f64) -> Self {
        PlaneVector { z1, z2 }
    }

    pub fn dot(&self, other: &PlaneVector) -> f64 {
        self.z1 * other.z1 + self.z2 * other.z2
    }

    pub fn norm(&self) -> f64 {
        (self.z1 * self.z1 + self.z2 * self.z2).sqrt()
    }

    pub fn scale(&self, s: f64) -> PlaneVector {
        PlaneVector::new(s * self.z1, s * self.z2)
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite()
    }
}

impl std::ops::Neg for PlaneVector {
    type Output = PlaneVector;

    fn neg(self) -> PlaneVector {
        PlaneVector::new(-self.z1, -self.z2)
    }
}

impl std::ops::Sub for PlaneVector {
    type Output = PlaneVector;

    fn sub(self, rhs: PlaneVector) -> PlaneVector {
        PlaneVector::new(self.z1 - rhs.z1, self.z2 - rhs.z2)
    }
}

impl std::ops::Add for PlaneVector {
    type Output = PlaneVector;

    fn add(self, rhs: PlaneVector) -> PlaneVector {
        PlaneVector::new(self.z1 + rhs.z1, self.z2 + rhs.z2)
    }
}

/// Selects `ẋ = f(x, z)` (`Plus`) or `ẋ = −f(x, z)` (`Minus`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    Plus,
    #[default]
    Minus,
}

impl SignConvention {
    pub fn factor(self) -> f64 {
        match self {
            SignConvention::Plus => 1.0,
            SignConvention::Minus => -1.0,
        }
    }
}

/// Right-hand side `±f(x, z)`.
pub fn horizontal_field<T: Real>(x: &HPoint<T>, z: &PlaneVector, sign: SignConvention) -> HPoint<T> {
    let s = T::from_f64(sign.factor());
    let (z1, z2) = (T::from_f64(z.z1), T::from_f64(z.z2));
    HPoint {
        x1: s * z1,
        x2: s * z2,
        x3: s * T::from_f64(0.5) * (z2 * x.x1 - z1 * x.x2),
    }
}

/// A control that is constant on each segment `[t_{k-1}, t_k)`, where
/// `t_{-1} = t0` and `breakpoints[k] = t_k` is the end of segment `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantControl {
    t0: f64,
    breakpoints: Vec<f64>,
    values: Vec<PlaneVector>,
}

impl PiecewiseConstantControl {
    pub fn new(t0: f64, breakpoints: Vec<f64>, values: Vec<PlaneVector>) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::MalformedControl(format!("start time {t0} is not finite")));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::MalformedControl(format!(
                "{} breakpoints but {} segment values",
                breakpoints.len(),
                values.len()
            )));
        }
        let mut prev = t0;
        for (k, &b) in breakpoints.iter().enumerate() {
            if !(b.is_finite() && b > prev) {
                return Err(Error::MalformedControl(format!(
                    "breakpoint {k} = {b} does not strictly follow {prev}"
                )));
            }
            prev = b;
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::MalformedControl(format!("segment {k} value {v:?} is not finite")));
        }
        Ok(PiecewiseConstantControl {
            t0,
            breakpoints,
            values,
        })
    }

    pub fn constant(t0: f64, t_end: f64, value: PlaneVector) -> Result<Self> {
        PiecewiseConstantControl::new(t0, vec![t_end], vec![value])
    }

    /// Control on `[t0, t0 + n·dt]` with uniform segments.
    pub fn uniform(t0: f64, dt: f64, values: Vec<PlaneVector>) -> Result<Self> {
        let breakpoints = (1..=values.len()).map(|k| t0 + k as f64 * dt).collect();
        PiecewiseConstantControl::new(t0, breakpoints, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.breakpoints.last().copied().unwrap_or(self.t0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[PlaneVector] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(start, end, value)` for each segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, PlaneVector)> + '_ {
        let starts = std::iter::once(self.t0).chain(self.breakpoints.iter().copied());
        starts
            .zip(self.breakpoints.iter().copied())
            .zip(self.values.iter().copied())
            .map(|((a, b), v)| (a, b, v))
    }

    pub fn negated(&self) -> Self {
        PiecewiseConstantControl {
            t0: self.t0,
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| -*v).collect(),
        }
    }

    /// Restriction to `[from, t_end]`.
    pub fn restrict(&self, from: f64) -> Result<Self> {
        if !(from >= self.t0 && from <= self.t_end()) {
            return Err(Error::Precondition(format!(
                "restriction start {from} outside [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        for (_, b, v) in self.segments() {
            if b > from {
                breakpoints.push(b);
                values.push(v);
            }
        }
        PiecewiseConstantControl::new(from, breakpoints, values)
    }

    /// Concatenation with a control starting where `self` ends.
    pub fn concat(&self, next: &PiecewiseConstantControl) -> Result<Self> {
        if next.t0 != self.t_end() {
            return Err(Error::MalformedControl(format!(
                "second control starts at {} but first ends at {}",
                next.t0,
                self.t_end()
            )));
        }
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.extend_from_slice(&next.breakpoints);
        let mut values = self.values.clone();
        values.extend_from_slice(&next.values);
        PiecewiseConstantControl::new(self.t0, breakpoints, values)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(PlaneVector::norm).fold(0.0, f64::max)
    }

    /// Fails with the first segment whose value leaves the closed ball.
    pub fn check_radius(&self, radius: f64) -> Result<()> {
        for (k, v) in self.values.iter().enumerate() {
            if v.norm() > radius * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::ControlOutsideBall {
                    segment: k,
                    value: (v.z1, v.z2),
                    radius,
                });
            }
        }
        Ok(())
    }

    /// Breakpoints plus `per_segment` uniform interior times in each segment,
    /// starting with `t0`.
    pub fn sample_times(&self, per_segment: usize) -> Vec<f64> {
        let mut times = vec![self.t0];
        for (a, b, _) in self.segments() {
            for j in 1..=per_segment {
                let t = a + (b - a) * j as f64 / (per_segment + 1) as f64;
                if t > a && t < b {
                    times.push(t);
                }
            }
            times.push(b);
        }
        times
    }
}

/// Default number of interior sample times per segment for bound checks.
pub const SAMPLES_PER_SEGMENT: usize = 64;

/// Ordered `(time, point)` samples of a horizontal curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T = f64> {
    pub points: Vec<(f64, HPoint<T>)>,
}

impl<T: Real + Default> Trajectory<T> {
    pub fn endpoint(&self) -> HPoint<T> {
        self.points.last().map(|p| p.1).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Trajectory {
    /// CSV rows `time,x1,x2,x3` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,x1,x2,x3\n");
        for (t, p) in &self.points {
            out.push_str(&format!("{t:.17e},{:.17e},{:.17e},{:.17e}\n", p.x1, p.x2, p.x3));
        }
        out
    }
}

/// Exact endpoint after holding velocity `±z` for duration `h`.
pub fn exact_step(xi: &HPoint, z: &PlaneVector, h: f64, sign: SignConvention) -> Result<HPoint> {
    if !(h >= 0.0) {
        return Err(Error::invalid("h", format!("duration must be non-negative, got {h}")));
    }
    Ok(step_unchecked(xi, z, h, sign))
}

#[inline]
pub(crate) fn step_unchecked(xi: &HPoint, z: &PlaneVector, h: f64, sign: SignConvention) -> HPoint {
    let s = sign.factor() * h;
    group_mul(xi, &HPoint::new(s * z.z1, s * z.z2, 0.0))
}

#[inline]
fn step_in<T: Real>(xi: &HPoint<T>, z: &PlaneVector, h: T, sign: SignConvention) -> HPoint<T> {
    let s = T::from_f64(sign.factor()) * h;
    let w = HPoint {
        x1: s * T::from_f64(z.z1),
        x2: s * T::from_f64(z.z2),
        x3: T::from_f64(0.0),
    };
    group_mul(xi, &w)
}

/// Trajectory at the start time and every breakpoint.
pub fn integrate<T: Real>(xi: &HPoint<T>, u: &PiecewiseConstantControl, sign: SignConvention) -> Trajectory<T> {
    integrate_sampled(xi, u, sign, 0)
}

/// Trajectory at breakpoints plus `per_segment` uniform interior times per
/// segment. Every sample is obtained from the segment start by one exact
/// step, so samples inside a segment do not accumulate rounding.
pub fn integrate_sampled<T: Real>(
    xi: &HPoint<T>,
    u: &PiecewiseConstantControl,
    sign: SignConvention,
    per_segment: usize,
) -> Trajectory<T> {
    let mut points = vec![(u.t0(), *xi)];
    let mut start = *xi;
    for (a, b, v) in u.segments() {
        for j in 1..=per_segment {
            let t = a + (b - a) * j as f64 / (per_segment + 1) as f64;
            if t > a && t < b {
                points.push((t, step_in(&start, &v, T::from_f64(t) - T::from_f64(a), sign)));
            }
        }
        start = step_in(&start, &v, T::from_f64(b) - T::from_f64(a), sign);
        points.push((b, start));
    }
    Trajectory { points }
}

/// Point of the curve at time `t` within `[t0, t_end]`.
pub fn position_at<T: Real>(xi: &HPoint<T>, u: &PiecewiseConstantControl, sign: SignConvention, t: f64) -> Result<HPoint<T>> {
    if !(t >= u.t0() && t <= u.t_end()) {
        return Err(Error::Precondition(format!(
            "time {t} outside [{}, {}]",
            u.t0(),
            u.t_end()
        )));
    }
    let mut x = *xi;
    for (a, b, v) in u.segments() {
        if t <= b {
            return Ok(step_in(&x, &v, T::from_f64(t) - T::from_f64(a), sign));
        }
        x = step_in(&x, &v, T::from_f64(b) - T::from_f64(a), sign);
    }
    Ok(x)
}

/// Classical fourth-order Runge–Kutta integration of `ẋ = ±f(x, z)` with
/// `substeps` equal steps inside every segment. Independent of the closed
/// form; intended as a test oracle.
pub fn rk4_reference<T: Real>(
    xi: &HPoint<T>,
    u: &PiecewiseConstantControl,
    sign: SignConvention,
    substeps: usize,
) -> Result<Trajectory<T>> {
    if substeps == 0 {
        return Err(Error::invalid("substeps", "at least one substep is required"));
    }
    let add = |a: &HPoint<T>, b: &HPoint<T>, s: T| HPoint {
        x1: a.x1 + s * b.x1,
        x2: a.x2 + s * b.x2,
        x3: a.x3 + s * b.x3,
    };
    let (half, two, sixth) = (T::from_f64(0.5), T::from_f64(2.0), T::from_f64(1.0).quot(T::from_f64(6.0)));
    let mut x = *xi;
    let mut points = vec![(u.t0(), x)];
    for (a, b, v) in u.segments() {
        let dt = (T::from_f64(b) - T::from_f64(a)).quot(T::from_f64(substeps as f64));
        for _ in 0..substeps {
            let k1 = horizontal_field(&x, &v, sign);
            let k2 = horizontal_field(&add(&x, &k1, half * dt), &v, sign);
            let k3 = horizontal_field(&add(&x, &k2, half * dt), &v, sign);
            let k4 = horizontal_field(&add(&x, &k3, dt), &v, sign);
            let w = dt * sixth;
            x = HPoint {
                x1: x.x1 + w * (k1.x1 + two * k2.x1 + two * k3.x1 + k4.x1),
                x2: x.x2 + w * (k1.x2 + two * k2.x2 + two * k3.x2 + k4.x2),
                x3: x.x3 + w * (k1.x3 + two * k2.x3 + two * k3.x3 + k4.x3),
            };
        }
        points.push((b, x));
    }
    Ok(Trajectory { points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachReport {
    pub ok: bool,
    /// `max d_G(ξ, x(t)) / (3 R_Z (t − t0))` over sample times after `t0`.
    pub worst_ratio: f64,
    pub witness_time: Option<f64>,
}

/// Largest gauge distance, over the breakpoints of `u`, between the closed
/// form trajectory and [`rk4_reference`] with `substeps` steps per segment.
/// Both are computed in double-double.
pub fn rk4_gap(xi: &HPoint, u: &PiecewiseConstantControl, sign: SignConvention, substeps: usize) -> Result<f64> {
    let start = HPoint::<TwoFloat>::lift(xi);
    let exact = integrate(&start, u, sign);
    let rk = rk4_reference(&start, u, sign, substeps)?;
    Ok(exact
        .points
        .iter()
        .zip(&rk.points)
        .map(|((_, p), (_, q))| dist_g_in(p, q).to_f64())
        .fold(0.0, f64::max))
}

/// Checks `d_G(ξ, x(t)) ≤ 3 R_Z (t − t0)` along the curve from `xi`.
pub fn check_reach_bound(xi: &HPoint, u: &PiecewiseConstantControl, r_z: f64) -> Result<ReachReport> {
    if !(r_z >= 0.0) {
        return Err(Error::invalid("r_z", format!("radius must be non-negative, got {r_z}")));
    }
    u.check_radius(r_z)?;
    let traj = integrate_sampled(xi, u, SignConvention::Plus, SAMPLES_PER_SEGMENT);
    let mut report = ReachReport {
        ok: true,
        worst_ratio: 0.0,
        witness_time: None,
    };
    for &(t, x) in traj.points.iter().skip(1) {
        let d = dist_g(xi, &x);
        let bound = 3.0 * r_z * (t - u.t0());
        let ratio = if d == 0.0 { 0.0 } else { d / bound };
        if ratio > report.worst_ratio || report.witness_time.is_none() {
            report.worst_ratio = report.worst_ratio.max(ratio);
            report.witness_time = Some(t);
        }
    }
    report.ok = report.worst_ratio <= 1.0 + 1e-9;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    /// `max_t d_G(x̂(t), ξ̂∘ξ⁻¹∘x(t))`.
    pub max_deviation: f64,
    /// `max_t d_G(x(t), x̂(t)) / (e^{T R_Z/2} d_G(ξ, ξ̂))`, zero when the
    /// starting points coincide.
    pub gronwall_ratio: f64,
    pub gronwall_ok: bool,
    /// `max_t (d_G(x(t), x̂(t)) − d_G(ξ, ξ̂)) / (R_Z (t − t0)/2)`, zero when
    /// `R_Z = 0`.
    pub drift_ratio: f64,
    /// `d_G(x(t), x̂(t)) ≤ d_G(ξ, ξ̂) + R_Z (t − t0)/2` at every sample.
    pub drift_ok: bool,
}

/// Integrates the curves from `xi` and `xi_hat` under the same control, in
/// double-double arithmetic, and measures the left-translation identity and
/// two separation bounds: the exponential one
/// `d_G(x(t), x̂(t)) ≤ e^{T R_Z/2} d_G(ξ, ξ̂)` with `T = t_end`, and the
/// additive one `d_G(x(t), x̂(t)) ≤ d_G(ξ, ξ̂) + R_Z (t − t0)/2`.
///
/// `x̂⁻¹∘x` is `ξ̂⁻¹∘ξ` conjugated by the displacement of the control, so its
/// vertical part drifts by `(ξ − ξ̂)_h × ∫z`, linearly in the horizontal gap.
/// The gauge takes a square root of that drift, so the exponential bound
/// fails for close starting points; the additive bound always holds.
pub fn check_translation_identity(
    xi: &HPoint,
    xi_hat: &HPoint,
    u: &PiecewiseConstantControl,
    r_z: f64,
) -> Result<TranslationReport> {
    u.check_radius(r_z)?;
    let (xi, xi_hat) = (HPoint::<TwoFloat>::lift(xi), HPoint::<TwoFloat>::lift(xi_hat));
    let x = integrate_sampled(&xi, u, SignConvention::Plus, SAMPLES_PER_SEGMENT);
    let x_hat = integrate_sampled(&xi_hat, u, SignConvention::Plus, SAMPLES_PER_SEGMENT);
    let shift = group_mul(&xi_hat, &inverse(&xi));
    let c_hat = (u.t_end() * r_z / 2.0).exp();
    let d0 = dist_g_in(&xi, &xi_hat).to_f64();
    let mut max_deviation: f64 = 0.0;
    let mut gronwall_ratio: f64 = 0.0;
    let mut gronwall_ok = true;
    let mut drift_ratio: f64 = 0.0;
    let mut drift_ok = true;
    for ((t, p), (_, q)) in x.points.iter().zip(&x_hat.points) {
        max_deviation = max_deviation.max(dist_g_in(q, &group_mul(&shift, p)).to_f64());
        let sep = dist_g_in(p, q).to_f64();
        let allowed = r_z * (t - u.t0()) / 2.0;
        if sep > (d0 + allowed) * (1.0 + 1e-9) + 1e-12 {
            drift_ok = false;
        }
        if allowed > 0.0 {
            drift_ratio = drift_ratio.max((sep - d0) / allowed);
        }
        let bound = c_hat * d0;
        if sep > bound * (1.0 + 1e-9) + 1e-12 {
            gronwall_ok = false;
        }
        if bound > 0.0 {
            gronwall_ratio = gronwall_ratio.max(sep / bound);
        }
    }
    Ok(TranslationReport {
        max_deviation,
        gronwall_ratio,
        gronwall_ok,
        drift_ratio,
        drift_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedStartReport {
    pub ok: bool,
    /// `max_t d_G(x(t), x̃(t)) / (C̃ (d_G(ξ̃, ξ) + τ′ − τ))` over `[τ′, T]`.
    pub ratio: f64,
    pub constant: f64,
}

/// `C̃ = (1 + 3 R_Z) e^{T R_Z/2}`.
pub fn shifted_start_constant(r_z: f64, horizon: f64) -> f64 {
    (1.0 + 3.0 * r_z) * (horizon * r_z / 2.0).exp()
}

/// Curve `x` from `xi` on `[τ, T]` under `u`, curve `x̃` from `xi_tilde` on
/// `[τ′, T]` under the restriction of `u`; checks
/// `d_G(x(t), x̃(t)) ≤ C̃ (d_G(ξ̃, ξ) + τ′ − τ)` on `[τ′, T]`.
pub fn check_shifted_start_bound(
    xi: &HPoint,
    xi_tilde: &HPoint,
    tau: f64,
    tau_prime: f64,
    u: &PiecewiseConstantControl,
    r_z: f64,
) -> Result<ShiftedStartReport> {
    if tau != u.t0() {
        return Err(Error::Precondition(format!(
            "control starts at {} but tau = {tau}",
            u.t0()
        )));
    }
    if !(tau <= tau_prime && tau_prime <= u.t_end()) {
        return Err(Error::Precondition(format!(
            "need tau <= tau' <= T, got {tau}, {tau_prime}, {}",
            u.t_end()
        )));
    }
    u.check_radius(r_z)?;
    let restricted = u.restrict(tau_prime)?;
    let constant = shifted_start_constant(r_z, u.t_end());
    let rhs = constant * (dist_g(xi_tilde, xi) + (tau_prime - tau));
    let x_tilde = integrate_sampled(xi_tilde, &restricted, SignConvention::Plus, SAMPLES_PER_SEGMENT);
    let mut ok = true;
    let mut ratio: f64 = 0.0;
    for &(t, q) in &x_tilde.points {
        let p = position_at(xi, u, SignConvention::Plus, t)?;
        let lhs = dist_g(&p, &q);
        if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
            ok = false;
        }
        if rhs > 0.0 {
            ratio = ratio.max(lhs / rhs);
        }
    }
    Ok(ShiftedStartReport { ok, ratio, constant })
}

/// Horizontal gradient `(X1 F, X2 F)` by centered differences with step
/// `1e-5 (1 + ‖x‖)`, where `X1 = ∂1 − (x2/2)∂3` and `X2 = ∂2 + (x1/2)∂3`.
pub fn numeric_horizontal_gradient<F: Fn(&HPoint) -> f64>(f: F, x: &HPoint) -> PlaneVector {
    let step = 1e-5 * (1.0 + x.euclidean_norm());
    let d = |axis: usize| {
        let mut plus = x.to_array();
        let mut minus = x.to_array();
        plus[axis] += step;
        minus[axis] -= step;
        (f(&HPoint::from_array(plus)) - f(&HPoint::from_array(minus))) / (2.0 * step)
    };
    let (d1, d2, d3) = (d(0), d(1), d(2));
    PlaneVector::new(d1 - 0.5 * x.x2 * d3, d2 + 0.5 * x.x1 * d3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Compares `d/ds F(x(s))` at `s = 0` along the flow with velocity `z`
/// (centered difference of width `step`) to `z · ∇_H F(ξ)`. When `grad` is
/// `None` the gradient is taken from [`numeric_horizontal_gradient`].
pub fn chain_rule_probe<F, G>(f: F, grad: Option<G>, xi: &HPoint, z: &PlaneVector, step: f64) -> Result<ChainRuleReport>
where
    F: Fn(&HPoint) -> f64,
    G: Fn(&HPoint) -> PlaneVector,
{
    if !(step > 0.0) {
        return Err(Error::invalid("step", "finite-difference step must be positive"));
    }
    let forward = step_unchecked(xi, z, step, SignConvention::Plus);
    let backward = step_unchecked(xi, z, step, SignConvention::Minus);
    let (fp, fm) = (f(&forward), f(&backward));
    if !fp.is_finite() {
        return Err(Error::non_finite(format!("F({forward:?})"), fp));
    }
    if !fm.is_finite() {
        return Err(Error::non_finite(format!("F({backward:?})"), fm));
    }
    let lhs = (fp - fm) / (2.0 * step);
    let gradient = match grad {
        Some(g) => g(xi),
        None => numeric_horizontal_gradient(&f, xi),
    };
    if !gradient.is_finite() {
        return Err(Error::non_finite(format!("grad_H F({xi:?})"), gradient.norm()));
    }
    let rhs = z.dot(&gradient);
    Ok(ChainRuleReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
