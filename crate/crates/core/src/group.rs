//! Heisenberg group algebra and its homogeneous metric.
//!
//! Points are triples `(x1, x2, x3)` with the polarized group law
//! `a∘b = (a1+b1, a2+b2, a3+b3 + (a1 b2 − b1 a2)/2)`. The Korányi gauge
//! `‖x‖_G = ((x1²+x2²)² + x3²)^{1/4}` is homogeneous of degree one under the
//! dilations `δ_λ(x) = (λx1, λx2, λ²x3)` and induces the left-invariant
//! distance `d_G(x, y) = ‖y⁻¹∘x‖_G`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PlaneVector;
use crate::scalar::{Real, TwoFloat};

/// A point of the group. The coordinate type defaults to `f64`; the group
/// law, gauge and flow also run in other [`Real`] types.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HPoint<T = f64> {
    pub x1: T,
    pub x2: T,
    pub x3: T,
}

impl<T: Real> HPoint<T> {
    pub fn lift(p: &HPoint) -> Self {
        HPoint {
            x1: T::from_f64(p.x1),
            x2: T::from_f64(p.x2),
            x3: T::from_f64(p.x3),
        }
    }

    /// Rounds back to `f64` coordinates.
    pub fn lower(&self) -> HPoint {
        HPoint::new(self.x1.to_f64(), self.x2.to_f64(), self.x3.to_f64())
    }
}

impl HPoint {
    pub const IDENTITY: HPoint = HPoint::new(0.0, 0.0, 0.0);

    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        HPoint { x1, x2, x3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        HPoint::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x1,
            1 => self.x2,
            2 => self.x3,
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }

    /// Ordinary Euclidean norm of the coordinate triple.
    pub fn euclidean_norm(&self) -> f64 {
        self.x1.hypot(self.x2).hypot(self.x3)
    }

    pub fn mul(&self, other: &HPoint) -> HPoint {
        group_mul(self, other)
    }

    pub fn inv(&self) -> HPoint {
        inverse(self)
    }
}

impl std::ops::Mul for HPoint {
    type Output = HPoint;

    fn mul(self, rhs: HPoint) -> HPoint {
        group_mul(&self, &rhs)
    }
}

/// Axis-aligned region `[lo1, hi1] × [lo2, hi2] × [lo3, hi3]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: HPoint,
    pub hi: HPoint,
}

impl BoxRegion {
    pub fn new(lo: HPoint, hi: HPoint) -> Result<Self> {
        let ok = (0..3).all(|a| {
            let (l, h) = (lo.coord(a), hi.coord(a));
            l.is_finite() && h.is_finite() && l < h
        });
        if !ok {
            return Err(Error::DegenerateBox { lo, hi });
        }
        Ok(BoxRegion { lo, hi })
    }

    /// The cube `[-a, a]³`.
    pub fn cube(a: f64) -> Result<Self> {
        BoxRegion::new(HPoint::new(-a, -a, -a), HPoint::new(a, a, a))
    }

    pub fn validate(&self) -> Result<()> {
        BoxRegion::new(self.lo, self.hi).map(|_| ())
    }

    pub fn contains(&self, p: &HPoint) -> bool {
        (0..3).all(|a| p.coord(a) >= self.lo.coord(a) && p.coord(a) <= self.hi.coord(a))
    }

    /// Inclusion of `other` in `self`.
    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi.coord(axis) - self.lo.coord(axis)
    }

    pub fn clamp(&self, p: &HPoint) -> HPoint {
        HPoint::new(
            p.x1.clamp(self.lo.x1, self.hi.x1),
            p.x2.clamp(self.lo.x2, self.hi.x2),
            p.x3.clamp(self.lo.x3, self.hi.x3),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HPoint {
        HPoint::new(
            rng.gen_range(self.lo.x1..=self.hi.x1),
            rng.gen_range(self.lo.x2..=self.hi.x2),
            rng.gen_range(self.lo.x3..=self.hi.x3),
        )
    }
}

pub fn group_mul<T: Real>(a: &HPoint<T>, b: &HPoint<T>) -> HPoint<T> {
    HPoint {
        x1: a.x1 + b.x1,
        x2: a.x2 + b.x2,
        x3: a.x3 + b.x3 + T::from_f64(0.5) * (a.x1 * b.x2 - b.x1 * a.x2),
    }
}

pub fn inverse<T: Real>(x: &HPoint<T>) -> HPoint<T> {
    HPoint {
        x1: -x.x1,
        x2: -x.x2,
        x3: -x.x3,
    }
}

pub fn dilate(lambda: f64, x: &HPoint) -> Result<HPoint> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("dilation factor must be positive, got {lambda}")));
    }
    Ok(HPoint::new(lambda * x.x1, lambda * x.x2, lambda * lambda * x.x3))
}

/// Korányi gauge, evaluated with two square roots so that coordinates up to
/// about 1e70 do not overflow.
pub fn gauge(x: &HPoint) -> f64 {
    let r2 = x.x1 * x.x1 + x.x2 * x.x2;
    r2.hypot(x.x3).sqrt()
}

pub fn dist_g(x: &HPoint, y: &HPoint) -> f64 {
    gauge(&group_mul(&inverse(y), x))
}

/// [`gauge`] in any [`Real`] type, as `((x1²+x2²)² + x3²)^{1/4}`.
pub fn gauge_in<T: Real>(x: &HPoint<T>) -> T {
    let r2 = x.x1 * x.x1 + x.x2 * x.x2;
    (r2 * r2 + x.x3 * x.x3).sqrt().sqrt()
}

/// [`dist_g`] in any [`Real`] type.
pub fn dist_g_in<T: Real>(x: &HPoint<T>, y: &HPoint<T>) -> T {
    gauge_in(&group_mul(&inverse(y), x))
}

/// Largest deviations seen by [`group_axiom_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSuiteReport {
    pub samples: usize,
    /// `max ‖((a∘b)∘c)⁻¹∘(a∘(b∘c))‖_G`, evaluated in double-double.
    pub associativity: f64,
    /// `max |a∘e − a|_∞ ∨ |e∘a − a|_∞`.
    pub identity: f64,
    /// `max |a∘a⁻¹|_∞ ∨ |a⁻¹∘a|_∞`.
    pub inverse: f64,
    /// `max |d_G(c∘a, c∘b) − d_G(a, b)|`.
    pub left_invariance: f64,
    /// `max |‖δ_λ a‖_G − λ‖a‖_G|` with `λ` uniform in `[0.1, 3]`.
    pub homogeneity: f64,
}

impl GroupSuiteReport {
    pub fn worst(&self) -> f64 {
        [self.associativity, self.identity, self.inverse, self.left_invariance, self.homogeneity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Random triples uniform in `region` checked against the group axioms,
/// left invariance of `d_G` and homogeneity of the gauge.
pub fn group_axiom_suite<R: Rng + ?Sized>(region: &BoxRegion, samples: usize, rng: &mut R) -> Result<GroupSuiteReport> {
    region.validate()?;
    let sup = |p: &HPoint, q: &HPoint| (p.x1 - q.x1).abs().max((p.x2 - q.x2).abs()).max((p.x3 - q.x3).abs());
    let e = HPoint::IDENTITY;
    let mut r = GroupSuiteReport {
        samples,
        associativity: 0.0,
        identity: 0.0,
        inverse: 0.0,
        left_invariance: 0.0,
        homogeneity: 0.0,
    };
    for _ in 0..samples {
        let (a, b, c) = (region.sample(rng), region.sample(rng), region.sample(rng));
        let lambda = rng.gen_range(0.1..=3.0);
        let (a2, b2, c2) = (HPoint::<TwoFloat>::lift(&a), HPoint::<TwoFloat>::lift(&b), HPoint::<TwoFloat>::lift(&c));
        let lhs = group_mul(&group_mul(&a2, &b2), &c2);
        let rhs = group_mul(&a2, &group_mul(&b2, &c2));
        r.associativity = r.associativity.max(gauge_in(&group_mul(&inverse(&lhs), &rhs)).to_f64());
        r.identity = r.identity.max(sup(&group_mul(&a, &e), &a)).max(sup(&group_mul(&e, &a), &a));
        let inv = inverse(&a);
        r.inverse = r.inverse.max(sup(&group_mul(&a, &inv), &e)).max(sup(&group_mul(&inv, &a), &e));
        let moved = dist_g(&group_mul(&c, &a), &group_mul(&c, &b));
        r.left_invariance = r.left_invariance.max((moved - dist_g(&a, &b)).abs());
        r.homogeneity = r.homogeneity.max((gauge(&dilate(lambda, &a)?) - lambda * gauge(&a)).abs());
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// Smallest `c` with `‖x‖ ≤ c·‖x‖_G` over the samples.
    pub c_low: f64,
    /// Smallest `c` with `‖x‖_G ≤ c·‖x‖^{1/2}` over the samples.
    pub c_high: f64,
    pub low_witness: Option<HPoint>,
    pub high_witness: Option<HPoint>,
    pub samples: usize,
    /// True when every sample was the identity and no ratio could be formed.
    pub empty_witness: bool,
}

/// Empirical Euclidean/gauge comparison constants over uniform samples of `region`.
pub fn euclid_gauge_sandwich<R: Rng + ?Sized>(
    region: &BoxRegion,
    samples: usize,
    rng: &mut R,
) -> Result<SandwichReport> {
    region.validate()?;
    if samples == 0 {
        return Err(Error::invalid("samples", "at least one sample is required"));
    }
    let points: Vec<HPoint> = (0..samples).map(|_| region.sample(rng)).collect();
    Ok(sandwich_constants(&points))
}

/// Same as [`euclid_gauge_sandwich`] over an explicit sample set. Samples at
/// the identity give `0/0` ratios and are skipped.
pub fn sandwich_constants(points: &[HPoint]) -> SandwichReport {
    let mut report = SandwichReport {
        c_low: 0.0,
        c_high: 0.0,
        low_witness: None,
        high_witness: None,
        samples: points.len(),
        empty_witness: true,
    };
    for p in points {
        let e = p.euclidean_norm();
        let g = gauge(p);
        if e == 0.0 || g == 0.0 {
            continue;
        }
        report.empty_witness = false;
        let low = e / g;
        let high = g / e.sqrt();
        if report.low_witness.is_none() || low > report.c_low {
            report.c_low = low;
            report.low_witness = Some(*p);
        }
        if report.high_witness.is_none() || high > report.c_high {
            report.c_high = high;
            report.high_witness = Some(*p);
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HConvexityWitness {
    pub base: HPoint,
    pub direction: PlaneVector,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HConvexityReport {
    pub passed: bool,
    /// Largest `(g(mid) − (g(left) + g(right))/2) / (1 + |g(mid)|)` seen;
    /// positive means a midpoint lies above its chord.
    pub worst_violation: f64,
    pub witness: Option<HConvexityWitness>,
    pub lines: usize,
}

/// Half-width of the `s`-range probed along each horizontal line.
pub const H_CONVEXITY_SPAN: f64 = 1.0;

/// Samples horizontal lines `s ↦ g(x∘(s w1, s w2, 0))` and tests midpoint
/// convexity on a symmetric grid of `probes` values of `s`.
///
/// The first line is always through the identity in direction `(1, 0)`;
/// the remaining `directions − 1` use uniform base points in `region` and
/// uniform unit directions.
pub fn h_convexity_check<G, R>(
    g: G,
    region: &BoxRegion,
    directions: usize,
    probes: usize,
    rng: &mut R,
) -> Result<HConvexityReport>
where
    G: Fn(&HPoint) -> f64,
    R: Rng + ?Sized,
{
    region.validate()?;
    if directions == 0 {
        return Err(Error::invalid("directions", "at least one direction is required"));
    }
    if probes < 3 {
        return Err(Error::invalid("probes", format!("need at least 3 probes, got {probes}")));
    }
    let ds = 2.0 * H_CONVEXITY_SPAN / (probes - 1) as f64;
    let mut report = HConvexityReport {
        passed: true,
        worst_violation: f64::NEG_INFINITY,
        witness: None,
        lines: directions,
    };
    let mut values = vec![0.0; probes];
    for line in 0..directions {
        let (base, w) = if line == 0 {
            (HPoint::IDENTITY, PlaneVector::new(1.0, 0.0))
        } else {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            (region.sample(rng), PlaneVector::new(angle.cos(), angle.sin()))
        };
        for (k, v) in values.iter_mut().enumerate() {
            let s = -H_CONVEXITY_SPAN + k as f64 * ds;
            let p = group_mul(&base, &HPoint::new(s * w.z1, s * w.z2, 0.0));
            let gv = g(&p);
            if !gv.is_finite() {
                return Err(Error::non_finite(format!("g({p:?})"), gv));
            }
            *v = gv;
        }
        for k in 1..probes - 1 {
            let violation =
                (values[k] - 0.5 * (values[k - 1] + values[k + 1])) / (1.0 + values[k].abs());
            if violation > report.worst_violation {
                report.worst_violation = violation;
                report.witness = Some(HConvexityWitness {
                    base,
                    direction: w,
                    s: -H_CONVEXITY_SPAN + k as f64 * ds,
                });
            }
            if violation > 1e-9 {
                report.passed = false;
            }
        }
    }
    Ok(report)
}
