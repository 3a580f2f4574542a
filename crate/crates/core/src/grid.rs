//! Uniform 3D grids over a box, trilinear interpolation and value-function
//! storage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{BoxRegion, HPoint};

/// Box plus node counts, without values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub region: BoxRegion,
    pub counts: [usize; 3],
}

impl GridSpec {
    pub fn new(region: BoxRegion, counts: [usize; 3]) -> Result<Self> {
        region.validate()?;
        if counts.iter().any(|&n| n < 2) {
            return Err(Error::invalid("counts", format!("need at least 2 nodes per axis, got {counts:?}")));
        }
        Ok(GridSpec { region, counts })
    }

    /// `[-4,4] × [-4,4] × [-8,8]` with `33 × 33 × 65` nodes.
    pub fn baseline() -> Self {
        GridSpec {
            region: BoxRegion {
                lo: HPoint::new(-4.0, -4.0, -8.0),
                hi: HPoint::new(4.0, 4.0, 8.0),
            },
            counts: [33, 33, 65],
        }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.region.extent(axis) / (self.counts[axis] - 1) as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.counts[1] + j) * self.counts[2] + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.counts[2];
        let rest = idx / self.counts[2];
        [rest / self.counts[1], rest % self.counts[1], k]
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> HPoint {
        let lo = &self.region.lo;
        HPoint::new(
            axis_coord(lo.x1, self.region.hi.x1, self.counts[0], i),
            axis_coord(lo.x2, self.region.hi.x2, self.counts[1], j),
            axis_coord(lo.x3, self.region.hi.x3, self.counts[2], k),
        )
    }

    pub fn node_at(&self, idx: usize) -> HPoint {
        let [i, j, k] = self.unravel(idx);
        self.node(i, j, k)
    }

    /// Grid with every count replaced by `2n − 1`, so old nodes stay nodes.
    pub fn refined(&self) -> Self {
        GridSpec {
            region: self.region,
            counts: self.counts.map(|n| 2 * n - 1),
        }
    }

    /// Index of the node closest to `p`, after clamping to the box.
    pub fn nearest(&self, p: &HPoint) -> usize {
        let c = self.region.clamp(p);
        let pick = |axis: usize| {
            let s = (c.coord(axis) - self.region.lo.coord(axis)) / self.spacing(axis);
            (s.round() as usize).min(self.counts[axis] - 1)
        };
        self.index(pick(0), pick(1), pick(2))
    }
}

#[inline]
fn axis_coord(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    // exact at both ends
    if i == n - 1 {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }
}

/// Nodal values on a [`GridSpec`], row-major with the third axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid3 {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    /// Per-node trust flag; false marks values influenced by extrapolation.
    pub trusted: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interp {
    pub value: f64,
    /// False when the query point had to be clamped to the box.
    pub trusted: bool,
}

impl Grid3 {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} values, got {}", spec.len(), values.len()),
            ));
        }
        let trusted = vec![true; values.len()];
        Ok(Grid3 { spec, values, trusted })
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Grid3 {
            spec,
            values: vec![c; spec.len()],
            trusted: vec![true; spec.len()],
        }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    /// Trilinear interpolation; points outside the box are clamped to it and
    /// reported untrusted.
    pub fn interp(&self, p: &HPoint) -> Interp {
        let region = &self.spec.region;
        let inside = region.contains(p);
        let q = if inside { *p } else { region.clamp(p) };
        Interp {
            value: self.interp_clamped(&q),
            trusted: inside,
        }
    }

    #[inline]
    pub(crate) fn stencil(&self, q: &HPoint) -> (usize, [f64; 3]) {
        let s = &self.spec;
        let locate = |axis: usize, x: f64| -> (usize, f64) {
            let n = s.counts[axis];
            let lo = s.region.lo.coord(axis);
            let u = (x - lo) / s.spacing(axis);
            let i = (u.floor().max(0.0) as usize).min(n - 2);
            let f = (u - i as f64).clamp(0.0, 1.0);
            (i, f)
        };
        let (i, fx) = locate(0, q.x1);
        let (j, fy) = locate(1, q.x2);
        let (k, fz) = locate(2, q.x3);
        (s.index(i, j, k), [fx, fy, fz])
    }

    #[inline]
    pub(crate) fn interp_clamped(&self, q: &HPoint) -> f64 {
        let (base, f) = self.stencil(q);
        blend(&self.spec, &self.values, base, f)
    }

    /// Value at a point inside the box together with the same interpolation
    /// applied to a companion per-node field.
    #[inline]
    pub(crate) fn interp_pair(&self, other: &[f64], q: &HPoint) -> (f64, f64) {
        let (base, f) = self.stencil(q);
        (blend(&self.spec, &self.values, base, f), blend(&self.spec, other, base, f))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[inline]
fn blend(spec: &GridSpec, v: &[f64], base: usize, [fx, fy, fz]: [f64; 3]) -> f64 {
    let n3 = spec.counts[2];
    let n23 = spec.counts[1] * n3;
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else if t == 1.0 { b } else { a + (b - a) * t };
    let c00 = lerp(v[base], v[base + 1], fz);
    let c01 = lerp(v[base + n3], v[base + n3 + 1], fz);
    let c10 = lerp(v[base + n23], v[base + n23 + 1], fz);
    let c11 = lerp(v[base + n23 + n3], v[base + n23 + n3 + 1], fz);
    let c0 = lerp(c00, c01, fy);
    let c1 = lerp(c10, c11, fy);
    lerp(c0, c1, fx)
}

/// Evaluates `f` at every node.
pub fn sample_field<F: Fn(&HPoint) -> f64>(f: F, spec: &GridSpec) -> Result<Grid3> {
    let spec = GridSpec::new(spec.region, spec.counts)?;
    let mut values = Vec::with_capacity(spec.len());
    for idx in 0..spec.len() {
        let p = spec.node_at(idx);
        let v = f(&p);
        if !v.is_finite() {
            let [i, j, k] = spec.unravel(idx);
            return Err(Error::non_finite(format!("node ({i}, {j}, {k}) at {p:?}"), v));
        }
        values.push(v);
    }
    Grid3::new(spec, values)
}

/// Shrinks `region` by the worst-case displacement of a horizontal curve with
/// speed at most `r_z` over time `horizon`: `r_z·T` on the horizontal axes and
/// `(r_z T)² + r_z T · max(|x1|, |x2|)` on the vertical axis, where the max is
/// over the box.
pub fn certify_region(region: &BoxRegion, r_z: f64, horizon: f64) -> Result<BoxRegion> {
    region.validate()?;
    if !(r_z >= 0.0 && horizon >= 0.0) {
        return Err(Error::invalid("r_z", format!("radius {r_z} and horizon {horizon} must be non-negative")));
    }
    let reach = r_z * horizon;
    let planar = [region.lo.x1, region.hi.x1, region.lo.x2, region.hi.x2]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let margins = [reach, reach, reach * reach + reach * planar];
    let mut lo = region.lo.to_array();
    let mut hi = region.hi.to_array();
    for axis in 0..3 {
        let half = 0.5 * region.extent(axis);
        if margins[axis] >= half {
            return Err(Error::EmptyCertifiedRegion {
                axis: axis + 1,
                margin: margins[axis],
                half_extent: half,
            });
        }
        lo[axis] += margins[axis];
        hi[axis] -= margins[axis];
    }
    BoxRegion::new(HPoint::from_array(lo), HPoint::from_array(hi))
}

/// Time-indexed stack of grids on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueGrid {
    pub times: Vec<f64>,
    pub slices: Vec<Grid3>,
    pub trusted_region: BoxRegion,
}

impl ValueGrid {
    pub fn new(times: Vec<f64>, slices: Vec<Grid3>, trusted_region: BoxRegion) -> Result<Self> {
        if times.len() != slices.len() || times.is_empty() {
            return Err(Error::invalid("slices", "need one grid per time and at least one slice"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "slice times must be strictly increasing"));
        }
        let spec = slices[0].spec;
        if slices.iter().any(|s| s.spec != spec) {
            return Err(Error::invalid("slices", "all slices must share box and counts"));
        }
        if !spec.region.contains_box(&trusted_region) {
            return Err(Error::invalid("trusted_region", "must lie inside the grid box"));
        }
        Ok(ValueGrid {
            times,
            slices,
            trusted_region,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.slices[0].spec
    }

    pub fn time_step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
        }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// A node counts as trusted in slice `s` when its flag is set and it lies
    /// in the certified region.
    pub fn is_trusted(&self, slice: usize, idx: usize) -> bool {
        self.slices[slice].trusted[idx] && self.trusted_region.contains(&self.spec().node_at(idx))
    }

    /// Nodes trusted in every slice.
    pub fn trusted_nodes(&self) -> Vec<usize> {
        (0..self.spec().len())
            .filter(|&idx| (0..self.len()).all(|s| self.is_trusted(s, idx)))
            .collect()
    }
}

pub mod io;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> GridSpec {
        GridSpec::new(
            BoxRegion::new(HPoint::new(-1.0, -2.0, -3.0), HPoint::new(1.0, 2.0, 3.0)).unwrap(),
            [5, 9, 7],
        )
        .unwrap()
    }

    #[test]
    fn interp_exact_at_nodes() {
        let spec = small();
        let g = sample_field(|p| p.x1.sin() + p.x2 * p.x3 * p.x3, &spec).unwrap();
        for idx in 0..spec.len() {
            let r = g.interp(&spec.node_at(idx));
            assert_eq!(r.value, g.values[idx]);
            assert!(r.trusted);
        }
    }

    #[test]
    fn constant_grid() {
        let g = Grid3::constant(small(), 2.5);
        assert_eq!(g.interp(&HPoint::new(0.1, 0.2, 0.3)).value, 2.5);
        let out = g.interp(&HPoint::new(5.0, 0.0, 0.0));
        assert_eq!(out.value, 2.5);
        assert!(!out.trusted);
    }

    #[test]
    fn interp_reproduces_affine() {
        let spec = small();
        let f = |p: &HPoint| p.x1 + 2.0 * p.x2 + 3.0 * p.x3;
        let g = sample_field(f, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = spec.region.sample(&mut rng);
            assert!((g.interp(&p).value - f(&p)).abs() <= 1e-12);
        }
        // resampling is idempotent
        let again = sample_field(|p| g.interp(p).value, &spec).unwrap();
        for (a, b) in again.values.iter().zip(&g.values) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn clamp_outside() {
        let spec = small();
        let g = sample_field(|p| p.x1, &spec).unwrap();
        let r = g.interp(&HPoint::new(3.0, 0.0, 0.0));
        assert_eq!(r.value, 1.0);
        assert!(!r.trusted);
    }

    #[test]
    fn sample_field_examples() {
        let spec = small();
        let zero = sample_field(|_| 0.0, &spec).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));

        let spec = GridSpec::new(BoxRegion::cube(1.0).unwrap(), [5, 5, 5]).unwrap();
        let g = sample_field(crate::group::gauge, &spec).unwrap();
        assert_eq!(g.min(), 0.0);
        assert_eq!(g.values[spec.index(2, 2, 2)], 0.0);

        let err = sample_field(|p| if p.x1 > 0.9 { f64::NAN } else { 1.0 }, &spec).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert!(GridSpec::new(BoxRegion::cube(1.0).unwrap(), [1, 5, 5]).is_err());
    }

    #[test]
    fn certify_examples() {
        let b = BoxRegion::cube(4.0).unwrap();
        assert_eq!(certify_region(&b, 0.0, 1.0).unwrap(), b);

        let tall = BoxRegion::new(HPoint::new(-4.0, -4.0, -8.0), HPoint::new(4.0, 4.0, 8.0)).unwrap();
        let c = certify_region(&tall, 1.0, 1.0).unwrap();
        assert_eq!((c.lo.x1, c.hi.x1, c.lo.x2, c.hi.x2), (-3.0, 3.0, -3.0, 3.0));
        assert_eq!((c.lo.x3, c.hi.x3), (-3.0, 3.0));

        match certify_region(&b, 1.0, 1.0) {
            Err(Error::EmptyCertifiedRegion { axis, margin, .. }) => {
                assert_eq!(axis, 3);
                assert_eq!(margin, 5.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn certify_monotone() {
        let tall = GridSpec::baseline().region;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r: f64 = rng.gen_range(0.0..1.0);
            let t: f64 = rng.gen_range(0.0..1.0);
            let a = certify_region(&tall, r, t).unwrap();
            let b = certify_region(&tall, r * 1.2, t).unwrap();
            let c = certify_region(&tall, r, t * 1.2).unwrap();
            assert!(a.contains_box(&b) && a.contains_box(&c));
        }
    }

    #[test]
    fn nearest_and_refine() {
        let spec = small();
        let idx = spec.index(2, 3, 4);
        assert_eq!(spec.nearest(&spec.node_at(idx)), idx);
        let fine = spec.refined();
        assert_eq!(fine.counts, [9, 17, 13]);
        assert_eq!(fine.node(4, 6, 8), spec.node(2, 3, 4));
    }
}
