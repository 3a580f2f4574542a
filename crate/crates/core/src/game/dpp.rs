//! Dynamic-programming consistency of a computed value grid.
//!
//! For a probe `(τ, ξ)` the value at `τ` is recomputed by playing `m` steps
//! on exact states from `ξ` and reading the slice at `τ + m h` only at the
//! end. With `m = 1` this is the backward recurrence itself.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{alternate, check_lattice, ControlLattice, GameSpec, Value};
use crate::error::{Error, Result};
use crate::flow::{step_unchecked, SignConvention};
use crate::grid::ValueGrid;
use crate::group::HPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DppProbe {
    pub slice: usize,
    pub node: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DppReport {
    pub steps: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub evaluated: usize,
    /// Probes outside the trusted set or too close to the horizon.
    pub skipped: usize,
    pub witness: Option<DppProbe>,
}

/// Residual `|V(τ, ξ) − W_m(τ, ξ)|` where `W_m` is the `m`-step alternating
/// value computed from slice `τ + m h`. `values` must come from
/// [`super::backward_induction`] for `spec` with the same lattices, `which`
/// and `sign`.
#[allow(clippy::too_many_arguments)]
pub fn dpp_residual(
    values: &ValueGrid,
    spec: &GameSpec,
    yd: &ControlLattice,
    zd: &ControlLattice,
    which: Value,
    sign: SignConvention,
    probes: &[DppProbe],
    steps: usize,
) -> Result<DppReport> {
    if steps == 0 {
        return Err(Error::invalid("steps", "need at least one step"));
    }
    check_lattice(yd, spec.r_y)?;
    check_lattice(zd, spec.r_z)?;
    let h = values.time_step();
    let grid = values.spec();
    let mut report = DppReport {
        steps,
        max_residual: 0.0,
        mean_residual: 0.0,
        evaluated: 0,
        skipped: 0,
        witness: None,
    };
    let mut sum = 0.0;
    for probe in probes {
        if probe.slice + steps >= values.len() || probe.node >= grid.len() || !values.is_trusted(probe.slice, probe.node) {
            report.skipped += 1;
            continue;
        }
        let x = grid.node_at(probe.node);
        let w = play(values, spec, yd, zd, which, sign, h, probe.slice, steps, &x)?;
        let r = (values.slices[probe.slice].values[probe.node] - w).abs();
        sum += r;
        report.evaluated += 1;
        if r > report.max_residual || report.witness.is_none() {
            report.max_residual = report.max_residual.max(r);
            report.witness = Some(*probe);
        }
    }
    if report.evaluated > 0 {
        report.mean_residual = sum / report.evaluated as f64;
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn play(
    values: &ValueGrid,
    spec: &GameSpec,
    yd: &ControlLattice,
    zd: &ControlLattice,
    which: Value,
    sign: SignConvention,
    h: f64,
    slice: usize,
    remaining: usize,
    x: &HPoint,
) -> Result<f64> {
    if remaining == 0 {
        let g = &values.slices[slice];
        return Ok(g.interp_clamped(&g.spec.region.clamp(x)));
    }
    let t = values.times[slice];
    let mut cont = Vec::with_capacity(zd.len());
    for z in &zd.points {
        let p = step_unchecked(x, z, h, sign);
        cont.push(play(values, spec, yd, zd, which, sign, h, slice + 1, remaining - 1, &p)?);
    }
    alternate(which, yd.len(), &cont, |yi, zi| {
        let (y, z) = (&yd.points[yi], &zd.points[zi]);
        let f = spec.running(t, x, y, z);
        if f.is_finite() {
            Ok(h * f)
        } else {
            Err(Error::non_finite(format!("F({t}, {x:?}, {y:?}, {z:?})"), f))
        }
    })
}

/// `count` random probes on nodes trusted at their slice, leaving room for
/// `steps` further slices.
pub fn sample_dpp_probes<R: Rng + ?Sized>(values: &ValueGrid, steps: usize, count: usize, rng: &mut R) -> Vec<DppProbe> {
    if values.len() <= steps {
        return Vec::new();
    }
    let n = values.spec().len();
    let mut probes = Vec::with_capacity(count);
    let mut attempts = 0;
    while probes.len() < count && attempts < 100 * count.max(1) {
        attempts += 1;
        let probe = DppProbe {
            slice: rng.gen_range(0..values.len() - steps),
            node: rng.gen_range(0..n),
        };
        if values.is_trusted(probe.slice, probe.node) {
            probes.push(probe);
        }
    }
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{backward_induction, make_lattice, GameConstants};
    use crate::grid::GridSpec;
    use crate::group::{gauge, BoxRegion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid() -> GridSpec {
        GridSpec::new(
            BoxRegion::new(HPoint::new(-2.0, -2.0, -4.0), HPoint::new(2.0, 2.0, 4.0)).unwrap(),
            [9, 9, 17],
        )
        .unwrap()
    }

    #[test]
    fn one_step_reproduces_recurrence() {
        let s = GameSpec::new(
            1.0,
            1.0,
            1.0,
            Arc::new(|_, _, y: &crate::flow::PlaneVector, z: &crate::flow::PlaneVector| z.dot(y) - y.norm()),
            Arc::new(gauge),
            GameConstants { c1: 2.0, c1p: 0.0, c2: 3.0, c2p: 1.0 },
        )
        .unwrap();
        let (yd, zd) = (make_lattice(1.0, 1, 8).unwrap(), make_lattice(1.0, 1, 8).unwrap());
        let v = backward_induction(&s, &grid(), 5, &yd, &zd, Value::Lower, SignConvention::Minus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probes = sample_dpp_probes(&v, 1, 50, &mut rng);
        assert!(!probes.is_empty());
        let r = dpp_residual(&v, &s, &yd, &zd, Value::Lower, SignConvention::Minus, &probes, 1).unwrap();
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(r.evaluated, probes.len());
    }

    #[test]
    fn state_independent_value() {
        let s = GameSpec::new(
            1.0,
            1.0,
            1.0,
            Arc::new(|_, _, _, _| 1.0),
            Arc::new(|_| 0.0),
            GameConstants { c1: 1.0, c1p: 0.0, c2: 0.0, c2p: 0.0 },
        )
        .unwrap();
        let (yd, zd) = (make_lattice(1.0, 1, 4).unwrap(), make_lattice(1.0, 1, 4).unwrap());
        let v = backward_induction(&s, &grid(), 6, &yd, &zd, Value::Upper, SignConvention::Minus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 1..=3 {
            let probes = sample_dpp_probes(&v, m, 20, &mut rng);
            let r = dpp_residual(&v, &s, &yd, &zd, Value::Upper, SignConvention::Minus, &probes, m).unwrap();
            assert!(r.max_residual <= 1e-12);
        }
        let late = [DppProbe { slice: 5, node: 0 }];
        let r = dpp_residual(&v, &s, &yd, &zd, Value::Upper, SignConvention::Minus, &late, 2).unwrap();
        assert_eq!((r.evaluated, r.skipped), (0, 1));
    }
}
