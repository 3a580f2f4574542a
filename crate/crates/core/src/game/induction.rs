//! Semi-discrete backward induction for the lower and upper values.
//!
//! With `h = T/N` and `t_k = k h`, the slice at `T` holds `g` and
//!
//! ```text
//! V(t_k, x) = max_y min_z [ h F(t_k, x, y, z) + V(t_{k+1}, x∘(∓h z1, ∓h z2, 0)) ]
//! ```
//!
//! for the lower value (`min_z max_y` for the upper one), the continuation
//! being read from the next slice by trilinear interpolation.
//!
//! Each node also carries a taint: the interpolation weight its value
//! inherits from continuations evaluated at points clamped to the box, taking
//! the worst control. Clamped points have taint 1 and the terminal slice
//! taint 0. A node is flagged trusted when its taint is at most
//! [`TAINT_TOLERANCE`].

use rayon::prelude::*;

use super::{alternate, check_lattice, ControlLattice, GameSpec, Value};
use crate::error::{Error, Result};
use crate::flow::{step_unchecked, SignConvention};
use crate::grid::{certify_region, sample_field, Grid3, GridSpec, ValueGrid};

pub const TAINT_TOLERANCE: f64 = 1e-3;

pub fn backward_induction(
    spec: &GameSpec,
    grid: &GridSpec,
    steps: usize,
    yd: &ControlLattice,
    zd: &ControlLattice,
    which: Value,
    sign: SignConvention,
) -> Result<ValueGrid> {
    if steps == 0 {
        return Err(Error::invalid("N", "need at least one time step"));
    }
    check_lattice(yd, spec.r_y)?;
    check_lattice(zd, spec.r_z)?;
    let grid = GridSpec::new(grid.region, grid.counts)?;
    let trusted_region = certify_region(&grid.region, spec.r_z, spec.horizon)?;
    let h = spec.horizon / steps as f64;
    let times: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { spec.horizon } else { k as f64 * h })
        .collect();

    let terminal = sample_field(|p| spec.terminal(p), &grid)?;
    let mut taint = vec![0.0; grid.len()];
    let mut slices = vec![terminal];
    for k in (0..steps).rev() {
        let next = slices.last().expect("terminal slice");
        let (current, t) = induction_step(spec, next, &taint, times[k], h, yd, zd, which, sign)?;
        taint = t;
        slices.push(current);
    }
    slices.reverse();
    ValueGrid::new(times, slices, trusted_region)
}

/// One backward step from `next` (time `t + h`) to time `t`; returns the
/// new slice and its taint.
#[allow(clippy::too_many_arguments)]
pub(crate) fn induction_step(
    spec: &GameSpec,
    next: &Grid3,
    next_taint: &[f64],
    t: f64,
    h: f64,
    yd: &ControlLattice,
    zd: &ControlLattice,
    which: Value,
    sign: SignConvention,
) -> Result<(Grid3, Vec<f64>)> {
    let grid = next.spec;
    let n = grid.len();
    let mut values = vec![0.0; n];
    let mut taint = vec![0.0; n];
    let nz = zd.points.len();
    values
        .par_iter_mut()
        .zip(taint.par_iter_mut())
        .enumerate()
        .try_for_each_init(
            || vec![0.0; nz],
            |cont, (idx, (value, node_taint))| -> Result<()> {
                let x = grid.node_at(idx);
                let mut worst = 0.0f64;
                for (c, z) in cont.iter_mut().zip(&zd.points) {
                    let p = step_unchecked(&x, z, h, sign);
                    if grid.region.contains(&p) {
                        let (v, w) = next.interp_pair(next_taint, &p);
                        *c = v;
                        worst = worst.max(w);
                    } else {
                        *c = next.interp_clamped(&grid.region.clamp(&p));
                        worst = 1.0;
                    }
                }
                let v = alternate(which, yd.points.len(), cont, |yi, zi| {
                    let (y, z) = (&yd.points[yi], &zd.points[zi]);
                    let f = spec.running(t, &x, y, z);
                    if f.is_finite() {
                        Ok(h * f)
                    } else {
                        Err(Error::non_finite(format!("F({t}, {x:?}, {y:?}, {z:?})"), f))
                    }
                })?;
                if !v.is_finite() {
                    return Err(Error::non_finite(format!("V({t}, {x:?})"), v));
                }
                *value = v;
                *node_taint = worst;
                Ok(())
            },
        )?;
    let trusted = taint.iter().map(|&w| w <= TAINT_TOLERANCE).collect();
    Ok((
        Grid3 {
            spec: grid,
            values,
            trusted,
        },
        taint,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::PlaneVector;
    use crate::game::{make_lattice, GameConstants};
    use crate::group::{BoxRegion, HPoint};
    use std::sync::Arc;

    fn spec_with(r_y: f64, r_z: f64, f: super::super::RunningCost, g: super::super::TerminalCost) -> GameSpec {
        GameSpec::new(1.0, r_y, r_z, f, g, GameConstants { c1: 1.0, c1p: 0.0, c2: 1.0, c2p: 1.0 }).unwrap()
    }

    fn small_grid() -> GridSpec {
        GridSpec::new(
            BoxRegion::new(HPoint::new(-2.0, -2.0, -4.0), HPoint::new(2.0, 2.0, 4.0)).unwrap(),
            [9, 9, 17],
        )
        .unwrap()
    }

    #[test]
    fn zero_cost_constant_terminal() {
        let s = spec_with(1.0, 0.5, Arc::new(|_, _, _, _| 0.0), Arc::new(|_| 3.0));
        let (yd, zd) = (make_lattice(1.0, 1, 4).unwrap(), make_lattice(0.5, 1, 4).unwrap());
        for which in [Value::Lower, Value::Upper] {
            let v = backward_induction(&s, &small_grid(), 5, &yd, &zd, which, SignConvention::Minus).unwrap();
            assert!(v.slices.iter().all(|g| g.values.iter().all(|&x| x == 3.0)));
        }
    }

    #[test]
    fn unit_cost_counts_remaining_time() {
        let s = spec_with(1.0, 0.5, Arc::new(|_, _, _, _| 1.0), Arc::new(|_| 0.0));
        let (yd, zd) = (make_lattice(1.0, 1, 4).unwrap(), make_lattice(0.5, 1, 4).unwrap());
        let v = backward_induction(&s, &small_grid(), 8, &yd, &zd, Value::Lower, SignConvention::Minus).unwrap();
        for (t, g) in v.times.iter().zip(&v.slices) {
            assert!(g.values.iter().all(|&x| (x - (1.0 - t)).abs() <= 1e-12));
        }
    }

    #[test]
    fn frozen_dynamics_keep_terminal_cost() {
        let g = |p: &HPoint| p.x1 * p.x1 - p.x3;
        let s = spec_with(1.0, 0.0, Arc::new(|_, _, y: &PlaneVector, _| -y.norm()), Arc::new(g));
        let (yd, zd) = (make_lattice(1.0, 2, 8).unwrap(), make_lattice(0.0, 1, 4).unwrap());
        let v = backward_induction(&s, &small_grid(), 4, &yd, &zd, Value::Lower, SignConvention::Minus).unwrap();
        for slice in &v.slices {
            for (idx, val) in slice.values.iter().enumerate() {
                assert_eq!(*val, g(&slice.spec.node_at(idx)));
            }
        }
    }

    #[test]
    fn boundary_nodes_become_untrusted() {
        let s = spec_with(1.0, 1.0, Arc::new(|_, _, _, _| 0.0), Arc::new(|_| 0.0));
        let l = make_lattice(1.0, 1, 4).unwrap();
        let grid = small_grid();
        let v = backward_induction(&s, &grid, 4, &l, &l, Value::Lower, SignConvention::Minus).unwrap();
        assert!(!v.slices[0].trusted[grid.index(0, 4, 8)]);
        assert!(v.slices[0].trusted[grid.index(4, 4, 8)]);
        assert!(v.slices[4].trusted.iter().all(|&t| t));
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = spec_with(1.0, 1.0, Arc::new(|_, _, _, _| 0.0), Arc::new(|_| 0.0));
        let l = make_lattice(1.0, 1, 4).unwrap();
        assert!(backward_induction(&s, &small_grid(), 0, &l, &l, Value::Lower, SignConvention::Minus).is_err());
        let wrong = make_lattice(2.0, 1, 4).unwrap();
        assert!(backward_induction(&s, &small_grid(), 2, &wrong, &l, Value::Lower, SignConvention::Minus).is_err());
        let bad = spec_with(1.0, 1.0, Arc::new(|_, _, _, _| f64::NAN), Arc::new(|_| 0.0));
        let err = backward_induction(&bad, &small_grid(), 2, &l, &l, Value::Lower, SignConvention::Minus).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn taint_stays_in_unit_interval() {
        let s = spec_with(1.0, 1.0, Arc::new(|_, _, _, _| 0.0), Arc::new(|p: &HPoint| p.x1));
        let l = make_lattice(1.0, 1, 8).unwrap();
        let grid = small_grid();
        let terminal = sample_field(|p| p.x1, &grid).unwrap();
        let (slice, taint) =
            induction_step(&s, &terminal, &vec![0.0; grid.len()], 0.5, 0.25, &l, &l, Value::Lower, SignConvention::Minus).unwrap();
        assert!(taint.iter().all(|w| (0.0..=1.0).contains(w)));
        assert_eq!(taint[grid.index(0, 4, 8)], 1.0);
        assert_eq!(taint[grid.index(4, 4, 8)], 0.0);
        let (_, again) =
            induction_step(&s, &slice, &taint, 0.25, 0.25, &l, &l, Value::Lower, SignConvention::Minus).unwrap();
        let inner = again[grid.index(1, 4, 8)];
        assert!(inner > 0.0 && inner < 1.0);
    }
}
