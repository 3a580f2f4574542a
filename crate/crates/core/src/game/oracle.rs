//! Grid-free enumeration of the discrete game for a handful of steps.
//!
//! Player I commits to `y_k` knowing the history, Player II answers with
//! `z_k` knowing `y_k` as well: the nested expansion
//! `max_{y0} min_{z0} max_{y1} min_{z1} … g(x_N)` evaluated on exact states.

use super::{check_lattice, ControlLattice, GameSpec, Value};
use crate::error::{Error, Result};
use crate::flow::{exact_step, SignConvention};
use crate::group::HPoint;

pub const MAX_ORACLE_STEPS: usize = 3;
pub const MAX_ORACLE_LATTICE: usize = 9;

/// Value of the `steps`-step game started at `xi` at time zero, with
/// `h = T/steps` and dynamics `ẋ = −f(x, z)`.
pub fn brute_force_value(
    spec: &GameSpec,
    xi: &HPoint,
    steps: usize,
    yd: &ControlLattice,
    zd: &ControlLattice,
    which: Value,
) -> Result<f64> {
    if steps == 0 || steps > MAX_ORACLE_STEPS {
        return Err(Error::Precondition(format!(
            "oracle supports 1..={MAX_ORACLE_STEPS} steps, got {steps}"
        )));
    }
    if yd.len() > MAX_ORACLE_LATTICE || zd.len() > MAX_ORACLE_LATTICE {
        return Err(Error::Precondition(format!(
            "oracle lattices are limited to {MAX_ORACLE_LATTICE} points, got {} and {}",
            yd.len(),
            zd.len()
        )));
    }
    check_lattice(yd, spec.r_y)?;
    check_lattice(zd, spec.r_z)?;
    let h = spec.horizon / steps as f64;
    expand(spec, *xi, 0, steps, h, yd, zd, which)
}

#[allow(clippy::too_many_arguments)]
fn expand(
    spec: &GameSpec,
    x: HPoint,
    k: usize,
    steps: usize,
    h: f64,
    yd: &ControlLattice,
    zd: &ControlLattice,
    which: Value,
) -> Result<f64> {
    if k == steps {
        let g = spec.terminal(&x);
        if !g.is_finite() {
            return Err(Error::non_finite(format!("g({x:?})"), g));
        }
        return Ok(g);
    }
    let t = k as f64 * h;
    let play = |y: &crate::flow::PlaneVector, z: &crate::flow::PlaneVector| -> Result<f64> {
        let f = spec.running(t, &x, y, z);
        if !f.is_finite() {
            return Err(Error::non_finite(format!("F({t}, {x:?}, {y:?}, {z:?})"), f));
        }
        let next = exact_step(&x, z, h, SignConvention::Minus)?;
        Ok(h * f + expand(spec, next, k + 1, steps, h, yd, zd, which)?)
    };
    match which {
        Value::Lower => {
            let mut best = f64::NEG_INFINITY;
            for y in &yd.points {
                let mut worst = f64::INFINITY;
                for z in &zd.points {
                    worst = worst.min(play(y, z)?);
                }
                best = best.max(worst);
            }
            Ok(best)
        }
        Value::Upper => {
            let mut best = f64::INFINITY;
            for z in &zd.points {
                let mut worst = f64::NEG_INFINITY;
                for y in &yd.points {
                    worst = worst.max(play(y, z)?);
                }
                best = best.min(worst);
            }
            Ok(best)
        }
    }
}
