//! Lower and upper Hamiltonians over finite control lattices.

use serde::{Deserialize, Serialize};

use super::{check_lattice, ControlLattice, GameSpec};
use crate::error::{Error, Result};
use crate::flow::PlaneVector;
use crate::group::HPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianProbe {
    pub t: f64,
    pub x: HPoint,
    pub lambda: PlaneVector,
}

fn payoff(spec: &GameSpec, t: f64, x: &HPoint, lambda: &PlaneVector, y: &PlaneVector, z: &PlaneVector) -> Result<f64> {
    let f = spec.running(t, x, y, z);
    if !f.is_finite() {
        return Err(Error::non_finite(format!("F({t}, {x:?}, {y:?}, {z:?})"), f));
    }
    Ok(f - lambda.dot(z))
}

/// `max_y min_z (F(t, x, y, z) − λ·z)` over the lattices.
pub fn lower_hamiltonian(
    spec: &GameSpec,
    t: f64,
    x: &HPoint,
    lambda: &PlaneVector,
    yd: &ControlLattice,
    zd: &ControlLattice,
) -> Result<f64> {
    check_lattice(yd, spec.r_y)?;
    check_lattice(zd, spec.r_z)?;
    let mut best = f64::NEG_INFINITY;
    for y in &yd.points {
        let mut inner = f64::INFINITY;
        for z in &zd.points {
            let v = payoff(spec, t, x, lambda, y, z)?;
            if v < inner {
                inner = v;
            }
        }
        if inner > best {
            best = inner;
        }
    }
    Ok(best)
}

/// `min_z max_y (F(t, x, y, z) − λ·z)` over the lattices.
pub fn upper_hamiltonian(
    spec: &GameSpec,
    t: f64,
    x: &HPoint,
    lambda: &PlaneVector,
    yd: &ControlLattice,
    zd: &ControlLattice,
) -> Result<f64> {
    check_lattice(yd, spec.r_y)?;
    check_lattice(zd, spec.r_z)?;
    let mut best = f64::INFINITY;
    for z in &zd.points {
        let mut inner = f64::NEG_INFINITY;
        for y in &yd.points {
            let v = payoff(spec, t, x, lambda, y, z)?;
            if v > inner {
                inner = v;
            }
        }
        if inner < best {
            best = inner;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `max (H⁺ − H⁻)` over the probes. A zero gap on lattices says nothing
    /// about the continuum condition.
    pub max_gap: f64,
    pub witness: Option<HamiltonianProbe>,
}

pub fn isaacs_gap(spec: &GameSpec, probes: &[HamiltonianProbe], yd: &ControlLattice, zd: &ControlLattice) -> Result<GapReport> {
    let mut report = GapReport {
        max_gap: f64::NEG_INFINITY,
        witness: None,
    };
    for p in probes {
        let gap = upper_hamiltonian(spec, p.t, &p.x, &p.lambda, yd, zd)? - lower_hamiltonian(spec, p.t, &p.x, &p.lambda, yd, zd)?;
        if gap > report.max_gap {
            report.max_gap = gap;
            report.witness = Some(*p);
        }
    }
    if probes.is_empty() {
        report.max_gap = 0.0;
    }
    Ok(report)
}
