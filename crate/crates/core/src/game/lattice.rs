use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PlaneVector;

/// Finite subset of the closed disc `B(0, radius)` standing in for a
/// control set. Order is fixed: centre, then rings from the inside out, each
/// ring by ascending angle starting at angle zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlLattice {
    pub radius: f64,
    pub points: Vec<PlaneVector>,
    /// Largest distance from a sampled disc point to its nearest lattice point.
    pub covering_radius: f64,
}

impl ControlLattice {
    /// Lattice from explicit points, all of which must lie in the disc.
    pub fn from_points(radius: f64, points: Vec<PlaneVector>) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be non-negative, got {radius}")));
        }
        if points.is_empty() {
            return Err(Error::invalid("points", "lattice needs at least one point"));
        }
        if let Some(p) = points.iter().find(|p| !(p.norm() <= radius * (1.0 + 1e-12))) {
            return Err(Error::invalid("points", format!("{p:?} lies outside radius {radius}")));
        }
        let covering_radius = covering_radius(radius, &points);
        Ok(ControlLattice {
            radius,
            points,
            covering_radius,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Centre plus `rings` concentric rings at radii `radius·j/rings`, ring `j`
/// carrying `base_angles·j` equally spaced points.
pub fn make_lattice(radius: f64, rings: usize, base_angles: usize) -> Result<ControlLattice> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("must be non-negative, got {radius}")));
    }
    if radius == 0.0 {
        return Ok(ControlLattice {
            radius,
            points: vec![PlaneVector::ZERO],
            covering_radius: 0.0,
        });
    }
    if rings < 1 {
        return Err(Error::invalid("rings", "need at least one ring"));
    }
    if base_angles < 4 {
        return Err(Error::invalid("base_angles", format!("need at least 4, got {base_angles}")));
    }
    let mut points = vec![PlaneVector::ZERO];
    for j in 1..=rings {
        let r = if j == rings { radius } else { radius * j as f64 / rings as f64 };
        let n = base_angles * j;
        for m in 0..n {
            let a = std::f64::consts::TAU * m as f64 / n as f64;
            points.push(PlaneVector::new(r * a.cos(), r * a.sin()));
        }
    }
    ControlLattice::from_points(radius, points)
}

const RADIAL_SAMPLES: usize = 96;
const ANGULAR_SAMPLES: usize = 1440;

/// Dense polar sampling of the disc plus, for every lattice ring radius and
/// the boundary, the angular midpoints between lattice points.
fn covering_radius(radius: f64, points: &[PlaneVector]) -> f64 {
    if radius == 0.0 {
        return 0.0;
    }
    let nearest = |q: PlaneVector| {
        points
            .iter()
            .map(|p| {
                let (a, b) = (q.z1 - p.z1, q.z2 - p.z2);
                a * a + b * b
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    };
    let mut worst: f64 = 0.0;
    for i in 0..=RADIAL_SAMPLES {
        let r = radius * i as f64 / RADIAL_SAMPLES as f64;
        for m in 0..ANGULAR_SAMPLES {
            let a = std::f64::consts::TAU * m as f64 / ANGULAR_SAMPLES as f64;
            worst = worst.max(nearest(PlaneVector::new(r * a.cos(), r * a.sin())));
        }
    }
    let mut radii: Vec<f64> = points.iter().map(PlaneVector::norm).filter(|r| *r > 0.0).collect();
    radii.push(radius);
    for r in radii {
        let mut angles: Vec<f64> = points
            .iter()
            .filter(|p| (p.norm() - r).abs() <= 1e-12 * (1.0 + r))
            .map(|p| p.z2.atan2(p.z1))
            .collect();
        angles.sort_by(f64::total_cmp);
        for w in angles.windows(2) {
            let a = 0.5 * (w[0] + w[1]);
            worst = worst.max(nearest(PlaneVector::new(r * a.cos(), r * a.sin())));
        }
        if let (Some(first), Some(last)) = (angles.first(), angles.last()) {
            let a = 0.5 * (last + first + std::f64::consts::TAU);
            worst = worst.max(nearest(PlaneVector::new(r * a.cos(), r * a.sin())));
        }
    }
    worst
}
