//! Named cost functions and Hamiltonians available to scenario files.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PlaneVector;
use crate::game::{RunningCost, TerminalCost};
use crate::group::{gauge, HPoint};
use crate::hji::HamiltonianFn;

fn one() -> f64 {
    1.0
}

/// Terminal cost `g` (initial datum for Hamilton–Jacobi scenarios).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalSpec {
    /// `‖x‖_G`.
    Gauge,
    /// `min(scale (x1² + x2² + x3²), cap)`.
    EuclideanNormSquaredTruncated {
        cap: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `a·x + b`.
    Affine {
        coeffs: [f64; 3],
        #[serde(default)]
        offset: f64,
    },
    Constant { value: f64 },
}

impl TerminalSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            TerminalSpec::Gauge => true,
            TerminalSpec::EuclideanNormSquaredTruncated { cap, scale } => cap.is_finite() && scale.is_finite(),
            TerminalSpec::Affine { coeffs, offset } => coeffs.iter().all(|c| c.is_finite()) && offset.is_finite(),
            TerminalSpec::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("terminal", format!("non-finite parameter in {self:?}")))
        }
    }

    pub fn build(&self) -> TerminalCost {
        match *self {
            TerminalSpec::Gauge => Arc::new(gauge),
            TerminalSpec::EuclideanNormSquaredTruncated { cap, scale } => {
                Arc::new(move |x: &HPoint| (scale * (x.x1 * x.x1 + x.x2 * x.x2 + x.x3 * x.x3)).min(cap))
            }
            TerminalSpec::Affine { coeffs, offset } => {
                Arc::new(move |x: &HPoint| coeffs[0] * x.x1 + coeffs[1] * x.x2 + coeffs[2] * x.x3 + offset)
            }
            TerminalSpec::Constant { value } => Arc::new(move |_: &HPoint| value),
        }
    }
}

/// Hamiltonian `𝓗(t, x, p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// `scale ‖p‖`.
    Norm {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale p_index`, index 1 or 2.
    Component {
        index: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    Constant { value: f64 },
    /// `scale ‖p − shift‖`.
    ShiftedNorm {
        shift: [f64; 2],
        #[serde(default = "one")]
        scale: f64,
    },
}

impl HamiltonianSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            HamiltonianSpec::Norm { scale } => scale.is_finite(),
            HamiltonianSpec::Component { index, scale } => {
                if !(1..=2).contains(index) {
                    return Err(Error::invalid("hamiltonian", format!("component index must be 1 or 2, got {index}")));
                }
                scale.is_finite()
            }
            HamiltonianSpec::Constant { value } => value.is_finite(),
            HamiltonianSpec::ShiftedNorm { shift, scale } => shift.iter().all(|s| s.is_finite()) && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("hamiltonian", format!("non-finite parameter in {self:?}")))
        }
    }

    pub fn build(&self) -> HamiltonianFn {
        match *self {
            HamiltonianSpec::Norm { scale } => Arc::new(move |_, _, p: &PlaneVector| scale * p.norm()),
            HamiltonianSpec::Component { index, scale } => {
                if index == 1 {
                    Arc::new(move |_, _, p: &PlaneVector| scale * p.z1)
                } else {
                    Arc::new(move |_, _, p: &PlaneVector| scale * p.z2)
                }
            }
            HamiltonianSpec::Constant { value } => Arc::new(move |_, _, _| value),
            HamiltonianSpec::ShiftedNorm { shift, scale } => {
                let s = PlaneVector::new(shift[0], shift[1]);
                Arc::new(move |_, _, p: &PlaneVector| scale * (*p - s).norm())
            }
        }
    }
}

/// Running cost `F(t, x, y, z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunningSpec {
    /// `z·y − ‖y‖`.
    Coupling,
    Constant { value: f64 },
    /// `c + a_t t + a_x·x + a_y·y + a_z·z`.
    CustomAffine {
        #[serde(default)]
        c: f64,
        #[serde(default)]
        a_t: f64,
        #[serde(default)]
        a_x: [f64; 3],
        #[serde(default)]
        a_y: [f64; 2],
        #[serde(default)]
        a_z: [f64; 2],
    },
}

impl RunningSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            RunningSpec::Coupling => true,
            RunningSpec::Constant { value } => value.is_finite(),
            RunningSpec::CustomAffine { c, a_t, a_x, a_y, a_z } => [*c, *a_t]
                .iter()
                .chain(a_x)
                .chain(a_y)
                .chain(a_z)
                .all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("running", format!("non-finite parameter in {self:?}")))
        }
    }

    pub fn build(&self) -> RunningCost {
        match *self {
            RunningSpec::Coupling => Arc::new(|_, _, y: &PlaneVector, z: &PlaneVector| z.dot(y) - y.norm()),
            RunningSpec::Constant { value } => Arc::new(move |_, _, _, _| value),
            RunningSpec::CustomAffine { c, a_t, a_x, a_y, a_z } => {
                Arc::new(move |t: f64, x: &HPoint, y: &PlaneVector, z: &PlaneVector| {
                    c + a_t * t
                        + a_x[0] * x.x1
                        + a_x[1] * x.x2
                        + a_x[2] * x.x3
                        + a_y[0] * y.z1
                        + a_y[1] * y.z2
                        + a_z[0] * z.z1
                        + a_z[1] * z.z2
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        let x = HPoint::new(1.0, -2.0, 3.0);
        assert_eq!(TerminalSpec::Gauge.build()(&x), gauge(&x));
        let sq = TerminalSpec::EuclideanNormSquaredTruncated { cap: 10.0, scale: 1.0 }.build();
        assert_eq!(sq(&x), 10.0);
        assert_eq!(sq(&HPoint::new(1.0, 1.0, 1.0)), 3.0);
        let aff = TerminalSpec::Affine { coeffs: [1.0, 2.0, 3.0], offset: 0.5 }.build();
        assert_eq!(aff(&x), 1.0 - 4.0 + 9.0 + 0.5);

        let p = PlaneVector::new(3.0, 4.0);
        assert_eq!(HamiltonianSpec::Norm { scale: 2.0 }.build()(0.0, &x, &p), 10.0);
        assert_eq!(HamiltonianSpec::Component { index: 2, scale: 1.0 }.build()(0.0, &x, &p), 4.0);
        assert_eq!(HamiltonianSpec::ShiftedNorm { shift: [3.0, 0.0], scale: 1.0 }.build()(0.0, &x, &p), 4.0);
        assert!(HamiltonianSpec::Component { index: 3, scale: 1.0 }.validate().is_err());

        let y = PlaneVector::new(1.0, 0.0);
        let z = PlaneVector::new(0.5, 0.5);
        assert_eq!(RunningSpec::Coupling.build()(0.0, &x, &y, &z), -0.5);
    }

    #[test]
    fn json_names() {
        let t: TerminalSpec = serde_json::from_str(r#"{"name": "euclidean-norm-squared-truncated", "cap": 4}"#).unwrap();
        assert_eq!(t, TerminalSpec::EuclideanNormSquaredTruncated { cap: 4.0, scale: 1.0 });
        let h: HamiltonianSpec = serde_json::from_str(r#"{"name": "shifted-norm", "shift": [1, 0]}"#).unwrap();
        assert_eq!(h, HamiltonianSpec::ShiftedNorm { shift: [1.0, 0.0], scale: 1.0 });
        let f: RunningSpec = serde_json::from_str(r#"{"name": "custom-affine", "c": 1, "a_z": [0, 2]}"#).unwrap();
        assert!(matches!(f, RunningSpec::CustomAffine { c, a_z, .. } if c == 1.0 && a_z == [0.0, 2.0]));
        assert!(serde_json::from_str::<TerminalSpec>(r#"{"name": "sinc"}"#).is_err());
    }
}
