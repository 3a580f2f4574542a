//! The zero-sum game: Player I picks `y ∈ Y`, Player II picks `z ∈ Z` and
//! steers the state along `ẋ = −f(x, z)`; the payoff is
//! `∫ F(t, x, y, z) dt + g(x(T))`, maximized by Player I.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PlaneVector;
use crate::group::{dist_g, BoxRegion, HPoint};

pub mod audit;
pub mod dpp;
pub mod hamiltonian;
pub mod induction;
pub mod lattice;
pub mod oracle;

pub use audit::{lipschitz_audit, AuditPoint, AuditReport, LipschitzAudit, AUDIT_SLACK};
pub use dpp::{dpp_residual, sample_dpp_probes, DppProbe, DppReport};
pub use hamiltonian::{isaacs_gap, lower_hamiltonian, upper_hamiltonian, GapReport, HamiltonianProbe};
pub use induction::{backward_induction, TAINT_TOLERANCE};
pub use lattice::{make_lattice, ControlLattice};
pub use oracle::brute_force_value;

pub type RunningCost = Arc<dyn Fn(f64, &HPoint, &PlaneVector, &PlaneVector) -> f64 + Send + Sync>;
pub type TerminalCost = Arc<dyn Fn(&HPoint) -> f64 + Send + Sync>;

/// Which value of the game: `Lower` is `max_y min_z` per step, `Upper` is
/// `min_z max_y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Lower,
    Upper,
}

/// Declared bounds: `|F| ≤ c1`, `F` is `c1p`-Lipschitz in `x` for `d_G`,
/// `|g| ≤ c2`, `g` is `c2p`-Lipschitz for `d_G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConstants {
    pub c1: f64,
    pub c1p: f64,
    pub c2: f64,
    pub c2p: f64,
}

#[derive(Clone)]
pub struct GameSpec {
    pub horizon: f64,
    pub r_y: f64,
    pub r_z: f64,
    pub running_cost: RunningCost,
    pub terminal_cost: TerminalCost,
    pub constants: GameConstants,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("horizon", &self.horizon)
            .field("r_y", &self.r_y)
            .field("r_z", &self.r_z)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl GameSpec {
    pub fn new(
        horizon: f64,
        r_y: f64,
        r_z: f64,
        running_cost: RunningCost,
        terminal_cost: TerminalCost,
        constants: GameConstants,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("T", format!("horizon must be positive and finite, got {horizon}")));
        }
        if !(r_y >= 0.0 && r_y.is_finite()) {
            return Err(Error::invalid("R_Y", format!("radius must be non-negative, got {r_y}")));
        }
        if !(r_z >= 0.0 && r_z.is_finite()) {
            return Err(Error::invalid("R_Z", format!("radius must be non-negative, got {r_z}")));
        }
        let GameConstants { c1, c1p, c2, c2p } = constants;
        for (name, v) in [("C1", c1), ("C1p", c1p), ("C2", c2), ("C2p", c2p)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("constants", format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        Ok(GameSpec {
            horizon,
            r_y,
            r_z,
            running_cost,
            terminal_cost,
            constants,
        })
    }

    #[inline]
    pub fn running(&self, t: f64, x: &HPoint, y: &PlaneVector, z: &PlaneVector) -> f64 {
        (self.running_cost)(t, x, y, z)
    }

    #[inline]
    pub fn terminal(&self, x: &HPoint) -> f64 {
        (self.terminal_cost)(x)
    }

    /// `C̃ = (1 + 3 R_Z) e^{T R_Z/2}`.
    pub fn c_tilde(&self) -> f64 {
        crate::flow::shifted_start_constant(self.r_z, self.horizon)
    }

    /// Bound on the horizontal gradient of the value, `C̃ (C1′ T + C2′)`;
    /// independent of `R_Y`.
    pub fn c_sharp(&self) -> f64 {
        self.c_tilde() * (self.constants.c1p * self.horizon + self.constants.c2p)
    }

    /// Space-time Lipschitz constant `C̃ (C1′ T + C2′) + C1`.
    pub fn c_prime(&self) -> f64 {
        self.c_sharp() + self.constants.c1
    }

    /// Random spot-check of the declared constants over `region`. Returns a
    /// warning per violated bound, naming the first witness found.
    pub fn spot_check<R: Rng + ?Sized>(&self, region: &BoxRegion, samples: usize, rng: &mut R) -> Vec<String> {
        let GameConstants { c1, c1p, c2, c2p } = self.constants;
        let mut warnings = Vec::new();
        let (mut f_bad, mut g_bad, mut gl_bad, mut fl_bad) = (false, false, false, false);
        for _ in 0..samples {
            let t = rng.gen_range(0.0..=self.horizon);
            let x = region.sample(rng);
            let x2 = region.sample(rng);
            let y = sample_ball(self.r_y, rng);
            let z = sample_ball(self.r_z, rng);
            let f = self.running(t, &x, &y, &z);
            if !f_bad && !(f.abs() <= c1 * (1.0 + 1e-12)) {
                f_bad = true;
                warnings.push(format!("|F({t}, {x:?}, {y:?}, {z:?})| = {} exceeds C1 = {c1}", f.abs()));
            }
            let g = self.terminal(&x);
            if !g_bad && !(g.abs() <= c2 * (1.0 + 1e-12)) {
                g_bad = true;
                warnings.push(format!("|g({x:?})| = {} exceeds C2 = {c2}", g.abs()));
            }
            let d = dist_g(&x, &x2);
            let dg = (g - self.terminal(&x2)).abs();
            if !gl_bad && dg > c2p * d * (1.0 + 1e-9) + 1e-12 {
                gl_bad = true;
                warnings.push(format!("g ratio {} between {x:?} and {x2:?} exceeds C2' = {c2p}", dg / d));
            }
            let df = (f - self.running(t, &x2, &y, &z)).abs();
            if !fl_bad && df > c1p * d * (1.0 + 1e-9) + 1e-12 {
                fl_bad = true;
                warnings.push(format!("F ratio {} between {x:?} and {x2:?} exceeds C1' = {c1p}", df / d));
            }
        }
        warnings
    }
}

/// Uniform sample of the closed disc of radius `r`.
pub fn sample_ball<R: Rng + ?Sized>(r: f64, rng: &mut R) -> PlaneVector {
    if r == 0.0 {
        return PlaneVector::ZERO;
    }
    let rho = r * rng.gen_range(0.0f64..=1.0).sqrt();
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    PlaneVector::new(rho * a.cos(), rho * a.sin())
}

pub(crate) fn check_lattice(lattice: &ControlLattice, expected: f64) -> Result<()> {
    if (lattice.radius - expected).abs() > 1e-12 * (1.0 + expected) {
        return Err(Error::LatticeMismatch {
            lattice: lattice.radius,
            expected,
        });
    }
    if lattice.points.is_empty() {
        return Err(Error::invalid("lattice", "control lattice is empty"));
    }
    Ok(())
}

/// One step of the alternating optimisation over finite lattices, where
/// `payoff(yi, zi)` is the step payoff and `cont[zi]` the continuation value
/// reached with the `zi`-th control. Only the value is returned.
#[inline]
pub(crate) fn alternate<P>(which: Value, ny: usize, cont: &[f64], mut payoff: P) -> Result<f64>
where
    P: FnMut(usize, usize) -> Result<f64>,
{
    // Inner candidates are visited from the most promising continuation on,
    // so that an outer candidate that cannot beat the incumbent is dropped
    // early. Min and max do not depend on visiting order, so the result is
    // the same as the plain double loop.
    let mut order: Vec<usize> = (0..cont.len()).collect();
    match which {
        Value::Lower => {
            order.sort_by(|&a, &b| cont[a].total_cmp(&cont[b]));
            let mut best = f64::NEG_INFINITY;
            for yi in 0..ny {
                let mut inner = f64::INFINITY;
                for &zi in &order {
                    let v = payoff(yi, zi)? + cont[zi];
                    if v < inner {
                        inner = v;
                        if inner <= best {
                            break;
                        }
                    }
                }
                if inner > best {
                    best = inner;
                }
            }
            Ok(best)
        }
        Value::Upper => {
            order.sort_by(|&a, &b| cont[a].total_cmp(&cont[b]));
            let mut best = f64::INFINITY;
            for &zi in &order {
                let mut inner = f64::NEG_INFINITY;
                for yi in 0..ny {
                    let v = payoff(yi, zi)? + cont[zi];
                    if v > inner {
                        inner = v;
                        if inner >= best {
                            break;
                        }
                    }
                }
                if inner < best {
                    best = inner;
                }
            }
            Ok(best)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(c2p: f64) -> GameSpec {
        GameSpec::new(
            1.0,
            2.0,
            1.0,
            Arc::new(|_, _, y: &PlaneVector, z: &PlaneVector| z.dot(y) - y.norm()),
            Arc::new(crate::group::gauge),
            GameConstants { c1: 4.0, c1p: 0.0, c2: 20.0, c2p },
        )
        .unwrap()
    }

    #[test]
    fn constants() {
        let s = spec(1.0);
        assert!((s.c_sharp() - 4.0 * 0.5f64.exp()).abs() < 1e-12);
        assert!((s.c_prime() - (4.0 * 0.5f64.exp() + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let f: RunningCost = Arc::new(|_, _, _, _| 0.0);
        let g: TerminalCost = Arc::new(|_| 0.0);
        let k = GameConstants { c1: 0.0, c1p: 0.0, c2: 0.0, c2p: 0.0 };
        assert!(GameSpec::new(-1.0, 1.0, 1.0, f.clone(), g.clone(), k).is_err());
        assert!(GameSpec::new(1.0, -1.0, 1.0, f.clone(), g.clone(), k).is_err());
        assert!(GameSpec::new(1.0, 1.0, f64::NAN, f, g, k).is_err());
    }

    #[test]
    fn spot_check_flags_wrong_lipschitz() {
        let region = BoxRegion::cube(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(spec(1.0).spot_check(&region, 2000, &mut rng).is_empty());
        let w = spec(0.1).spot_check(&region, 2000, &mut rng);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("C2'"));
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert!(sample_ball(1.5, &mut rng).norm() <= 1.5);
        }
        assert_eq!(sample_ball(0.0, &mut rng), PlaneVector::ZERO);
    }

    proptest::proptest! {
        #[test]
        fn pruned_alternation_matches_double_loop(
            m in proptest::collection::vec(-5.0f64..5.0, 12),
            cont in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let payoff = |yi: usize, zi: usize| Ok(m[yi * 4 + zi]);
            let lower = (0..3)
                .map(|yi| (0..4).map(|zi| m[yi * 4 + zi] + cont[zi]).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max);
            let upper = (0..4)
                .map(|zi| (0..3).map(|yi| m[yi * 4 + zi] + cont[zi]).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            proptest::prop_assert_eq!(alternate(Value::Lower, 3, &cont, payoff).unwrap(), lower);
            proptest::prop_assert_eq!(alternate(Value::Upper, 3, &cont, payoff).unwrap(), upper);
        }
    }
}
