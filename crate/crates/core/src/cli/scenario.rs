//! JSON scenario files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::builtins::{HamiltonianSpec, RunningSpec, TerminalSpec};
use crate::error::{Error, Result};
use crate::game::Value;
use crate::grid::GridSpec;
use crate::group::{BoxRegion, HPoint};

pub const SCENARIO_SCHEMA: &str = "heisgame.scenario/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Game,
    Hji,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub kind: Kind,
    /// Horizon `T`.
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hji: Option<HjiSection>,
    #[serde(default)]
    pub grid: GridSection,
    /// Number of time steps `N`.
    #[serde(rename = "N", default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<String>,
    #[serde(default)]
    pub checks: ChecksSection,
}

fn default_steps() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    #[serde(rename = "R_Y")]
    pub r_y: f64,
    #[serde(rename = "R_Z")]
    pub r_z: f64,
    pub running: RunningSpec,
    pub terminal: TerminalSpec,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C1p")]
    pub c1p: f64,
    /// Bound on `|g|`; the maximum over the grid box when absent.
    #[serde(rename = "C2", default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(rename = "C2p")]
    pub c2p: f64,
    #[serde(default = "default_value")]
    pub value: Value,
}

fn default_value() -> Value {
    Value::Lower
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjiSection {
    pub hamiltonian: HamiltonianSpec,
    pub initial: TerminalSpec,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D1p")]
    pub d1p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C2", default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(rename = "C2p")]
    pub c2p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub counts: [usize; 3],
}

impl Default for GridSection {
    fn default() -> Self {
        let b = GridSpec::baseline();
        GridSection {
            lo: b.region.lo.to_array(),
            hi: b.region.hi.to_array(),
            counts: b.counts,
        }
    }
}

impl GridSection {
    pub fn to_spec(&self) -> Result<GridSpec> {
        let region = BoxRegion::new(HPoint::from_array(self.lo), HPoint::from_array(self.hi))?;
        GridSpec::new(region, self.counts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    pub rings: usize,
    pub base_angles: usize,
}

impl Default for LatticeParams {
    fn default() -> Self {
        LatticeParams { rings: 4, base_angles: 8 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(default)]
    pub y: LatticeParams,
    #[serde(default)]
    pub z: LatticeParams,
}

/// Monte Carlo sample counts for `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    pub group_samples: usize,
    pub flow_controls: usize,
    pub reach_controls: usize,
    pub translation_pairs: usize,
    pub shifted_starts: usize,
    pub oracle_steps: usize,
    pub oracle_probes: usize,
    pub dpp_probes: usize,
    pub hamiltonian_probes: usize,
    pub spot_checks: usize,
    pub convexity_lines: usize,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            group_samples: 10_000,
            flow_controls: 1_000,
            reach_controls: 10_000,
            translation_pairs: 10_000,
            shifted_starts: 1_000,
            oracle_steps: 1,
            oracle_probes: 100,
            dpp_probes: 300,
            hamiltonian_probes: 1_000,
            spot_checks: 2_000,
            convexity_lines: 200,
        }
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be non-negative and finite, got {v}")))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Format(format!("scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::invalid(
                "schema",
                format!("expected {SCENARIO_SCHEMA:?}, got {:?}", self.schema),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("T", format!("horizon must be positive and finite, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("N", "need at least one time step"));
        }
        for v in self.grid.lo.iter().chain(&self.grid.hi) {
            finite("grid", *v)?;
        }
        self.grid.to_spec()?;
        for (name, l) in [("lattice.y", self.lattice.y), ("lattice.z", self.lattice.z)] {
            if l.rings < 1 {
                return Err(Error::invalid(name, "rings must be at least 1"));
            }
            if l.base_angles < 4 {
                return Err(Error::invalid(name, "base_angles must be at least 4"));
            }
        }
        if !(1..=crate::game::oracle::MAX_ORACLE_STEPS).contains(&self.checks.oracle_steps) {
            return Err(Error::invalid(
                "checks.oracle_steps",
                format!("must lie in 1..={}", crate::game::oracle::MAX_ORACLE_STEPS),
            ));
        }
        match self.kind {
            Kind::Game => {
                let g = self
                    .game
                    .as_ref()
                    .ok_or_else(|| Error::invalid("game", "kind \"game\" needs a \"game\" section"))?;
                if self.hji.is_some() {
                    return Err(Error::invalid("hji", "kind \"game\" takes no \"hji\" section"));
                }
                non_negative("R_Y", g.r_y)?;
                non_negative("R_Z", g.r_z)?;
                non_negative("C1", g.c1)?;
                non_negative("C1p", g.c1p)?;
                non_negative("C2p", g.c2p)?;
                if let Some(c2) = g.c2 {
                    non_negative("C2", c2)?;
                }
                g.running.validate()?;
                g.terminal.validate()?;
            }
            Kind::Hji => {
                let h = self
                    .hji
                    .as_ref()
                    .ok_or_else(|| Error::invalid("hji", "kind \"hji\" needs an \"hji\" section"))?;
                if self.game.is_some() {
                    return Err(Error::invalid("game", "kind \"hji\" takes no \"game\" section"));
                }
                non_negative("K", h.k)?;
                non_negative("D1", h.d1)?;
                non_negative("D1p", h.d1p)?;
                non_negative("C2p", h.c2p)?;
                if let Some(c2) = h.c2 {
                    non_negative("C2", c2)?;
                }
                h.hamiltonian.validate()?;
                h.initial.validate()?;
            }
        }
        Ok(())
    }

    /// The scenario used throughout the documentation: `𝓗(y) = ‖y‖`,
    /// `g` the gauge, `K = T = C2′ = 1`, `D1′ = 0`, baseline grid.
    pub fn canonical() -> Self {
        Scenario {
            schema: SCENARIO_SCHEMA.to_string(),
            kind: Kind::Hji,
            horizon: 1.0,
            game: None,
            hji: Some(HjiSection {
                hamiltonian: HamiltonianSpec::Norm { scale: 1.0 },
                initial: TerminalSpec::Gauge,
                d1: 4.0 * 0.5f64.exp(),
                d1p: 0.0,
                k: 1.0,
                c2: None,
                c2p: 1.0,
            }),
            grid: GridSection::default(),
            steps: 20,
            lattice: LatticeSection::default(),
            seed: 0,
            outputs: None,
            checks: ChecksSection::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trips() {
        let sc = Scenario::canonical();
        sc.validate().unwrap();
        assert_eq!(Scenario::from_json(&sc.to_json()).unwrap(), sc);
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let text = r#"{"schema": "heisgame.scenario/v1", "kind": "hji", "T": 1.0,
            "hji": {"hamiltonian": {"name": "norm"}, "initial": {"name": "gauge"},
                    "D1": 1, "D1p": 0, "K": 1, "C2p": 1}}"#;
        let sc = Scenario::from_json(text).unwrap();
        assert_eq!(sc.steps, 20);
        assert_eq!(sc.grid.counts, [33, 33, 65]);
        assert_eq!(sc.lattice.y.rings, 4);
        assert_eq!(sc.seed, 0);
    }

    #[test]
    fn validation_names_the_field() {
        let mut sc = Scenario::canonical();
        sc.horizon = -1.0;
        let err = sc.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidArgument { name: "T", .. }), "{err}");

        let mut sc = Scenario::canonical();
        sc.hji.as_mut().unwrap().k = -1.0;
        assert!(matches!(sc.validate().unwrap_err(), Error::InvalidArgument { name: "K", .. }));

        let mut sc = Scenario::canonical();
        sc.schema = "v0".into();
        assert!(matches!(sc.validate().unwrap_err(), Error::InvalidArgument { name: "schema", .. }));

        let mut sc = Scenario::canonical();
        sc.game = Some(GameSection {
            r_y: 1.0,
            r_z: 1.0,
            running: RunningSpec::Coupling,
            terminal: TerminalSpec::Gauge,
            c1: 1.0,
            c1p: 0.0,
            c2: None,
            c2p: 1.0,
            value: Value::Lower,
        });
        assert!(sc.validate().is_err());

        let err = Scenario::from_json(r#"{"schema": "heisgame.scenario/v1", "kind": "hji", "T": 1, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }
}
