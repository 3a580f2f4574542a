//! Scenario-driven runs: `solve`, `verify`, `converge` and `audit`.
//!
//! Every command writes into an output directory and returns a report; the
//! binary maps reports and errors to exit codes with [`exit_code`].

pub mod builtins;
pub mod converge;
pub mod scenario;
pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use converge::{run_converge, ConvergeRow, DEFAULT_MAX_VALUES};
pub use scenario::{Kind, Scenario, SCENARIO_SCHEMA};
pub use verify::{run_verify, CheckEntry, VerifyBundle};

use crate::error::{Error, Result};
use crate::flow::SignConvention;
use crate::game::{backward_induction, lipschitz_audit, make_lattice, ControlLattice, GameConstants, GameSpec, LipschitzAudit, Value, AUDIT_SLACK, TAINT_TOLERANCE};
use crate::grid::io::{read_value_grid, write_value_grid};
use crate::grid::{GridSpec, ValueGrid};
use crate::group::BoxRegion;
use crate::hji::{self, HjiProblem, KINK_FACTOR};

pub const MANIFEST_FORMAT: &str = "heisgame.manifest/v1";
pub const VALUES_DIR: &str = "values";

/// Exit status for a failed command: 3 for numerical aborts, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite { .. } | Error::NoSmoothProbes { .. } => 3,
        _ => 2,
    }
}

/// A scenario resolved into solver inputs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub spec: GameSpec,
    pub problem: Option<HjiProblem>,
    pub grid: GridSpec,
    pub yd: ControlLattice,
    pub zd: ControlLattice,
    pub which: Value,
}

fn max_abs_over_nodes(f: &(dyn Fn(&crate::group::HPoint) -> f64 + Send + Sync), grid: &GridSpec) -> Result<f64> {
    let mut m: f64 = 0.0;
    for idx in 0..grid.len() {
        let x = grid.node_at(idx);
        let v = f(&x);
        if !v.is_finite() {
            return Err(Error::non_finite(format!("g({x:?})"), v));
        }
        m = m.max(v.abs());
    }
    Ok(m)
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared> {
    scenario.validate()?;
    let grid = scenario.grid.to_spec()?;
    let (spec, problem, which) = match scenario.kind {
        Kind::Game => {
            let g = scenario.game.as_ref().expect("validated");
            let terminal = g.terminal.build();
            let c2 = match g.c2 {
                Some(c) => c,
                None => max_abs_over_nodes(terminal.as_ref(), &grid)?,
            };
            let spec = GameSpec::new(
                scenario.horizon,
                g.r_y,
                g.r_z,
                g.running.build(),
                terminal,
                GameConstants { c1: g.c1, c1p: g.c1p, c2, c2p: g.c2p },
            )?;
            (spec, None, g.value)
        }
        Kind::Hji => {
            let h = scenario.hji.as_ref().expect("validated");
            let initial = h.initial.build();
            let c2 = match h.c2 {
                Some(c) => c,
                None => max_abs_over_nodes(initial.as_ref(), &grid)?,
            };
            let problem = HjiProblem {
                horizon: scenario.horizon,
                hamiltonian: h.hamiltonian.build(),
                initial,
                d1: h.d1,
                d1p: h.d1p,
                k: h.k,
                c2,
                c2p: h.c2p,
            };
            (hji::build_game(&problem)?, Some(problem), Value::Lower)
        }
    };
    let yd = make_lattice(spec.r_y, scenario.lattice.y.rings, scenario.lattice.y.base_angles)?;
    let zd = make_lattice(spec.r_z, scenario.lattice.z.rings, scenario.lattice.z.base_angles)?;
    Ok(Prepared {
        scenario: scenario.clone(),
        spec,
        problem,
        grid,
        yd,
        zd,
        which,
    })
}

impl Prepared {
    /// Backward induction in game time: slice `k` holds `V(k h, ·)`.
    pub fn solve_game_time(&self) -> Result<ValueGrid> {
        backward_induction(
            &self.spec,
            &self.grid,
            self.scenario.steps,
            &self.yd,
            &self.zd,
            self.which,
            SignConvention::Minus,
        )
    }

    /// The grid written by `solve`: `V` for games, the time-reversed `U` for
    /// Hamilton–Jacobi scenarios.
    pub fn output_grid(&self, v: ValueGrid) -> ValueGrid {
        match self.scenario.kind {
            Kind::Game => v,
            Kind::Hji => hji::reverse_time(v, self.scenario.horizon),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstant {
    pub name: String,
    pub value: f64,
    pub formula: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub scenario: Scenario,
    pub constants: Vec<DerivedConstant>,
    pub lattice_points: [usize; 2],
    pub covering_radius_y: f64,
    pub covering_radius_z: f64,
    pub trusted_region: BoxRegion,
    pub trusted_nodes_initial: usize,
    pub time_step: f64,
    /// `"V"` (game time) or `"U"` (reversed).
    pub stored: String,
    pub values_dir: String,
}

fn constant(name: &str, value: f64, formula: &str) -> DerivedConstant {
    DerivedConstant {
        name: name.to_string(),
        value,
        formula: formula.to_string(),
    }
}

/// Every constant used by the audits, with the formula it comes from.
pub fn derived_constants(p: &Prepared) -> Vec<DerivedConstant> {
    let s = &p.spec;
    let h = s.horizon / p.scenario.steps as f64;
    let mut out = Vec::new();
    if let Some(prob) = &p.problem {
        out.push(constant("K", prob.k, "input"));
        out.push(constant("D1", prob.d1, "input: bound on |H|"));
        out.push(constant("D1p", prob.d1p, "input: d_G-Lipschitz constant of H in x"));
        out.push(constant("R_Z", s.r_z, "K"));
        out.push(constant("R_Y", s.r_y, "(1+3K) e^{TK/2} (D1p T + C2p)"));
        out.push(constant("C1", s.constants.c1, "D1 + R_Z R_Y"));
        out.push(constant("C1p", s.constants.c1p, "D1p"));
    } else {
        out.push(constant("R_Z", s.r_z, "input"));
        out.push(constant("R_Y", s.r_y, "input"));
        out.push(constant("C1", s.constants.c1, "input: bound on |F|"));
        out.push(constant("C1p", s.constants.c1p, "input: d_G-Lipschitz constant of F in x"));
    }
    let c2_formula = if p.scenario.game.as_ref().map(|g| g.c2.is_none()).unwrap_or(false)
        || p.scenario.hji.as_ref().map(|g| g.c2.is_none()).unwrap_or(false)
    {
        "max |g| over grid nodes"
    } else {
        "input: bound on |g|"
    };
    out.push(constant("C2", s.constants.c2, c2_formula));
    out.push(constant("C2p", s.constants.c2p, "input: d_G-Lipschitz constant of g"));
    out.push(constant("C_hat", (s.horizon * s.r_z / 2.0).exp(), "e^{T R_Z/2}"));
    out.push(constant("C_tilde", s.c_tilde(), "(1+3R_Z) e^{T R_Z/2}"));
    out.push(constant("C_sharp", s.c_sharp(), "C_tilde (C1p T + C2p)"));
    out.push(constant("C_prime", s.c_prime(), "C_sharp + C1"));
    out.push(constant("h", h, "T / N"));
    out.push(constant("cov_Y", p.yd.covering_radius, "covering radius of the Player I lattice"));
    out.push(constant("cov_Z", p.zd.covering_radius, "covering radius of the Player II lattice"));
    out.push(constant("audit_slack", AUDIT_SLACK, "relative margin over C_sharp and C_prime"));
    out.push(constant("dpp_tolerance", verify::DPP_TOLERANCE, "bound on the two-step residual"));
    out.push(constant("taint_tolerance", TAINT_TOLERANCE, "largest taint of a trusted node"));
    if let Some(prob) = &p.problem {
        out.push(constant(
            "identity_tolerance",
            verify::identity_tolerance(prob, &p.yd, &p.zd),
            "2 (cov_Y + cov_Z)(1 + K)",
        ));
        out.push(constant(
            "initial_trace_bound",
            hji::initial_trace_rate(s, h) * (1.0 + AUDIT_SLACK),
            "(C1 + 3 C2p R_Z) h (1 + audit_slack)",
        ));
        out.push(constant("kink_factor", KINK_FACTOR, "second-difference multiple of the median marking a kink"));
        out.push(constant("pde_median_tolerance", verify::PDE_MEDIAN_TOLERANCE, "bound on the median PDE residual"));
    }
    out
}

fn manifest(p: &Prepared, values: &ValueGrid) -> Manifest {
    Manifest {
        format: MANIFEST_FORMAT.to_string(),
        scenario: p.scenario.clone(),
        constants: derived_constants(p),
        lattice_points: [p.yd.len(), p.zd.len()],
        covering_radius_y: p.yd.covering_radius,
        covering_radius_z: p.zd.covering_radius,
        trusted_region: values.trusted_region,
        trusted_nodes_initial: values.trusted_nodes().len(),
        time_step: values.time_step(),
        stored: match p.scenario.kind {
            Kind::Game => "V".into(),
            Kind::Hji => "U".into(),
        },
        values_dir: VALUES_DIR.to_string(),
    }
}

/// Appends a line to `out/run.log`.
pub(crate) fn log(out: &Path, line: &str) -> Result<()> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(out.join("run.log"))?;
    writeln!(f, "{line}")?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SolveSummary {
    pub out: PathBuf,
    pub manifest: Manifest,
    pub values: ValueGrid,
}

/// Solves the scenario and writes `values/`, `manifest.json` and `run.log`
/// under `out`.
pub fn run_solve(scenario: &Scenario, out: &Path, csv: bool) -> Result<SolveSummary> {
    let p = prepare(scenario)?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    log(out, &format!("solve: kind {:?}, grid {:?}, N {}, lattices {}x{}", scenario.kind, p.grid.counts, scenario.steps, p.yd.len(), p.zd.len()))?;
    let values = p.output_grid(p.solve_game_time()?);
    log(out, &format!("solve: backward induction took {:.2} s", start.elapsed().as_secs_f64()))?;
    write_value_grid(&out.join(VALUES_DIR), &values, csv)?;
    let manifest = manifest(&p, &values);
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    let mut line = String::from("solve: constants");
    for c in &manifest.constants {
        let _ = write!(line, " {}={}", c.name, c.value);
    }
    log(out, &line)?;
    log(out, &format!("solve: {} trusted nodes at t=0, written to {}", manifest.trusted_nodes_initial, out.display()))?;
    Ok(SolveSummary { out: out.to_path_buf(), manifest, values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub lipschitz: LipschitzAudit,
    pub initial_matches_datum: Option<bool>,
    pub passed: bool,
}

/// Re-audits a directory written by [`run_solve`].
pub fn run_audit(dir: &Path) -> Result<AuditOutcome> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != MANIFEST_FORMAT {
        return Err(Error::Format(format!("unknown manifest format {}", m.format)));
    }
    let p = prepare(&m.scenario)?;
    let values = read_value_grid(&dir.join(&m.values_dir))?;
    let lipschitz = lipschitz_audit(&values, &p.spec)?;
    let initial_matches_datum = match p.scenario.kind {
        Kind::Hji => Some(verify::initial_slice_error(&values, &p.spec) == 0.0),
        Kind::Game => None,
    };
    let passed = lipschitz.passed() && initial_matches_datum.unwrap_or(true);
    let outcome = AuditOutcome {
        lipschitz,
        initial_matches_datum,
        passed,
    };
    fs::write(dir.join("audit.json"), serde_json::to_string_pretty(&outcome)?)?;
    Ok(outcome)
}
