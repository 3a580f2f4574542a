//! The `verify` bundle: every structural check on one scenario.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log, prepare, Kind, Prepared, Scenario};
use crate::error::Result;
use crate::flow::{
    check_reach_bound, check_shifted_start_bound, check_translation_identity, rk4_gap, shifted_start_constant, PiecewiseConstantControl,
    SignConvention,
};
use crate::game::{
    backward_induction, brute_force_value, dpp_residual, isaacs_gap, lipschitz_audit, make_lattice, sample_ball, sample_dpp_probes, ControlLattice,
    GameSpec, AUDIT_SLACK,
};
use crate::grid::ValueGrid;
use crate::group::{group_axiom_suite, h_convexity_check, BoxRegion, HPoint};
use crate::hji::{self, HjiProblem};

pub const GROUP_TOLERANCE: f64 = 1e-12;
pub const FLOW_TOLERANCE: f64 = 1e-10;
pub const RK4_SUBSTEPS: usize = 16;
pub const REACH_SLACK: f64 = 1e-9;
pub const ORACLE_TOLERANCE: f64 = 5e-2;
pub const ORACLE_EXACT_TOLERANCE: f64 = 1e-12;
pub const DPP_TOLERANCE: f64 = 5e-2;
pub const DPP_STEPS: usize = 2;
pub const PDE_MEDIAN_TOLERANCE: f64 = 0.1;
const CONVEXITY_PROBES: usize = 21;

/// Identity tolerance `2 (cov_Y + cov_Z)(1 + K)`.
pub fn identity_tolerance(p: &HjiProblem, yd: &ControlLattice, zd: &ControlLattice) -> f64 {
    2.0 * (yd.covering_radius + zd.covering_radius) * (1.0 + p.k)
}

/// `max |U(0, x) − g(x)|` over all nodes of slice 0.
pub fn initial_slice_error(u: &ValueGrid, spec: &GameSpec) -> f64 {
    let s0 = &u.slices[0];
    (0..s0.values.len())
        .map(|idx| (s0.values[idx] - spec.terminal(&s0.spec.node_at(idx))).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    /// The inequality or identity being tested.
    pub anchor: String,
    /// Threshold the measured value is compared against.
    pub constant: f64,
    pub measured: f64,
    pub passed: bool,
    /// Informational entries are reported but never fail the bundle.
    pub informational: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckEntry {
    fn at_most(name: &str, anchor: &str, constant: f64, measured: f64) -> Self {
        CheckEntry {
            name: name.into(),
            anchor: anchor.into(),
            constant,
            measured,
            passed: measured <= constant,
            informational: false,
            detail: String::new(),
        }
    }

    fn info(mut self) -> Self {
        self.informational = true;
        self
    }

    fn detail(mut self, d: String) -> Self {
        self.detail = d;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyBundle {
    pub seed: u64,
    pub checks: Vec<CheckEntry>,
    pub passed: bool,
}

impl VerifyBundle {
    pub fn failures(&self) -> Vec<&CheckEntry> {
        self.checks.iter().filter(|c| !c.passed && !c.informational).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Control on `[0, horizon]` with 1 to 8 segments at random breakpoints and
/// values uniform in the disc of radius `r`.
pub fn random_control<R: Rng + ?Sized>(horizon: f64, r: f64, rng: &mut R) -> PiecewiseConstantControl {
    let n = rng.gen_range(1..=8usize);
    let mut cuts: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.0..horizon)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.retain(|&c| c > 0.0);
    cuts.push(horizon);
    let values = cuts.iter().map(|_| sample_ball(r, rng)).collect();
    PiecewiseConstantControl::new(0.0, cuts, values).expect("breakpoints are increasing")
}

fn flow_checks(sc: &Scenario, spec: &GameSpec, checks: &mut Vec<CheckEntry>) -> Result<()> {
    let seed = sc.seed;
    let c = &sc.checks;
    let cube = BoxRegion::cube(5.0)?;

    let g = group_axiom_suite(&cube, c.group_samples, &mut rng(seed, 1))?;
    checks.push(
        CheckEntry::at_most(
            "group_axioms",
            "associativity, identity, inverse, left invariance of d_G, homogeneity of the gauge",
            GROUP_TOLERANCE,
            g.worst(),
        )
        .detail(format!("{} random triples in [-5,5]^3", g.samples)),
    );

    let mut r = rng(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..c.flow_controls {
        let u = random_control(1.0, 2.0, &mut r);
        worst = worst.max(rk4_gap(&cube.sample(&mut r), &u, SignConvention::Plus, RK4_SUBSTEPS)?);
    }
    checks.push(
        CheckEntry::at_most("flow_exactness", "d_G(closed form, RK4) at breakpoints", FLOW_TOLERANCE, worst)
            .detail(format!("{} controls, |z| <= 2, {RK4_SUBSTEPS} RK4 steps per segment, double-double", c.flow_controls)),
    );

    let mut r = rng(seed, 3);
    let mut worst: f64 = 0.0;
    let radii = [0.5, 1.0, 2.0];
    for k in 0..c.reach_controls {
        let r_z = radii[k % radii.len()];
        let u = random_control(sc.horizon, r_z, &mut r);
        worst = worst.max(check_reach_bound(&cube.sample(&mut r), &u, r_z)?.worst_ratio);
    }
    checks.push(
        CheckEntry::at_most("reach_bound", "d_G(xi, x(t)) <= 3 R_Z (t - tau)", 1.0 + REACH_SLACK, worst)
            .detail(format!("{} controls, R_Z in {{0.5, 1, 2}}; measured is the worst ratio", c.reach_controls)),
    );

    let mut r = rng(seed, 4);
    let (mut dev, mut gron, mut drift): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut gron_ok, mut drift_ok) = (true, true);
    for _ in 0..c.translation_pairs {
        let u = random_control(sc.horizon, spec.r_z, &mut r);
        let rep = check_translation_identity(&cube.sample(&mut r), &cube.sample(&mut r), &u, spec.r_z)?;
        dev = dev.max(rep.max_deviation);
        gron = gron.max(rep.gronwall_ratio);
        gron_ok &= rep.gronwall_ok;
        drift = drift.max(rep.drift_ratio);
        drift_ok &= rep.drift_ok;
    }
    checks.push(CheckEntry::at_most(
        "translation_identity",
        "x_hat(t) = xi_hat o xi^-1 o x(t)",
        FLOW_TOLERANCE,
        dev,
    ));
    let mut e = CheckEntry::at_most("translation_separation", "d_G(x(t), x_hat(t)) <= d_G(xi, xi_hat) + R_Z (t - tau)/2", 1.0, drift);
    e.passed &= drift_ok;
    checks.push(e.detail(format!("{} pairs; measured is the worst ratio", c.translation_pairs)));
    let mut e = CheckEntry::at_most("translation_exponential", "d_G(x(t), x_hat(t)) <= e^{T R_Z/2} d_G(xi, xi_hat)", 1.0, gron).info();
    e.passed &= gron_ok;
    checks.push(e.detail("fails for close starting points: the gap grows like the square root of the horizontal distance".into()));

    let mut r = rng(seed, 5);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for _ in 0..c.shifted_starts {
        let u = random_control(sc.horizon, spec.r_z, &mut r);
        let tau_p = r.gen_range(0.0..=sc.horizon);
        let rep = check_shifted_start_bound(&cube.sample(&mut r), &cube.sample(&mut r), 0.0, tau_p, &u, spec.r_z)?;
        worst = worst.max(rep.ratio);
        ok &= rep.ok;
    }
    let mut e = CheckEntry::at_most(
        "shifted_start",
        "d_G(x(t), x_tilde(t)) <= C_tilde (d_G(xi_tilde, xi) + tau' - tau)",
        1.0,
        worst,
    );
    e.passed &= ok;
    checks.push(e.detail(format!(
        "{} instances, C_tilde = {}; measured is the worst ratio",
        c.shifted_starts,
        shifted_start_constant(spec.r_z, sc.horizon)
    )));
    Ok(())
}

/// Largest `|V_N(0, x) − oracle(x)|` over `probes` random nodes trusted at
/// every slice, with `N = steps` and 9-point lattices.
pub fn oracle_gap(p: &Prepared, steps: usize, probes: usize, seed: u64) -> Result<(f64, f64)> {
    let spec = &p.spec;
    let yd = make_lattice(spec.r_y, 1, 8)?;
    let zd = make_lattice(spec.r_z, 1, 8)?;
    let v = backward_induction(spec, &p.grid, steps, &yd, &zd, p.which, SignConvention::Minus)?;
    let nodes = v.trusted_nodes();
    let tol = if spec.r_z == 0.0 { ORACLE_EXACT_TOLERANCE } else { ORACLE_TOLERANCE };
    if nodes.is_empty() {
        return Ok((f64::INFINITY, tol));
    }
    let mut r = rng(seed, 6);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let idx = nodes[r.gen_range(0..nodes.len())];
        let x = p.grid.node_at(idx);
        let o = brute_force_value(spec, &x, steps, &yd, &zd, p.which)?;
        worst = worst.max((o - v.slices[0].values[idx]).abs());
    }
    Ok((worst, tol))
}

fn game_checks(p: &Prepared, v: &ValueGrid, checks: &mut Vec<CheckEntry>, out: &Path) -> Result<()> {
    let sc = &p.scenario;
    let spec = &p.spec;
    let seed = sc.seed;

    let t0 = Instant::now();
    let (gap, tol) = oracle_gap(p, sc.checks.oracle_steps, sc.checks.oracle_probes, seed)?;
    checks.push(
        CheckEntry::at_most("oracle_equivalence", "backward induction = brute-force game tree", tol, gap).detail(format!(
            "N = {}, 9-point lattices, {} trusted nodes",
            sc.checks.oracle_steps, sc.checks.oracle_probes
        )),
    );
    log(out, &format!("verify: oracle {gap:.3e} ({:.1} s)", t0.elapsed().as_secs_f64()))?;

    let t0 = Instant::now();
    let probes = sample_dpp_probes(v, DPP_STEPS, sc.checks.dpp_probes, &mut rng(seed, 7));
    let dpp = dpp_residual(v, spec, &p.yd, &p.zd, p.which, SignConvention::Minus, &probes, DPP_STEPS)?;
    let mut e = CheckEntry::at_most("dpp_residual", "V(tau) = alternating value over [tau, tau + 2h] of V(tau + 2h)", DPP_TOLERANCE, dpp.max_residual)
        .detail(format!("{} probes evaluated, mean {:.3e}", dpp.evaluated, dpp.mean_residual));
    e.passed &= dpp.evaluated > 0;
    checks.push(e);
    log(out, &format!("verify: dpp {:.3e} ({:.1} s)", dpp.max_residual, t0.elapsed().as_secs_f64()))?;

    let audit = lipschitz_audit(v, spec)?;
    for rep in [&audit.spatial, &audit.space_time] {
        let name = if std::ptr::eq(rep, &audit.spatial) { "lipschitz_spatial" } else { "lipschitz_space_time" };
        let mut e = CheckEntry::at_most(name, &rep.quantity, rep.constant * (1.0 + AUDIT_SLACK), rep.worst_ratio)
            .detail(format!("{} pairs, slack {AUDIT_SLACK}", rep.pairs));
        e.passed = rep.passed;
        checks.push(e);
    }

    let region = v.trusted_region;
    let warnings = spec.spot_check(&region, sc.checks.spot_checks, &mut rng(seed, 8));
    checks.push(
        CheckEntry::at_most("declared_constants", "|F| <= C1, |g| <= C2 and Lipschitz bounds on random samples", 0.0, warnings.len() as f64)
            .info()
            .detail(warnings.join("; ")),
    );

    let hc = h_convexity_check(|x: &HPoint| spec.terminal(x), &region, sc.checks.convexity_lines, CONVEXITY_PROBES, &mut rng(seed, 9))?;
    let mut e = CheckEntry::at_most("h_convexity_of_g", "s -> g(x o (s w, 0)) is convex", 0.0, hc.worst_violation.max(0.0)).info();
    e.passed = hc.passed;
    checks.push(e.detail(format!("{} horizontal lines", hc.lines)));
    Ok(())
}

fn hji_checks(p: &Prepared, prob: &HjiProblem, v: &ValueGrid, checks: &mut Vec<CheckEntry>, out: &Path) -> Result<()> {
    let sc = &p.scenario;
    let spec = &p.spec;
    let u = hji::reverse_time(v.clone(), sc.horizon);

    checks.push(CheckEntry::at_most("initial_datum", "U(0, .) = g at every node", 0.0, initial_slice_error(&u, spec)));

    let t0 = Instant::now();
    let probes = hji::sample_identity_probes(spec, &u.trusted_region, sc.checks.hamiltonian_probes, &mut rng(sc.seed, 10));
    let id = hji::hamiltonian_identity_check(prob, spec, &p.yd, &p.zd, &probes)?;
    checks.push(
        CheckEntry::at_most("hamiltonian_identity", "H^-(T - t, x, lambda) = -H(t, x, lambda)", identity_tolerance(prob, &p.yd, &p.zd), id.max_error)
            .detail(format!("{} probes with |lambda| <= R_Y", probes.len())),
    );
    log(out, &format!("verify: identity {:.3e} ({:.1} s)", id.max_error, t0.elapsed().as_secs_f64()))?;

    let pde = hji::pde_residual(&u, prob, &hji::interior_probes(&u))?;
    checks.push(
        CheckEntry::at_most("pde_residual_median", "u_t + H(t, x, grad_H u) = 0 at smooth probes", PDE_MEDIAN_TOLERANCE, pde.median).detail(format!(
            "max {:.3e}, {} retained, {} excluded as kinks",
            pde.max, pde.retained, pde.excluded
        )),
    );

    let trace = hji::uniqueness_initial_trace(&u)?;
    checks.push(
        CheckEntry::at_most(
            "initial_trace",
            "sup |U(h, x) - U(0, x)| <= (C1 + 3 C2p R_Z) h",
            hji::initial_trace_rate(spec, u.time_step()) * (1.0 + AUDIT_SLACK),
            trace.sup_gap,
        )
        .detail(format!("{} nodes", trace.nodes)),
    );

    let warnings = prob.spot_check(&u.trusted_region, sc.checks.spot_checks, &mut rng(sc.seed, 11));
    checks.push(
        CheckEntry::at_most("hamiltonian_lipschitz_in_y", "|H(t,x,y) - H(t,x,y')| <= K |y - y'|", 0.0, warnings.len() as f64)
            .info()
            .detail(warnings.join("; ")),
    );
    Ok(())
}

fn isaacs_entry(p: &Prepared, region: &BoxRegion) -> Result<CheckEntry> {
    let mut r = rng(p.scenario.seed, 12);
    let probes = hji::sample_identity_probes(&p.spec, region, p.scenario.checks.hamiltonian_probes.min(200), &mut r);
    let gap = isaacs_gap(&p.spec, &probes, &p.yd, &p.zd)?;
    Ok(CheckEntry::at_most("isaacs_gap", "H^+ - H^- on the lattices", 1e-12, gap.max_gap).info())
}

/// Runs the full check bundle and writes `out/verify.json`.
pub fn run_verify(scenario: &Scenario, out: &Path) -> Result<VerifyBundle> {
    let p = prepare(scenario)?;
    fs::create_dir_all(out)?;
    let mut checks = Vec::new();
    let t0 = Instant::now();
    flow_checks(scenario, &p.spec, &mut checks)?;
    log(out, &format!("verify: group and flow checks ({:.1} s)", t0.elapsed().as_secs_f64()))?;

    let t0 = Instant::now();
    let v = p.solve_game_time()?;
    log(out, &format!("verify: solve ({:.1} s)", t0.elapsed().as_secs_f64()))?;
    game_checks(&p, &v, &mut checks, out)?;
    checks.push(isaacs_entry(&p, &v.trusted_region)?);
    if let (Kind::Hji, Some(prob)) = (scenario.kind, &p.problem) {
        hji_checks(&p, prob, &v, &mut checks, out)?;
    }
    let passed = checks.iter().all(|c| c.passed || c.informational);
    let bundle = VerifyBundle {
        seed: scenario.seed,
        checks,
        passed,
    };
    fs::write(out.join("verify.json"), serde_json::to_string_pretty(&bundle)?)?;
    for c in &bundle.checks {
        log(
            out,
            &format!(
                "verify: {:<24} {:>12.4e} vs {:>12.4e} {}",
                c.name,
                c.measured,
                c.constant,
                match (c.passed, c.informational) {
                    (true, _) => "ok",
                    (false, true) => "note",
                    (false, false) => "FAIL",
                }
            ),
        )?;
    }
    Ok(bundle)
}
