//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process fails when a criterion fails, except for a criterion whose
//! failure is known and whose known cause is reproduced here.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heisgame::cli::builtins::{RunningSpec, TerminalSpec};
use heisgame::cli::verify::{oracle_gap, random_control, DPP_STEPS, RK4_SUBSTEPS};
use heisgame::cli::{prepare, run_converge, Prepared, Scenario, DEFAULT_MAX_VALUES};
use heisgame::flow::{check_reach_bound, check_shifted_start_bound, check_translation_identity, rk4_gap};
use heisgame::game::{
    backward_induction, brute_force_value, dpp_residual, lipschitz_audit, make_lattice, sample_dpp_probes, GameConstants, GameSpec,
    LipschitzAudit, Value, AUDIT_SLACK,
};
use heisgame::grid::ValueGrid;
use heisgame::group::{group_axiom_suite, h_convexity_check, BoxRegion};
use heisgame::hji::{self, HjiProblem};
use heisgame::{gauge, GridSpec, HPoint, PiecewiseConstantControl, PlaneVector, SignConvention};

const SEED: u64 = 0;

struct Line {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    /// For a failing criterion: whether the recorded cause was reproduced.
    known_cause: Option<bool>,
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn line(id: u32, title: &'static str, passed: bool, detail: String) -> Line {
    Line { id, title, passed, detail, known_cause: None }
}

fn canonical_with(counts: [usize; 3], steps: usize, rings: usize) -> Scenario {
    let mut sc = Scenario::canonical();
    sc.grid.counts = counts;
    sc.steps = steps;
    sc.lattice.y.rings = rings;
    sc.lattice.z.rings = rings;
    sc
}

fn dpp_max(p: &Prepared, v: &ValueGrid) -> f64 {
    let probes = sample_dpp_probes(v, DPP_STEPS, 300, &mut rng(7));
    let r = dpp_residual(v, &p.spec, &p.yd, &p.zd, p.which, SignConvention::Minus, &probes, DPP_STEPS).expect("dpp residual");
    assert!(r.evaluated > 0, "no DPP probe evaluated");
    r.max_residual
}

fn c1_group() -> Line {
    let t = Instant::now();
    let r = group_axiom_suite(&BoxRegion::cube(5.0).unwrap(), 10_000, &mut rng(1)).unwrap();
    let s = secs(t);
    line(
        1,
        "group/metric suite",
        r.worst() <= 1e-12 && s < 5.0,
        format!(
            "worst deviation {:.2e} <= 1e-12 (assoc {:.1e}, id {:.1e}, inv {:.1e}, left-inv {:.1e}, homog {:.1e}); {s:.2} s < 5 s",
            r.worst(),
            r.associativity,
            r.identity,
            r.inverse,
            r.left_invariance,
            r.homogeneity
        ),
    )
}

fn c2_flow() -> Line {
    let t = Instant::now();
    let cube = BoxRegion::cube(5.0).unwrap();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let u = random_control(1.0, 2.0, &mut r);
        worst = worst.max(rk4_gap(&cube.sample(&mut r), &u, SignConvention::Plus, RK4_SUBSTEPS).unwrap());
    }
    let s = secs(t);
    line(
        2,
        "flow exactness",
        worst <= 1e-10 && s < 30.0,
        format!("max d_G(exact, rk4) {worst:.2e} <= 1e-10 over 1000 controls; {s:.2} s < 30 s"),
    )
}

fn c3_reach() -> Line {
    let cube = BoxRegion::cube(5.0).unwrap();
    let mut r = rng(3);
    let (mut worst, mut violations): (f64, usize) = (0.0, 0);
    for k in 0..10_000 {
        let r_z = [0.5, 1.0, 2.0][k % 3];
        let u = random_control(1.0, r_z, &mut r);
        let rep = check_reach_bound(&cube.sample(&mut r), &u, r_z).unwrap();
        worst = worst.max(rep.worst_ratio);
        violations += usize::from(rep.worst_ratio > 1.0 + 1e-9);
    }
    line(
        3,
        "bounded trajectories",
        violations == 0,
        format!("{violations} violations in 10000 controls; worst d_G(xi, x(t)) / (3 R_Z t) = {worst:.4}"),
    )
}

/// Separation from `e` and `(δ, 0, 0)` under `z ≡ (0, 1)` on `[0, 1]`.
fn close_start_separation(delta: f64) -> (f64, f64) {
    let u = PiecewiseConstantControl::uniform(0.0, 1.0, vec![PlaneVector::new(0.0, 1.0)]).unwrap();
    let rep = check_translation_identity(&HPoint::IDENTITY, &HPoint::new(delta, 0.0, 0.0), &u, 1.0).unwrap();
    let predicted = (delta.powi(4) + delta * delta).powf(0.25);
    (rep.gronwall_ratio, predicted / (0.5f64.exp() * delta))
}

fn c4_translation() -> Line {
    let cube = BoxRegion::cube(5.0).unwrap();
    let mut r = rng(4);
    let (mut dev, mut gron, mut drift): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut gron_bad, mut drift_bad) = (0usize, 0usize);
    for _ in 0..10_000 {
        let u = random_control(1.0, 1.0, &mut r);
        let rep = check_translation_identity(&cube.sample(&mut r), &cube.sample(&mut r), &u, 1.0).unwrap();
        dev = dev.max(rep.max_deviation);
        gron = gron.max(rep.gronwall_ratio);
        drift = drift.max(rep.drift_ratio);
        gron_bad += usize::from(!rep.gronwall_ok);
        drift_bad += usize::from(!rep.drift_ok);
    }
    let passed = dev <= 1e-10 && gron_bad == 0;
    let mut l = line(
        4,
        "translation identity and exponential separation",
        passed,
        format!(
            "identity deviation {dev:.2e} <= 1e-10; exponential bound violated in {gron_bad}/10000 pairs (worst ratio {gron:.3}); \
             additive bound d0 + R_Z t/2 violated in {drift_bad} (worst ratio {drift:.3})"
        ),
    );
    if !passed {
        // Recorded cause: the exponential bound fails for close starts while
        // the identity and the additive bound hold.
        let (measured, predicted) = close_start_separation(1e-3);
        let reproduced = dev <= 1e-10 && drift_bad == 0 && (measured / predicted - 1.0).abs() < 1e-6 && measured > 10.0;
        l.detail += &format!("; close starts delta=1e-3 give ratio {measured:.2} (predicted {predicted:.2})");
        l.known_cause = Some(reproduced);
    }
    l
}

fn c5_shifted() -> Line {
    let cube = BoxRegion::cube(5.0).unwrap();
    let mut r = rng(5);
    let (mut worst, mut bad): (f64, usize) = (0.0, 0);
    for _ in 0..1_000 {
        let u = random_control(1.0, 1.0, &mut r);
        let tau_p = r.gen_range(0.0..=1.0);
        let rep = check_shifted_start_bound(&cube.sample(&mut r), &cube.sample(&mut r), 0.0, tau_p, &u, 1.0).unwrap();
        worst = worst.max(rep.ratio);
        bad += usize::from(!rep.ok);
    }
    line(
        5,
        "shifted-start bound",
        bad == 0,
        format!("{bad} violations in 1000 instances; worst ratio to C_tilde (d_G + tau' - tau) = {worst:.3}"),
    )
}

fn frozen_state_games() -> Vec<GameSpec> {
    let consts = GameConstants { c1: 20.0, c1p: 1.0, c2: 10.0, c2p: 1.0 };
    let mut out = Vec::new();
    for running in [
        RunningSpec::Coupling,
        RunningSpec::CustomAffine { c: 0.3, a_t: -0.5, a_x: [0.2, -0.1, 0.05], a_y: [1.0, -0.5], a_z: [0.0, 0.0] },
    ] {
        for terminal in [TerminalSpec::Gauge, TerminalSpec::Affine { coeffs: [1.0, 0.5, 0.25], offset: 0.0 }] {
            out.push(GameSpec::new(1.0, 2.0, 0.0, running.build(), terminal.build(), consts).unwrap());
        }
    }
    out
}

fn c6_oracle() -> Line {
    let t = Instant::now();
    let grid = GridSpec::baseline();
    let mut exact: f64 = 0.0;
    let mut r = rng(6);
    for spec in frozen_state_games() {
        let yd = make_lattice(spec.r_y, 1, 8).unwrap();
        let zd = make_lattice(0.0, 1, 4).unwrap();
        for steps in 1..=3 {
            for which in [Value::Lower, Value::Upper] {
                let v = backward_induction(&spec, &grid, steps, &yd, &zd, which, SignConvention::Minus).unwrap();
                let nodes = v.trusted_nodes();
                for _ in 0..20 {
                    let idx = nodes[r.gen_range(0..nodes.len())];
                    let o = brute_force_value(&spec, &grid.node_at(idx), steps, &yd, &zd, which).unwrap();
                    exact = exact.max((o - v.slices[0].values[idx]).abs());
                }
            }
        }
    }
    let mut affine = canonical_with([33, 33, 65], 20, 4);
    affine.hji.as_mut().unwrap().initial = TerminalSpec::Affine { coeffs: [1.0, 0.5, 0.25], offset: 0.0 };
    let pa = prepare(&affine).unwrap();
    let pg = prepare(&Scenario::canonical()).unwrap();
    let (mut gap, mut gauge_gaps) = (0.0f64, Vec::new());
    for steps in 1..=3 {
        gap = gap.max(oracle_gap(&pa, steps, 50, SEED).unwrap().0);
        gauge_gaps.push(oracle_gap(&pg, steps, 50, SEED).unwrap().0);
    }
    let s = secs(t);
    line(
        6,
        "oracle equivalence",
        exact <= 1e-12 && gap <= 5e-2 && s < 60.0,
        format!(
            "R_Z=0 max gap {exact:.1e} <= 1e-12; baseline N=1..3, 9-point lattices, affine g: {gap:.2e} <= 5e-2 \
             (g = gauge, reported: {:.3} / {:.3} / {:.3}); {s:.1} s < 60 s",
            gauge_gaps[0], gauge_gaps[1], gauge_gaps[2]
        ),
    )
}

struct Baseline {
    prepared: Prepared,
    values: ValueGrid,
    seconds: f64,
}

fn solve_baseline() -> Baseline {
    let prepared = prepare(&Scenario::canonical()).unwrap();
    let t = Instant::now();
    let values = prepared.solve_game_time().unwrap();
    Baseline { prepared, values, seconds: secs(t) }
}

fn c7_dpp(base: &Baseline) -> Line {
    let coarse = prepare(&canonical_with([17, 17, 33], 10, 4)).unwrap();
    let vc = coarse.solve_game_time().unwrap();
    let (rc, rb) = (dpp_max(&coarse, &vc), dpp_max(&base.prepared, &base.values));
    line(
        7,
        "DPP residual",
        rb <= 5e-2 && rb < rc,
        format!("sigma = 2h residual on 33x33x65/N=20: {rb:.2e} <= 5e-2; refinement 17x17x33/N=10 -> baseline: {rc:.2e} -> {rb:.2e}"),
    )
}

fn c8_identity() -> Line {
    let p = prepare(&Scenario::canonical()).unwrap();
    let prob = p.problem.clone().unwrap();
    let probes = hji::sample_identity_probes(&p.spec, &p.grid.region, 1_000, &mut rng(10));
    let mut errs = Vec::new();
    let mut within = true;
    for rings in [2, 4, 8] {
        let yd = make_lattice(p.spec.r_y, rings, 8).unwrap();
        let zd = make_lattice(p.spec.r_z, rings, 8).unwrap();
        let rep = hji::hamiltonian_identity_check(&prob, &p.spec, &yd, &zd, &probes).unwrap();
        let tol = 2.0 * (yd.covering_radius + zd.covering_radius) * (1.0 + prob.k);
        within &= rep.max_error <= tol;
        errs.push((rings, rep.max_error, tol));
    }
    let at4 = errs[1].1;
    let monotone = errs.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-3);
    let ladder: Vec<String> = errs.iter().map(|(r, e, tol)| format!("rings {r}: {e:.2e} (tol {tol:.2e})")).collect();
    line(
        8,
        "Hamiltonian identity",
        within && at4 <= 0.1 && monotone,
        format!("1000 probes; {}; rings 4 <= 0.1, monotone within 1e-3: {monotone}", ladder.join(", ")),
    )
}

fn doubled_r_y_audit(base: &Baseline) -> LipschitzAudit {
    let p = &base.prepared;
    let prob = p.problem.as_ref().unwrap();
    let mut spec = p.spec.clone();
    spec.r_y *= 2.0;
    spec.constants.c1 = spec.r_y + spec.r_z * spec.r_y;
    let yd = make_lattice(spec.r_y, 4, 8).unwrap();
    let v = backward_induction(&spec, &p.grid, p.scenario.steps, &yd, &p.zd, Value::Lower, SignConvention::Minus).unwrap();
    assert!(prob.d1 <= spec.r_y);
    lipschitz_audit(&v, &spec).unwrap()
}

fn c9_lipschitz(base: &Baseline, levels: &[(f64, f64, f64, f64)]) -> Line {
    let a = lipschitz_audit(&base.values, &base.prepared.spec).unwrap();
    let d = doubled_r_y_audit(base);
    let c_sharp = 4.0 * 0.5f64.exp();
    let const_ok = (a.spatial.constant - c_sharp).abs() < 1e-12;
    let excess = |ratio: f64, c: f64| (ratio / c - 1.0).max(0.0);
    let sp: Vec<f64> = levels.iter().map(|l| excess(l.0, l.1)).collect();
    let st: Vec<f64> = levels.iter().map(|l| excess(l.2, l.3)).collect();
    let shrink = |e: &[f64]| e.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let same_status = d.spatial.passed == a.spatial.passed;
    line(
        9,
        "Lipschitz audit",
        const_ok && a.passed() && shrink(&sp) && shrink(&st) && same_status && AUDIT_SLACK == 0.15,
        format!(
            "spatial {:.4} vs C_sharp {:.5} x 1.15; space-time {:.4} vs C' {:.4} x 1.15; excess per level spatial {sp:?} space-time {st:?}; \
             R_Y doubled: spatial {:.4}, passed {} (baseline passed {})",
            a.spatial.worst_ratio, a.spatial.constant, a.space_time.worst_ratio, a.space_time.constant, d.spatial.worst_ratio, d.spatial.passed,
            a.spatial.passed
        ),
    )
}

fn c10_closed_forms() -> Line {
    let c = 0.7;
    let p = HjiProblem {
        horizon: 1.0,
        hamiltonian: Arc::new(move |_, _, _| c),
        initial: Arc::new(gauge),
        d1: c,
        d1p: 0.0,
        k: 0.0,
        c2: 10.0,
        c2p: 1.0,
    };
    let spec = hji::build_game(&p).unwrap();
    let grid = GridSpec::new(GridSpec::baseline().region, [17, 17, 33]).unwrap();
    let (yd, zd) = (make_lattice(spec.r_y, 2, 8).unwrap(), make_lattice(spec.r_z, 1, 8).unwrap());
    let u = hji::solve(&p, &grid, 10, &yd, &zd).unwrap();
    let mut err: f64 = 0.0;
    for (s, t) in u.times.iter().enumerate() {
        for idx in 0..grid.len() {
            if u.is_trusted(s, idx) {
                err = err.max((u.slices[s].values[idx] - (gauge(&grid.node_at(idx)) - c * t)).abs());
            }
        }
    }

    let p1 = HjiProblem {
        horizon: 1.0,
        hamiltonian: Arc::new(|_, _, y: &PlaneVector| y.z1),
        initial: Arc::new(|x: &HPoint| x.x1),
        d1: 10.0,
        d1p: 0.0,
        k: 1.0,
        c2: 10.0,
        c2p: 1.0,
    };
    let steps = 10;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let slices = times
        .iter()
        .map(|&t| heisgame::grid::sample_field(|x| x.x1 - t, &grid).unwrap())
        .collect();
    let exact = ValueGrid::new(times, slices, grid.region).unwrap();
    let res = hji::pde_residual(&exact, &p1, &hji::interior_probes(&exact)).unwrap();
    line(
        10,
        "closed-form solves",
        err <= 1e-10 && res.max <= 1e-8,
        format!("H = 0.7: max |U - (g - 0.7 t)| {err:.1e} <= 1e-10 on trusted nodes; u = x1 - t: max residual {:.1e} <= 1e-8", res.max),
    )
}

fn c11_convergence(base: &Baseline) -> (Line, Vec<(f64, f64, f64, f64)>) {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_converge(&canonical_with([9, 9, 17], 5, 1), 3, DEFAULT_MAX_VALUES, dir.path()).unwrap();
    let ratio = rows[2].ratio.unwrap();
    let levels = rows.iter().map(|r| (r.spatial_ratio, r.c_sharp, r.space_time_ratio, r.c_prime)).collect();
    let diffs: Vec<String> = rows[1..].iter().map(|r| format!("{:.4}", r.sup_diff.unwrap())).collect();
    let lattice = base.prepared.yd.len();
    let l = line(
        11,
        "convergence",
        ratio >= 1.5 && base.seconds <= 600.0,
        format!(
            "levels 9/17/33, N 5/10/20, rings 1/2/4: sup diffs {} ratio {ratio:.3} >= 1.5; baseline solve 33x33x65, N=20, \
             {lattice}-point lattices: {:.1} s on {} thread(s) <= 600 s",
            diffs.join(", "),
            base.seconds,
            rayon::current_num_threads()
        ),
    );
    (l, levels)
}

fn c12_convexity() -> Line {
    let region = BoxRegion::cube(3.0).unwrap();
    let check = |g: &dyn Fn(&HPoint) -> f64| h_convexity_check(g, &region, 500, 21, &mut rng(9)).unwrap();
    let ga = check(&gauge);
    let af = check(&|x: &HPoint| x.x1 - 2.0 * x.x2 + 0.5 * x.x3 + 1.0);
    let cc = check(&|x: &HPoint| -(x.x1 * x.x1 + x.x2 * x.x2));
    let witness = cc.witness.as_ref().map(|w| format!("{:?} dir {:?} s {}", w.base, w.direction, w.s)).unwrap_or_default();
    line(
        12,
        "H-convexity checker",
        ga.passed && af.passed && !cc.passed && cc.witness.is_some(),
        format!("gauge passed {}, affine passed {}, -(x1^2+x2^2) passed {} with witness {witness}", ga.passed, af.passed, cc.passed),
    )
}

fn main() -> ExitCode {
    let t = Instant::now();
    let base = solve_baseline();
    let (l11, levels) = c11_convergence(&base);
    let mut lines = vec![
        c1_group(),
        c2_flow(),
        c3_reach(),
        c4_translation(),
        c5_shifted(),
        c6_oracle(),
        c7_dpp(&base),
        c8_identity(),
        c9_lipschitz(&base, &levels),
        c10_closed_forms(),
        l11,
        c12_convexity(),
    ];
    lines.sort_by_key(|l| l.id);
    let mut unexpected = 0;
    for l in &lines {
        let status = if l.passed { "PASS" } else { "FAIL" };
        println!("{status} criterion {:>2} {}: {}", l.id, l.title, l.detail);
        match (l.passed, l.known_cause) {
            (true, _) => {}
            (false, Some(true)) => println!("     criterion {} fails for its recorded cause, reproduced above", l.id),
            _ => unexpected += 1,
        }
    }
    println!("acceptance: {} of {} criteria pass ({:.0} s)", lines.iter().filter(|l| l.passed).count(), lines.len(), secs(t));
    if unexpected > 0 {
        println!("acceptance: {unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
