//! Initial-value Hamilton–Jacobi problems `u_t + 𝓗(t, x, ∇_H u) = 0`,
//! `u(0, ·) = g`, solved through an associated zero-sum game.
//!
//! With `R_Z = K`, `R_Y = (1 + 3K) e^{TK/2} (D1′ T + C2′)` and running cost
//! `F(t, x, y, z) = −𝓗(T − t, x, y) + z·y`, the lower Hamiltonian satisfies
//! `H⁻(T − t, x, λ) = −𝓗(t, x, λ)` for `‖λ‖ ≤ R_Y`, and
//! `U(t, x) = V⁻(T − t, x)` solves the problem.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{PlaneVector, SignConvention};
use crate::game::{
    backward_induction, lower_hamiltonian, sample_ball, ControlLattice, GameConstants, GameSpec, HamiltonianProbe, TerminalCost, Value,
};
use crate::grid::{GridSpec, ValueGrid};
use crate::group::{BoxRegion, HPoint};

pub type HamiltonianFn = Arc<dyn Fn(f64, &HPoint, &PlaneVector) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct HjiProblem {
    pub horizon: f64,
    pub hamiltonian: HamiltonianFn,
    pub initial: TerminalCost,
    /// `|𝓗| ≤ d1`.
    pub d1: f64,
    /// `d_G`-Lipschitz constant of `𝓗` in `x`.
    pub d1p: f64,
    /// Lipschitz constant of `𝓗` in its gradient argument.
    pub k: f64,
    pub c2: f64,
    pub c2p: f64,
}

impl std::fmt::Debug for HjiProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HjiProblem")
            .field("horizon", &self.horizon)
            .field("d1", &self.d1)
            .field("d1p", &self.d1p)
            .field("k", &self.k)
            .field("c2", &self.c2)
            .field("c2p", &self.c2p)
            .finish_non_exhaustive()
    }
}

impl HjiProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("T", format!("horizon must be positive and finite, got {}", self.horizon)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::invalid("K", format!("must be non-negative, got {}", self.k)));
        }
        for (name, v) in [("D1", self.d1), ("D1p", self.d1p), ("C2", self.c2), ("C2p", self.c2p)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("constants", format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &HPoint, p: &PlaneVector) -> f64 {
        (self.hamiltonian)(t, x, p)
    }

    /// `R_Y = (1 + 3K) e^{TK/2} (D1′ T + C2′)`; equals the gradient bound `C♯`
    /// of the associated game.
    pub fn r_y(&self) -> f64 {
        (1.0 + 3.0 * self.k) * (self.horizon * self.k / 2.0).exp() * (self.d1p * self.horizon + self.c2p)
    }

    /// Sampled check of `|𝓗(t,x,y) − 𝓗(t,x,y′)| ≤ K ‖y − y′‖` for
    /// `y, y′` in the ball of radius `r_y()`; one warning per violated bound.
    pub fn spot_check<R: Rng + ?Sized>(&self, region: &BoxRegion, samples: usize, rng: &mut R) -> Vec<String> {
        let mut warnings = Vec::new();
        let r = self.r_y().max(1.0);
        let (mut k_bad, mut d_bad) = (false, false);
        for _ in 0..samples {
            let t = rng.gen_range(0.0..=self.horizon);
            let x = region.sample(rng);
            let (y, y2) = (sample_ball(r, rng), sample_ball(r, rng));
            let (a, b) = (self.eval(t, &x, &y), self.eval(t, &x, &y2));
            let dist = (y - y2).norm();
            if !k_bad && (a - b).abs() > self.k * dist * (1.0 + 1e-9) + 1e-12 {
                k_bad = true;
                warnings.push(format!(
                    "Hamiltonian ratio {} between {y:?} and {y2:?} exceeds K = {}",
                    (a - b).abs() / dist,
                    self.k
                ));
            }
            if !d_bad && !(a.abs() <= self.d1 * (1.0 + 1e-12)) {
                d_bad = true;
                warnings.push(format!("|H({t}, {x:?}, {y:?})| = {} exceeds D1 = {}", a.abs(), self.d1));
            }
        }
        warnings
    }
}

/// Builds the associated game: `R_Z = K`, `R_Y` from [`HjiProblem::r_y`],
/// `F(t, x, y, z) = −𝓗(T − t, x, y) + z·y`, `C1 = D1 + R_Z R_Y`, `C1′ = D1′`.
pub fn build_game(p: &HjiProblem) -> Result<GameSpec> {
    p.validate()?;
    let r_z = p.k;
    let r_y = p.r_y();
    let horizon = p.horizon;
    let ham = p.hamiltonian.clone();
    let running = Arc::new(move |t: f64, x: &HPoint, y: &PlaneVector, z: &PlaneVector| -ham(horizon - t, x, y) + z.dot(y));
    GameSpec::new(
        horizon,
        r_y,
        r_z,
        running,
        p.initial.clone(),
        GameConstants {
            c1: p.d1 + r_z * r_y,
            c1p: p.d1p,
            c2: p.c2,
            c2p: p.c2p,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `max |H⁻(T − t, x, λ) + 𝓗(t, x, λ)|` over the probes.
    pub max_error: f64,
    pub witness: Option<HamiltonianProbe>,
    /// `(K + 1) cov_Z + (K + R_Z) cov_Y`.
    pub lattice_tolerance: f64,
}

/// Evaluates the lower Hamiltonian of `spec` at `(T − t, x, λ)` against
/// `−𝓗(t, x, λ)`. Probes with `‖λ‖ > R_Y` are rejected.
pub fn hamiltonian_identity_check(
    p: &HjiProblem,
    spec: &GameSpec,
    yd: &ControlLattice,
    zd: &ControlLattice,
    probes: &[HamiltonianProbe],
) -> Result<IdentityReport> {
    if (spec.r_z - p.k).abs() > 1e-12 * (1.0 + p.k) {
        return Err(Error::Precondition(format!("game radius R_Z = {} differs from K = {}", spec.r_z, p.k)));
    }
    let mut report = IdentityReport {
        max_error: 0.0,
        witness: None,
        lattice_tolerance: (p.k + 1.0) * zd.covering_radius + (p.k + spec.r_z) * yd.covering_radius,
    };
    for probe in probes {
        if probe.lambda.norm() > spec.r_y * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "lambda",
                format!("|lambda| = {} exceeds R_Y = {}", probe.lambda.norm(), spec.r_y),
            ));
        }
        let lower = lower_hamiltonian(spec, p.horizon - probe.t, &probe.x, &probe.lambda, yd, zd)?;
        let err = (lower + p.eval(probe.t, &probe.x, &probe.lambda)).abs();
        if err > report.max_error || report.witness.is_none() {
            report.max_error = report.max_error.max(err);
            report.witness = Some(*probe);
        }
    }
    Ok(report)
}

/// Random identity probes: `t` uniform in `[0, T]`, `x` uniform in `region`,
/// `λ` uniform in the ball of radius `R_Y`.
pub fn sample_identity_probes<R: Rng + ?Sized>(spec: &GameSpec, region: &BoxRegion, count: usize, rng: &mut R) -> Vec<HamiltonianProbe> {
    (0..count)
        .map(|_| HamiltonianProbe {
            t: rng.gen_range(0.0..=spec.horizon),
            x: region.sample(rng),
            lambda: sample_ball(spec.r_y, rng),
        })
        .collect()
}

/// Solves the game built from `p` and reverses time, so that slice `k` holds
/// `U(k h, ·)` and slice 0 equals the sampled initial datum.
pub fn solve(p: &HjiProblem, grid: &GridSpec, steps: usize, yd: &ControlLattice, zd: &ControlLattice) -> Result<ValueGrid> {
    let spec = build_game(p)?;
    let v = backward_induction(&spec, grid, steps, yd, zd, Value::Lower, SignConvention::Minus)?;
    Ok(reverse_time(v, p.horizon))
}

/// `t ↦ T − t` re-indexing of a value grid.
pub fn reverse_time(v: ValueGrid, horizon: f64) -> ValueGrid {
    let ValueGrid {
        times,
        mut slices,
        trusted_region,
    } = v;
    slices.reverse();
    let mut times: Vec<f64> = times.iter().rev().map(|t| horizon - t).collect();
    if let Some(first) = times.first_mut() {
        *first = 0.0;
    }
    ValueGrid {
        times,
        slices,
        trusted_region,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeResidualReport {
    pub median: f64,
    pub max: f64,
    pub retained: usize,
    pub excluded: usize,
    /// Probes skipped for lying outside the trusted set or too close to the
    /// grid or time boundary.
    pub skipped: usize,
}

/// A probe for [`pde_residual`]: slice index and node index.
pub type PdeProbe = crate::game::DppProbe;

/// Kink threshold multiplier over the median second difference.
pub const KINK_FACTOR: f64 = 10.0;

/// Residual `|u_t + 𝓗(t, x, ∇_H u)|` at interior probes, with centered
/// differences in time and space and `X1 = ∂1 − (x2/2)∂3`,
/// `X2 = ∂2 + (x1/2)∂3`. Probes whose largest centered second difference
/// exceeds `KINK_FACTOR` times the median (plus `1e-12`) are excluded.
pub fn pde_residual(u: &ValueGrid, p: &HjiProblem, probes: &[PdeProbe]) -> Result<PdeResidualReport> {
    let grid = u.spec();
    let h = u.time_step();
    let d = [grid.spacing(0), grid.spacing(1), grid.spacing(2)];
    let mut residuals = Vec::new();
    let mut curvature = Vec::new();
    let mut skipped = 0;
    for probe in probes {
        let [i, j, k] = grid.unravel(probe.node);
        let interior = (0..3).all(|a| {
            let c = [i, j, k][a];
            c >= 1 && c + 1 < grid.counts[a]
        });
        if probe.slice == 0 || probe.slice + 1 >= u.len() || !interior || !u.is_trusted(probe.slice, probe.node) {
            skipped += 1;
            continue;
        }
        let s = probe.slice;
        let val = |slice: usize, a: usize, b: usize, c: usize| u.slices[slice].values[grid.index(a, b, c)];
        let center = val(s, i, j, k);
        let ut = (val(s + 1, i, j, k) - val(s - 1, i, j, k)) / (2.0 * h);
        let d1 = (val(s, i + 1, j, k) - val(s, i - 1, j, k)) / (2.0 * d[0]);
        let d2 = (val(s, i, j + 1, k) - val(s, i, j - 1, k)) / (2.0 * d[1]);
        let d3 = (val(s, i, j, k + 1) - val(s, i, j, k - 1)) / (2.0 * d[2]);
        let second = [
            val(s + 1, i, j, k) - 2.0 * center + val(s - 1, i, j, k),
            val(s, i + 1, j, k) - 2.0 * center + val(s, i - 1, j, k),
            val(s, i, j + 1, k) - 2.0 * center + val(s, i, j - 1, k),
            val(s, i, j, k + 1) - 2.0 * center + val(s, i, j, k - 1),
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
        let x = grid.node(i, j, k);
        let grad = PlaneVector::new(d1 - 0.5 * x.x2 * d3, d2 + 0.5 * x.x1 * d3);
        let ham = p.eval(u.times[s], &x, &grad);
        if !ham.is_finite() {
            return Err(Error::non_finite(format!("H({}, {x:?}, {grad:?})", u.times[s]), ham));
        }
        residuals.push((ut + ham).abs());
        curvature.push(second);
    }
    if residuals.is_empty() {
        return Err(Error::NoSmoothProbes { excluded: 0 });
    }
    let threshold = KINK_FACTOR * median(&curvature) + 1e-12;
    let kept: Vec<f64> = residuals
        .iter()
        .zip(&curvature)
        .filter(|(_, c)| **c <= threshold)
        .map(|(r, _)| *r)
        .collect();
    let excluded = residuals.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::NoSmoothProbes { excluded });
    }
    Ok(PdeResidualReport {
        median: median(&kept),
        max: kept.iter().copied().fold(0.0, f64::max),
        retained: kept.len(),
        excluded,
        skipped,
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// All interior nodes trusted at every slice strictly between the first and
/// the last, paired with those slices.
pub fn interior_probes(u: &ValueGrid) -> Vec<PdeProbe> {
    let grid = u.spec();
    let mut probes = Vec::new();
    for node in u.trusted_nodes() {
        let [i, j, k] = grid.unravel(node);
        let interior = [i, j, k].iter().zip(grid.counts).all(|(&c, n)| c >= 1 && c + 1 < n);
        if !interior {
            continue;
        }
        for slice in 1..u.len().saturating_sub(1) {
            probes.push(PdeProbe { slice, node });
        }
    }
    probes
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialTraceReport {
    /// `sup |U(h, x) − U(0, x)|` over nodes trusted in both slices.
    pub sup_gap: f64,
    pub witness: Option<HPoint>,
    pub nodes: usize,
}

pub fn uniqueness_initial_trace(u: &ValueGrid) -> Result<InitialTraceReport> {
    if u.len() < 2 {
        return Err(Error::Precondition("need at least two slices".to_string()));
    }
    let grid = u.spec();
    let mut report = InitialTraceReport {
        sup_gap: 0.0,
        witness: None,
        nodes: 0,
    };
    for idx in 0..grid.len() {
        if !(u.is_trusted(0, idx) && u.is_trusted(1, idx)) {
            continue;
        }
        report.nodes += 1;
        let gap = (u.slices[1].values[idx] - u.slices[0].values[idx]).abs();
        if gap > report.sup_gap || report.witness.is_none() {
            report.sup_gap = report.sup_gap.max(gap);
            report.witness = Some(grid.node_at(idx));
        }
    }
    Ok(report)
}

/// Bound used for the initial-trace check: `(C1 + 3 C2′ R_Z) h`.
pub fn initial_trace_rate(spec: &GameSpec, h: f64) -> f64 {
    (spec.constants.c1 + 3.0 * spec.constants.c2p * spec.r_z) * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_lattice;
    use crate::grid::{sample_field, Grid3};
    use crate::group::gauge;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn norm_problem(k: f64, c2p: f64) -> HjiProblem {
        HjiProblem {
            horizon: 1.0,
            hamiltonian: Arc::new(move |_, _, y: &PlaneVector| k * y.norm()),
            initial: Arc::new(gauge),
            d1: 10.0,
            d1p: 0.0,
            k,
            c2: 10.0,
            c2p,
        }
    }

    fn constant_problem(c: f64) -> HjiProblem {
        HjiProblem {
            horizon: 1.0,
            hamiltonian: Arc::new(move |_, _, _| c),
            initial: Arc::new(|x: &HPoint| 0.5 * x.x1 - x.x3 * 0.25),
            d1: c.abs(),
            d1p: 0.0,
            k: 0.0,
            c2: 10.0,
            c2p: 1.0,
        }
    }

    fn small_grid() -> GridSpec {
        GridSpec::new(
            BoxRegion::new(HPoint::new(-2.0, -2.0, -4.0), HPoint::new(2.0, 2.0, 4.0)).unwrap(),
            [9, 9, 17],
        )
        .unwrap()
    }

    #[test]
    fn build_game_constants() {
        let s = build_game(&norm_problem(1.0, 1.0)).unwrap();
        assert_eq!(s.r_z, 1.0);
        assert!((s.r_y - 4.0 * 0.5f64.exp()).abs() < 1e-12);
        assert!((s.r_y - 6.594885).abs() < 1e-6);
        assert_eq!(s.constants.c1, 10.0 + s.r_y);
        assert_eq!(s.constants.c1p, 0.0);
        assert!((s.c_sharp() - s.r_y).abs() < 1e-12);

        let mut p = norm_problem(0.0, 1.0);
        p.d1p = 0.5;
        let s = build_game(&p).unwrap();
        assert_eq!((s.r_z, s.r_y), (0.0, 1.5));

        let p = constant_problem(0.8);
        let s = build_game(&p).unwrap();
        let (y, z) = (PlaneVector::new(0.3, -0.2), PlaneVector::new(1.0, 2.0));
        assert_eq!(s.running(0.1, &HPoint::IDENTITY, &y, &z), -0.8 + z.dot(&y));

        let mut bad = norm_problem(1.0, 1.0);
        bad.k = -1.0;
        assert!(build_game(&bad).is_err());
    }

    #[test]
    fn identity_examples() {
        let p = norm_problem(1.0, 1.0);
        let s = build_game(&p).unwrap();
        let (yd, zd) = (make_lattice(s.r_y, 4, 8).unwrap(), make_lattice(s.r_z, 4, 8).unwrap());
        let probe = |lambda| HamiltonianProbe { t: 0.3, x: HPoint::new(0.1, 0.2, 0.3), lambda };
        let r = hamiltonian_identity_check(&p, &s, &yd, &zd, &[probe(PlaneVector::ZERO)]).unwrap();
        assert_eq!(r.max_error, 0.0);
        let r = hamiltonian_identity_check(&p, &s, &yd, &zd, &[probe(PlaneVector::new(1.0, 0.0))]).unwrap();
        assert!(r.max_error <= r.lattice_tolerance);
        let far = probe(PlaneVector::new(s.r_y + 0.1, 0.0));
        assert!(hamiltonian_identity_check(&p, &s, &yd, &zd, &[far]).is_err());

        let p = constant_problem(0.7);
        let s = build_game(&p).unwrap();
        let (yd, zd) = (make_lattice(s.r_y, 2, 8).unwrap(), make_lattice(0.0, 1, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probes = sample_identity_probes(&s, &BoxRegion::cube(1.0).unwrap(), 100, &mut rng);
        let r = hamiltonian_identity_check(&p, &s, &yd, &zd, &probes).unwrap();
        assert_eq!(r.max_error, 0.0);
    }

    #[test]
    fn constant_hamiltonian_solves_exactly() {
        let c = 0.7;
        let p = constant_problem(c);
        let s = build_game(&p).unwrap();
        let (yd, zd) = (make_lattice(s.r_y, 2, 8).unwrap(), make_lattice(0.0, 1, 4).unwrap());
        let u = solve(&p, &small_grid(), 10, &yd, &zd).unwrap();
        assert_eq!(u.times[0], 0.0);
        let g0 = sample_field(|x| p.initial.as_ref()(x), &small_grid()).unwrap();
        assert_eq!(u.slices[0].values, g0.values);
        for (t, slice) in u.times.iter().zip(&u.slices) {
            for (idx, v) in slice.values.iter().enumerate() {
                let x = slice.spec.node_at(idx);
                assert!((v - ((p.initial)(&x) - c * t)).abs() <= 1e-10);
            }
        }
        let trace = uniqueness_initial_trace(&u).unwrap();
        assert!((trace.sup_gap - c * 0.1).abs() <= 1e-12);
    }

    #[test]
    fn zero_hamiltonian_keeps_initial_datum() {
        let mut p = constant_problem(0.0);
        p.initial = Arc::new(|x: &HPoint| (x.x1 * x.x2).sin() + x.x3);
        let s = build_game(&p).unwrap();
        let (yd, zd) = (make_lattice(s.r_y, 1, 4).unwrap(), make_lattice(0.0, 1, 4).unwrap());
        let u = solve(&p, &small_grid(), 4, &yd, &zd).unwrap();
        for slice in &u.slices {
            assert_eq!(slice.values, u.slices[0].values);
        }
        assert_eq!(uniqueness_initial_trace(&u).unwrap().sup_gap, 0.0);
    }

    fn from_formula(f: impl Fn(f64, &HPoint) -> f64, grid: &GridSpec, steps: usize, horizon: f64) -> ValueGrid {
        let h = horizon / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
        let slices: Vec<Grid3> = times.iter().map(|&t| sample_field(|x| f(t, x), grid).unwrap()).collect();
        ValueGrid::new(times, slices, grid.region).unwrap()
    }

    #[test]
    fn residual_of_classical_solutions() {
        let grid = small_grid();
        let p = constant_problem(0.7);
        let u = from_formula(|t, x| (p.initial)(x) - 0.7 * t, &grid, 8, 1.0);
        let r = pde_residual(&u, &p, &interior_probes(&u)).unwrap();
        assert!(r.max <= 1e-8, "{r:?}");

        let p = HjiProblem {
            horizon: 1.0,
            hamiltonian: Arc::new(|_, _, y: &PlaneVector| y.z1),
            initial: Arc::new(|x: &HPoint| x.x1),
            d1: 10.0,
            d1p: 0.0,
            k: 1.0,
            c2: 10.0,
            c2p: 1.0,
        };
        let u = from_formula(|t, x| x.x1 - t, &grid, 8, 1.0);
        let r = pde_residual(&u, &p, &interior_probes(&u)).unwrap();
        assert!(r.max <= 1e-8, "{r:?}");
        assert!(r.retained > 0);
    }

    #[test]
    fn residual_without_probes_is_an_error() {
        let grid = small_grid();
        let p = constant_problem(0.0);
        let u = from_formula(|_, x| x.x1, &grid, 2, 1.0);
        let err = pde_residual(&u, &p, &[]).unwrap_err();
        assert!(matches!(err, Error::NoSmoothProbes { .. }));
    }

    #[test]
    fn reversal_is_an_involution_on_times() {
        let grid = small_grid();
        let u = from_formula(|t, x| x.x1 * t, &grid, 4, 1.0);
        let back = reverse_time(reverse_time(u.clone(), 1.0), 1.0);
        assert_eq!(back.slices, u.slices);
        for (a, b) in back.times.iter().zip(&u.times) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
