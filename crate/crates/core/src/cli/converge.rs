//! Refinement study: each level halves `h` and the grid spacing and doubles
//! the lattice ring count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{log, prepare, Scenario};
use crate::error::{Error, Result};
use crate::game::lipschitz_audit;
use crate::grid::ValueGrid;

/// Default cap on stored values (grid nodes times slices) per level.
pub const DEFAULT_MAX_VALUES: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub level: usize,
    pub counts: [usize; 3],
    pub steps: usize,
    pub rings: [usize; 2],
    pub lattice_points: [usize; 2],
    /// Sup-difference to the previous level on nodes of the coarsest grid
    /// trusted in both, at the coarsest slice times. `None` on level 0.
    pub sup_diff: Option<f64>,
    /// Previous level's `sup_diff` over this one.
    pub ratio: Option<f64>,
    pub spatial_ratio: f64,
    pub space_time_ratio: f64,
    pub c_sharp: f64,
    pub c_prime: f64,
}

/// Scenario for refinement level `level`.
pub fn level_scenario(base: &Scenario, level: usize) -> Scenario {
    let mut sc = base.clone();
    for _ in 0..level {
        for c in sc.grid.counts.iter_mut() {
            *c = 2 * *c - 1;
        }
        sc.steps *= 2;
        sc.lattice.y.rings *= 2;
        sc.lattice.z.rings *= 2;
    }
    sc
}

fn values_count(sc: &Scenario) -> usize {
    sc.grid.counts.iter().product::<usize>() * (sc.steps + 1)
}

/// Sup-difference between consecutive levels `a` (coarser, `2^k` slices per
/// coarsest slice) and `b` on the nodes of `coarsest`.
fn level_diff(coarsest: &ValueGrid, a: &ValueGrid, b: &ValueGrid, k: usize) -> f64 {
    let cg = coarsest.spec();
    let (ga, gb) = (a.spec(), b.spec());
    let mut sup: f64 = 0.0;
    for s in 0..coarsest.len() {
        let (sa, sb) = (s << k, s << (k + 1));
        for idx in 0..cg.len() {
            if !coarsest.is_trusted(s, idx) {
                continue;
            }
            let x = cg.node_at(idx);
            let (ia, ib) = (ga.nearest(&x), gb.nearest(&x));
            if a.is_trusted(sa, ia) && b.is_trusted(sb, ib) {
                sup = sup.max((a.slices[sa].values[ia] - b.slices[sb].values[ib]).abs());
            }
        }
    }
    sup
}

pub fn rows_to_csv(rows: &[ConvergeRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    let mut out = String::from("level,n1,n2,n3,N,rings_y,rings_z,points_y,points_z,sup_diff,ratio,spatial_ratio,space_time_ratio,c_sharp,c_prime\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.level,
            r.counts[0],
            r.counts[1],
            r.counts[2],
            r.steps,
            r.rings[0],
            r.rings[1],
            r.lattice_points[0],
            r.lattice_points[1],
            opt(r.sup_diff),
            opt(r.ratio),
            r.spatial_ratio,
            r.space_time_ratio,
            r.c_sharp,
            r.c_prime
        );
    }
    out
}

/// Solves `levels` refinements of `scenario` and writes `out/converge.csv`.
/// Refuses, before solving anything, when a level would store more than
/// `max_values` nodal values.
pub fn run_converge(scenario: &Scenario, levels: usize, max_values: usize, out: &Path) -> Result<Vec<ConvergeRow>> {
    if levels < 2 {
        return Err(Error::invalid("levels", format!("need at least 2 levels, got {levels}")));
    }
    scenario.validate()?;
    for level in 0..levels {
        let n = values_count(&level_scenario(scenario, level));
        if n > max_values {
            return Err(Error::invalid(
                "levels",
                format!("level {level} stores {n} values, above the cap of {max_values}; lower --levels or raise --max-nodes"),
            ));
        }
    }
    fs::create_dir_all(out)?;
    let mut sols: Vec<ValueGrid> = Vec::new();
    let mut rows: Vec<ConvergeRow> = Vec::new();
    for level in 0..levels {
        let sc = level_scenario(scenario, level);
        let p = prepare(&sc)?;
        let t0 = Instant::now();
        let v = p.solve_game_time()?;
        let audit = lipschitz_audit(&v, &p.spec)?;
        let sup_diff = sols.last().map(|prev| level_diff(&sols[0], prev, &v, level - 1));
        let ratio = match (rows.last().and_then(|r| r.sup_diff), sup_diff) {
            (Some(a), Some(b)) => Some(a / b),
            _ => None,
        };
        log(
            out,
            &format!(
                "converge: level {level} grid {:?} N {} lattices {}x{} sup_diff {sup_diff:?} ({:.1} s)",
                sc.grid.counts,
                sc.steps,
                p.yd.len(),
                p.zd.len(),
                t0.elapsed().as_secs_f64()
            ),
        )?;
        rows.push(ConvergeRow {
            level,
            counts: sc.grid.counts,
            steps: sc.steps,
            rings: [sc.lattice.y.rings, sc.lattice.z.rings],
            lattice_points: [p.yd.len(), p.zd.len()],
            sup_diff,
            ratio,
            spatial_ratio: audit.spatial.worst_ratio,
            space_time_ratio: audit.space_time.worst_ratio,
            c_sharp: p.spec.c_sharp(),
            c_prime: p.spec.c_prime(),
        });
        sols.push(v);
    }
    fs::write(out.join("converge.csv"), rows_to_csv(&rows))?;
    Ok(rows)
}
