//! Lipschitz audits of computed value grids against the theoretical
//! constants `C♯` (spatial, same time) and `C′` (space-time).

use serde::{Deserialize, Serialize};

use super::GameSpec;
use crate::error::{Error, Result};
use crate::grid::ValueGrid;
use crate::group::{dist_g, HPoint};

/// Relative margin allowed above a theoretical constant at baseline
/// resolution, covering scheme and interpolation error.
pub const AUDIT_SLACK: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub t: f64,
    pub x: HPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub quantity: String,
    pub constant: f64,
    pub worst_ratio: f64,
    pub witness: Option<(AuditPoint, AuditPoint)>,
    pub slack: f64,
    pub pairs: usize,
    pub passed: bool,
}

impl AuditReport {
    fn new(quantity: &str, constant: f64) -> Self {
        AuditReport {
            quantity: quantity.to_string(),
            constant,
            worst_ratio: 0.0,
            witness: None,
            slack: AUDIT_SLACK,
            pairs: 0,
            passed: true,
        }
    }

    fn offer(&mut self, ratio: f64, a: AuditPoint, b: AuditPoint) {
        self.pairs += 1;
        if ratio > self.worst_ratio || self.witness.is_none() {
            self.worst_ratio = self.worst_ratio.max(ratio);
            self.witness = Some((a, b));
        }
    }

    fn finish(&mut self) {
        self.passed = self.worst_ratio <= self.constant * (1.0 + self.slack);
    }

    /// Relative excess `max(0, worst/constant − 1)`; infinite when the
    /// constant is zero and some ratio is positive.
    pub fn excess(&self) -> f64 {
        if self.constant > 0.0 {
            (self.worst_ratio / self.constant - 1.0).max(0.0)
        } else if self.worst_ratio > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// True when `self` (finer run) does not exceed the constant by more than
    /// `coarse` did.
    pub fn improves_on(&self, coarse: &AuditReport) -> bool {
        self.excess() <= coarse.excess() + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    /// Same-time ratio `|V(t,x) − V(t,x′)| / d_G(x, x′)` against `C♯`.
    pub spatial: AuditReport,
    /// `|V(t,x) − V(t′,x′)| / (|t − t′| + d_G(x, x′))` against `C′`.
    pub space_time: AuditReport,
}

impl LipschitzAudit {
    pub fn passed(&self) -> bool {
        self.spatial.passed && self.space_time.passed
    }
}

const SPATIAL_OFFSETS: [[usize; 3]; 10] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [0, 2, 0],
    [0, 0, 2],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Scans every trusted node against its forward neighbours (axis offsets 1
/// and 2, plane and space diagonals) within each slice, and against the same
/// node and its unit neighbours in the next slice.
pub fn lipschitz_audit(values: &ValueGrid, spec: &GameSpec) -> Result<LipschitzAudit> {
    let grid = values.spec();
    let trusted_count = (0..values.len())
        .map(|s| (0..grid.len()).filter(|&i| values.is_trusted(s, i)).count())
        .sum::<usize>();
    if trusted_count < 2 {
        return Err(Error::Precondition(format!(
            "Lipschitz audit needs at least 2 trusted nodes, found {trusted_count}"
        )));
    }
    let mut spatial = AuditReport::new("spatial Lipschitz ratio vs C_sharp", spec.c_sharp());
    let mut space_time = AuditReport::new("space-time Lipschitz ratio vs C_prime", spec.c_prime());
    let [n1, n2, n3] = grid.counts;
    for s in 0..values.len() {
        let slice = &values.slices[s];
        let t = values.times[s];
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let idx = grid.index(i, j, k);
                    if !values.is_trusted(s, idx) {
                        continue;
                    }
                    let x = grid.node(i, j, k);
                    let v = slice.values[idx];
                    let a = AuditPoint { t, x };
                    for off in SPATIAL_OFFSETS {
                        let (ii, jj, kk) = (i + off[0], j + off[1], k + off[2]);
                        if ii >= n1 || jj >= n2 || kk >= n3 {
                            continue;
                        }
                        let other = grid.index(ii, jj, kk);
                        if !values.is_trusted(s, other) {
                            continue;
                        }
                        let y = grid.node(ii, jj, kk);
                        let ratio = (v - slice.values[other]).abs() / dist_g(&x, &y);
                        let b = AuditPoint { t, x: y };
                        spatial.offer(ratio, a, b);
                        space_time.offer(ratio, a, b);
                    }
                    if s + 1 < values.len() {
                        let next = &values.slices[s + 1];
                        let dt = values.times[s + 1] - t;
                        for off in [[0usize, 0usize, 0usize], [1, 0, 0], [0, 1, 0], [0, 0, 1]] {
                            let (ii, jj, kk) = (i + off[0], j + off[1], k + off[2]);
                            if ii >= n1 || jj >= n2 || kk >= n3 {
                                continue;
                            }
                            let other = grid.index(ii, jj, kk);
                            if !values.is_trusted(s + 1, other) {
                                continue;
                            }
                            let y = grid.node(ii, jj, kk);
                            let ratio = (v - next.values[other]).abs() / (dt + dist_g(&x, &y));
                            space_time.offer(ratio, a, AuditPoint { t: t + dt, x: y });
                        }
                    }
                }
            }
        }
    }
    spatial.finish();
    space_time.finish();
    Ok(LipschitzAudit { spatial, space_time })
}
