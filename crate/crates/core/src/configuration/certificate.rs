//! Ball-counting certificate that no k-NN edge crosses between two cells.
//!
//! For a point `y1` in cell `s1` and `y2` in `s2` with centre distance `d`,
//! the ball `B(y1, ‖y2 - y1‖)` contains `B(z1, d - (3/2)ℓ√2)`. If the cells
//! lying fully inside that smaller ball are guaranteed `k + 2` points, `y1`
//! has `k` strictly closer neighbours than `y2`. The smallest radius with
//! that guarantee is the cell's *reach*; a pair is separated when the
//! centre distance minus the margin covers both reaches.

use std::collections::BTreeSet;

use super::{CellId, Configuration, Tiling};

const TOL: f64 = 1e-9;
/// `(3/2)√2` in units of `ℓ`.
pub const PAIR_MARGIN: f64 = 1.5 * std::f64::consts::SQRT_2;

/// Precomputed offsets sorted by the farthest distance of the offset cell.
#[derive(Debug, Clone)]
pub struct Certifier {
    tiling: Tiling,
    offsets: Vec<(i32, i32, f64)>,
}

impl Certifier {
    pub fn new(tiling: Tiling) -> Self {
        let span = tiling.side_cells() as i32 - 1;
        let mut offsets: Vec<(i32, i32, f64)> = (-span..=span)
            .flat_map(|dx| (-span..=span).map(move |dy| (dx, dy)))
            .map(|(dx, dy)| {
                let fx = f64::from(dx.abs()) + 0.5;
                let fy = f64::from(dy.abs()) + 0.5;
                (dx, dy, (fx * fx + fy * fy).sqrt())
            })
            .collect();
        offsets.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        Certifier { tiling, offsets }
    }

    pub fn tiling(&self) -> &Tiling {
        &self.tiling
    }

    /// Farthest distance (in `ℓ`) of the offset cell `q` from `s`'s centre.
    pub fn far_distance(&self, s: CellId, q: CellId) -> f64 {
        let (dx, dy) = self.tiling.offset(s, q);
        let fx = dx.unsigned_abs() as f64 + 0.5;
        let fy = dy.unsigned_abs() as f64 + 0.5;
        (fx * fx + fy * fy).sqrt()
    }

    /// Smallest radius around `s`'s centre whose fully-contained cells carry
    /// `Σ rmin ≥ k + 2`; infinite when the whole tiling falls short.
    pub fn reach(&self, config: &Configuration, s: CellId) -> f64 {
        let need = u64::from(self.tiling.k) + 2;
        let side = self.tiling.side_cells() as i64;
        let (col, row) = self.tiling.col_row(s);
        let mut total = 0u64;
        for &(dx, dy, far) in &self.offsets {
            let (c, r) = (col as i64 + i64::from(dx), row as i64 + i64::from(dy));
            if c < 0 || r < 0 || c >= side || r >= side {
                continue;
            }
            total += config.rmin(self.tiling.cell_id(c as usize, r as usize));
            if total >= need {
                return far;
            }
        }
        f64::INFINITY
    }

    /// Reaches of the non-empty cells; empty cells get `∞` and are never read.
    pub fn reaches(&self, config: &Configuration) -> Vec<f64> {
        (0..self.tiling.cell_count())
            .map(|s| if config.labels[s].is_empty() { f64::INFINITY } else { self.reach(config, s) })
            .collect()
    }

    /// Brings `reaches` up to date after `changed` was relabelled, returning
    /// the previous values of the entries it touched.
    ///
    /// The walk for `s` stops at `reaches[s]`, so only cells with `changed`
    /// inside that radius can move.
    pub fn refresh(&self, config: &Configuration, reaches: &mut [f64], changed: CellId) -> Vec<(CellId, f64)> {
        let mut undo = Vec::new();
        for s in 0..reaches.len() {
            let fresh = if config.labels[s].is_empty() {
                f64::INFINITY
            } else if s == changed || self.far_distance(s, changed) <= reaches[s] + TOL {
                self.reach(config, s)
            } else {
                continue;
            };
            if fresh != reaches[s] {
                undo.push((s, reaches[s]));
                reaches[s] = fresh;
            }
        }
        undo
    }

    fn separated(&self, s1: CellId, s2: CellId, r1: f64, r2: f64) -> bool {
        let d = self.tiling.center_distance(s1, s2);
        d - PAIR_MARGIN + TOL >= r1.max(r2)
    }

    pub fn no_edge(&self, config: &Configuration, s1: CellId, s2: CellId) -> bool {
        if config.labels[s1].is_empty() || config.labels[s2].is_empty() {
            return true;
        }
        self.separated(s1, s2, self.reach(config, s1), self.reach(config, s2))
    }

    /// Preconditions of the component certificate: `T` holds a non-empty
    /// cell and every non-empty cell of `T` lies inside `½S`.
    pub fn t_is_admissible(&self, config: &Configuration, t_cells: &BTreeSet<CellId>) -> bool {
        let inner = self.tiling.inner_region();
        let mut any = false;
        for &c in t_cells {
            if c >= config.labels.len() {
                return false;
            }
            if !config.labels[c].is_empty() {
                any = true;
                if !inner.contains_rect(&self.tiling.cell_rect(c)) {
                    return false;
                }
            }
        }
        any
    }

    /// Component certificate with precomputed reaches.
    pub fn small_component_with(&self, config: &Configuration, t_cells: &BTreeSet<CellId>, reaches: &[f64]) -> bool {
        if !self.t_is_admissible(config, t_cells) {
            return false;
        }
        let inside: Vec<CellId> = t_cells.iter().copied().filter(|&c| !config.labels[c].is_empty()).collect();
        let t_reach = inside.iter().map(|&c| reaches[c]).fold(0.0, f64::max);
        let (mut c0, mut c1, mut r0, mut r1) = (usize::MAX, 0, usize::MAX, 0);
        for &c in &inside {
            let (col, row) = self.tiling.col_row(c);
            c0 = c0.min(col);
            c1 = c1.max(col);
            r0 = r0.min(row);
            r1 = r1.max(row);
        }
        let gap = |v: usize, lo: usize, hi: usize| -> f64 {
            if v < lo {
                (lo - v) as f64
            } else if v > hi {
                (v - hi) as f64
            } else {
                0.0
            }
        };
        config.non_empty_cells().filter(|c| !t_cells.contains(c)).all(|s2| {
            let (col, row) = self.tiling.col_row(s2);
            let (gx, gy) = (gap(col, c0, c1), gap(row, r0, r1));
            let lower = (gx * gx + gy * gy).sqrt();
            if lower - PAIR_MARGIN + TOL >= t_reach.max(reaches[s2]) {
                return true;
            }
            inside.iter().all(|&s1| self.separated(s1, s2, reaches[s1], reaches[s2]))
        })
    }

    pub fn small_component(&self, config: &Configuration, t_cells: &BTreeSet<CellId>) -> bool {
        if !self.t_is_admissible(config, t_cells) {
            return false;
        }
        self.small_component_with(config, t_cells, &self.reaches(config))
    }
}

/// No point set consistent with `config` has a k-NN edge between `s1` and
/// `s2`. The certificate is evaluated at the tiling's `k`.
pub fn no_edge_certificate(config: &Configuration, s1: CellId, s2: CellId) -> bool {
    Certifier::new(config.tiling).no_edge(config, s1, s2)
}

/// No k-NN edge leaves `T`, so every consistent point set has a component
/// inside `½S`.
pub fn small_component_certificate(config: &Configuration, t_cells: &BTreeSet<CellId>) -> bool {
    Certifier::new(config.tiling).small_component(config, t_cells)
}
