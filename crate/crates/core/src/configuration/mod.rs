//! Discretised configurations of the square `S`.
//!
//! `S = [-½M√k, ½M√k]²` is tiled by `(MN)²` cells of side `ℓ = √k/N`. A
//! configuration labels every cell with an approximate density: `0` for an
//! empty cell, `⌈N³r/k⌉/N` for `1 ≤ r ≤ k` points and `∞` above `k`. Finite
//! labels are stored by their numerator `j` of `j/N`.

mod bad;
mod certificate;
mod optimize;
mod seed;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bounds::rate;
use crate::geometry::{Point, PointSet, Rect};
use crate::rng::Rng;
use crate::{Error, Result};

pub use bad::{
    build_annulus_squares, circle_family, is_type_a, is_type_a_default, is_type_b, AnnulusSquares, Circle,
};
pub use certificate::{no_edge_certificate, small_component_certificate, Certifier};
pub use optimize::{optimize_from, optimize_theta, OptimizeResult, SearchParams};
pub use seed::{certified_disc_seed, disc_seed, DiscSeedParams};

pub type CellId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiling {
    pub m: u32,
    pub n: u32,
    pub k: u32,
}

impl Tiling {
    pub fn new(m: u32, n: u32, k: u32) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!("tiling needs M, N, k >= 1 (got {m}, {n}, {k})")));
        }
        Ok(Tiling { m, n, k })
    }

    /// Cells per side, `MN`.
    pub fn side_cells(&self) -> usize {
        self.m as usize * self.n as usize
    }

    pub fn cell_count(&self) -> usize {
        self.side_cells().pow(2)
    }

    /// Cell side `ℓ = √k/N`.
    pub fn ell(&self) -> f64 {
        f64::from(self.k).sqrt() / f64::from(self.n)
    }

    pub fn region(&self) -> Rect {
        Rect::centered_square(f64::from(self.m) * f64::from(self.k).sqrt())
    }

    /// The inner square `½S` of event `A`.
    pub fn inner_region(&self) -> Rect {
        self.region().scaled(0.5)
    }

    pub fn cell_id(&self, col: usize, row: usize) -> CellId {
        row * self.side_cells() + col
    }

    pub fn col_row(&self, id: CellId) -> (usize, usize) {
        (id % self.side_cells(), id / self.side_cells())
    }

    pub fn cell_rect(&self, id: CellId) -> Rect {
        let (col, row) = self.col_row(id);
        let s = self.region();
        let l = self.ell();
        Rect {
            xmin: s.xmin + col as f64 * l,
            xmax: s.xmin + (col + 1) as f64 * l,
            ymin: s.ymin + row as f64 * l,
            ymax: s.ymin + (row + 1) as f64 * l,
        }
    }

    pub fn cell_center(&self, id: CellId) -> Point {
        let r = self.cell_rect(id);
        Point::new((r.xmin + r.xmax) / 2.0, (r.ymin + r.ymax) / 2.0)
    }

    /// Cell containing `p`, clamped to the tiling.
    pub fn cell_of(&self, p: &Point) -> CellId {
        let s = self.region();
        let l = self.ell();
        let side = self.side_cells();
        let idx = |v: f64| -> usize {
            let c = (v / l).floor();
            if c <= 0.0 {
                0
            } else {
                (c as usize).min(side - 1)
            }
        };
        self.cell_id(idx(p.x - s.xmin), idx(p.y - s.ymin))
    }

    /// Integer offset between two cells, in cells.
    pub fn offset(&self, from: CellId, to: CellId) -> (i64, i64) {
        let (c1, r1) = self.col_row(from);
        let (c2, r2) = self.col_row(to);
        (c2 as i64 - c1 as i64, r2 as i64 - r1 as i64)
    }

    /// Centre distance in units of `ℓ`.
    pub fn center_distance(&self, a: CellId, b: CellId) -> f64 {
        let (dx, dy) = self.offset(a, b);
        ((dx * dx + dy * dy) as f64).sqrt()
    }

    pub fn neighbours4(&self, id: CellId) -> impl Iterator<Item = CellId> + '_ {
        let (col, row) = self.col_row(id);
        let side = self.side_cells() as i64;
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].into_iter().filter_map(move |(dx, dy)| {
            let (c, r) = (col as i64 + dx, row as i64 + dy);
            (c >= 0 && r >= 0 && c < side && r < side).then(|| self.cell_id(c as usize, r as usize))
        })
    }
}

/// Approximate density label of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// `j/N`; `j = 0` is the empty cell.
    Finite(u32),
    Infinite,
}

impl Label {
    pub const EMPTY: Label = Label::Finite(0);

    pub fn value(&self, n: u32) -> f64 {
        match self {
            Label::Finite(j) => f64::from(*j) / f64::from(n),
            Label::Infinite => f64::INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Label::EMPTY
    }

    pub fn from_count(r: u64, k: u32, n: u32) -> Label {
        let k = u64::from(k);
        if r == 0 {
            Label::EMPTY
        } else if r <= k {
            let n3 = u128::from(n).pow(3);
            let j = (n3 * u128::from(r)).div_ceil(u128::from(k));
            Label::Finite(j as u32)
        } else {
            Label::Infinite
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Finite(j) => write!(f, "{j}/N"),
            Label::Infinite => f.write_str("inf"),
        }
    }
}

/// Inclusive range of point counts consistent with a label; may be empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountRange {
    pub min: u64,
    pub max: u64,
}

impl CountRange {
    pub fn is_empty(&self) -> bool {
        self.min > self.max
    }

    pub fn contains(&self, r: u64) -> bool {
        self.min <= r && r <= self.max
    }
}

/// Counts `r` with `label_of(r) = label`: `r ∈ (k(j-1)/N³, kj/N³]` for
/// `j ≥ 1`, `{0}` for the empty label, `r > k` for `∞`.
pub fn count_interval(label: Label, k: u32, n: u32) -> CountRange {
    let kk = u128::from(k);
    let n3 = u128::from(n).pow(3);
    match label {
        Label::Finite(0) => CountRange { min: 0, max: 0 },
        Label::Finite(j) => {
            let j = u128::from(j);
            let min = (kk * (j - 1)) / n3 + 1;
            let max = ((kk * j) / n3).min(kk);
            CountRange { min: min as u64, max: max as u64 }
        }
        Label::Infinite => CountRange { min: u64::from(k) + 1, max: u64::MAX },
    }
}

/// Whether some count maps to `label` at this `k` and `N`.
pub fn is_feasible(label: Label, k: u32, n: u32) -> bool {
    match label {
        Label::Finite(j) if j > n.pow(3) => false,
        _ => !count_interval(label, k, n).is_empty(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub tiling: Tiling,
    pub labels: Vec<Label>,
}

impl Configuration {
    pub fn uniform(tiling: Tiling, label: Label) -> Self {
        Configuration { tiling, labels: vec![label; tiling.cell_count()] }
    }

    pub fn label(&self, id: CellId) -> Label {
        self.labels[id]
    }

    pub fn rmin(&self, id: CellId) -> u64 {
        count_interval(self.labels[id], self.tiling.k, self.tiling.n).min
    }

    pub fn non_empty_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.labels.iter().enumerate().filter(|(_, l)| !l.is_empty()).map(|(i, _)| i)
    }

    /// Every label reachable from some point count at this `k`.
    pub fn is_feasible(&self) -> bool {
        self.labels.iter().all(|&l| is_feasible(l, self.tiling.k, self.tiling.n))
    }

    /// Splits every cell into `factor²` cells with the same density label.
    pub fn refine(&self, factor: u32, t_cells: &BTreeSet<CellId>) -> (Configuration, BTreeSet<CellId>) {
        let t = self.tiling;
        let fine = Tiling { m: t.m, n: t.n * factor, k: t.k };
        let f = factor as usize;
        let mut labels = vec![Label::EMPTY; fine.cell_count()];
        let mut fine_t = BTreeSet::new();
        for id in 0..t.cell_count() {
            let (col, row) = t.col_row(id);
            let lab = match self.labels[id] {
                Label::Finite(j) => Label::Finite(j * factor),
                Label::Infinite => Label::Infinite,
            };
            for dy in 0..f {
                for dx in 0..f {
                    let fid = fine.cell_id(col * f + dx, row * f + dy);
                    labels[fid] = lab;
                    if t_cells.contains(&id) {
                        fine_t.insert(fid);
                    }
                }
            }
        }
        (Configuration { tiling: fine, labels }, fine_t)
    }
}

pub fn tile(m: u32, n: u32, k: u32) -> Result<Tiling> {
    Tiling::new(m, n, k)
}

pub fn cell_counts(points: &PointSet, tiling: &Tiling) -> Vec<u64> {
    let mut counts = vec![0u64; tiling.cell_count()];
    for p in &points.points {
        counts[tiling.cell_of(p)] += 1;
    }
    counts
}

pub fn label_configuration(points: &PointSet, tiling: &Tiling) -> Configuration {
    let labels = cell_counts(points, tiling)
        .into_iter()
        .map(|r| Label::from_count(r, tiling.k, tiling.n))
        .collect();
    Configuration { tiling: *tiling, labels }
}

/// `-(ρ' - 1 - ρ' log ρ')/N²` with `ρ' = d` for `d ≤ 1` and `d - 1/N` above.
pub fn theta_contribution(label: Label, n: u32) -> Option<f64> {
    let Label::Finite(j) = label else { return None };
    let nf = f64::from(n);
    let rho = if j <= n { f64::from(j) / nf } else { f64::from(j - 1) / nf };
    Some(-rate(rho) / (nf * nf))
}

pub fn theta(config: &Configuration) -> Result<f64> {
    config
        .labels
        .iter()
        .enumerate()
        .map(|(i, &l)| theta_contribution(l, config.tiling.n).ok_or(Error::InfiniteLabel(i)))
        .sum()
}

/// `(N³+2)^{(MN)²}`.
pub fn configuration_count(m: u32, n: u32) -> BigUint {
    let base = BigUint::from(n).pow(3u32) + 2u32;
    let exp = (u64::from(m) * u64::from(n)).pow(2);
    base.pow(u32::try_from(exp).expect("exponent fits in u32"))
}

/// A point set consistent with `config`: per cell a count drawn uniformly
/// from its range and positions uniform in the cell. `∞` cells draw from
/// `k+1..=2k+1`.
pub fn sample_consistent(config: &Configuration, rng: &mut Rng) -> Result<PointSet> {
    let t = config.tiling;
    let mut points = Vec::new();
    for (id, &label) in config.labels.iter().enumerate() {
        let range = count_interval(label, t.k, t.n);
        if range.is_empty() {
            return Err(Error::Malformed(format!("label {label} of cell {id} is infeasible at k = {}", t.k)));
        }
        let max = range.max.min(2 * u64::from(t.k) + 1);
        let count = rng.random_range(range.min..=max);
        let cell = t.cell_rect(id);
        for _ in 0..count {
            let x = cell.xmin + rng.random::<f64>() * cell.width();
            let y = cell.ymin + rng.random::<f64>() * cell.height();
            points.push(Point::new(x.min(cell.xmax), y.min(cell.ymax)));
        }
    }
    PointSet::from_points(points, t.region())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRepr {
    Finite(f64),
    Sentinel(String),
}

/// On-disk form: flat row-major labels with an `"inf"` sentinel, plus `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ConfigurationFile {
    pub M: u32,
    pub N: u32,
    pub k: u32,
    labels: Vec<LabelRepr>,
    pub T: Vec<CellId>,
}

impl ConfigurationFile {
    pub fn new(config: &Configuration, t_cells: &BTreeSet<CellId>) -> Self {
        let n = config.tiling.n;
        ConfigurationFile {
            M: config.tiling.m,
            N: n,
            k: config.tiling.k,
            labels: config
                .labels
                .iter()
                .map(|l| match l {
                    Label::Finite(_) => LabelRepr::Finite(l.value(n)),
                    Label::Infinite => LabelRepr::Sentinel("inf".into()),
                })
                .collect(),
            T: t_cells.iter().copied().collect(),
        }
    }

    pub fn into_parts(self) -> Result<(Configuration, BTreeSet<CellId>)> {
        let tiling = Tiling::new(self.M, self.N, self.k)?;
        if self.labels.len() != tiling.cell_count() {
            return Err(Error::Malformed(format!(
                "{} labels for {} cells",
                self.labels.len(),
                tiling.cell_count()
            )));
        }
        let nf = f64::from(self.N);
        let labels = self
            .labels
            .into_iter()
            .map(|l| match l {
                LabelRepr::Sentinel(s) if s == "inf" => Ok(Label::Infinite),
                LabelRepr::Sentinel(s) => Err(Error::Malformed(format!("label {s:?}"))),
                LabelRepr::Finite(d) => {
                    let j = (d * nf).round();
                    if !(0.0..=f64::from(self.N).powi(3)).contains(&j) || (j / nf - d).abs() > 1e-9 * d.max(1.0) {
                        return Err(Error::Malformed(format!("label {d} is not a multiple of 1/N")));
                    }
                    Ok(Label::Finite(j as u32))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = self.T.iter().find(|&&c| c >= tiling.cell_count()) {
            return Err(Error::Malformed(format!("cell {bad} is outside the tiling")));
        }
        Ok((Configuration { tiling, labels }, self.T.into_iter().collect()))
    }
}
