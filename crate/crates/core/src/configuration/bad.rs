//! Over-dense cells (Type A) and over-heavy circular annuli (Type B).

use std::collections::{BTreeSet, HashMap};

use super::{CellId, Configuration, Label, Tiling};

/// Half-width of the annulus around a circle, in units of `ℓ`.
pub const ANNULUS_HALF_WIDTH: f64 = 2.5 * std::f64::consts::SQRT_2;
const TOL: f64 = 1e-9;

/// Some label exceeds `threshold` (an `∞` label always does).
pub fn is_type_a(config: &Configuration, threshold: f64) -> bool {
    let n = config.tiling.n;
    config.labels.iter().any(|l| l.value(n) > threshold)
}

/// [`is_type_a`] at `N²/21`.
pub fn is_type_a_default(config: &Configuration) -> bool {
    let n = f64::from(config.tiling.n);
    is_type_a(config, n * n / 21.0)
}

/// Circle centred at a cell centre through another cell centre; the radius
/// is `√radius2 · ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Circle {
    pub center: CellId,
    pub radius2: u64,
}

impl Circle {
    pub fn radius(&self, tiling: &Tiling) -> f64 {
        (self.radius2 as f64).sqrt() * tiling.ell()
    }
}

/// Every circle of the family, deduplicated by radius per centre.
pub fn circle_family(tiling: &Tiling) -> Vec<Circle> {
    let mut out = Vec::new();
    for center in 0..tiling.cell_count() {
        let radii: BTreeSet<u64> = (0..tiling.cell_count())
            .filter(|&o| o != center)
            .map(|o| {
                let (dx, dy) = tiling.offset(center, o);
                (dx * dx + dy * dy) as u64
            })
            .collect();
        out.extend(radii.into_iter().map(|radius2| Circle { center, radius2 }));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnulusSquares {
    pub circle: Circle,
    pub cells: Vec<CellId>,
}

/// Nearest and farthest distance from a cell centre to the cell at offset
/// `(ax, ay)`, in units of `ℓ`.
fn cell_distance_range(ax: u64, ay: u64) -> (f64, f64) {
    let (fx, fy) = (ax as f64, ay as f64);
    let near = ((fx - 0.5).max(0.0).powi(2) + (fy - 0.5).max(0.0).powi(2)).sqrt();
    let far = ((fx + 0.5).powi(2) + (fy + 0.5).powi(2)).sqrt();
    (near, far)
}

fn reaches_far_side(radius: f64, far: f64) -> bool {
    far <= radius + ANNULUS_HALF_WIDTH + TOL
}

fn clears_near_side(radius: f64, near: f64) -> bool {
    near >= radius - ANNULUS_HALF_WIDTH - TOL
}

/// Cells lying entirely within `(5/2)ℓ√2` of the circle.
pub fn build_annulus_squares(tiling: &Tiling, circle: Circle) -> AnnulusSquares {
    let radius = (circle.radius2 as f64).sqrt();
    let cells = (0..tiling.cell_count())
        .filter(|&c| {
            let (dx, dy) = tiling.offset(circle.center, c);
            let (near, far) = cell_distance_range(dx.unsigned_abs(), dy.unsigned_abs());
            reaches_far_side(radius, far) && clears_near_side(radius, near)
        })
        .collect();
    AnnulusSquares { circle, cells }
}

/// Some annulus `R_Γ` has `Σ d ≥ εN²/2` or holds an `∞` cell.
///
/// Per centre, each non-empty cell contributes to a contiguous range of
/// radii, so all circles of a centre are summed with one difference array.
pub fn is_type_b(config: &Configuration, eps: f64) -> bool {
    let t = config.tiling;
    let side = t.side_cells() as u64;
    let radii2: Vec<u64> = (0..side)
        .flat_map(|a| (0..side).map(move |b| a * a + b * b))
        .filter(|&s| s > 0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let radii: Vec<f64> = radii2.iter().map(|&s| (s as f64).sqrt()).collect();
    let index: HashMap<u64, usize> = radii2.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let heavy: Vec<(CellId, Option<u64>)> = config
        .labels
        .iter()
        .enumerate()
        .filter_map(|(c, l)| match l {
            Label::Finite(0) => None,
            Label::Finite(j) => Some((c, Some(u64::from(*j)))),
            Label::Infinite => Some((c, None)),
        })
        .collect();
    if heavy.is_empty() {
        return false;
    }
    let threshold = eps * f64::from(t.n).powi(3) / 2.0;

    let mut valid_cache: HashMap<(u64, u64), Vec<bool>> = HashMap::new();
    let mut weight = vec![0i64; radii.len() + 1];
    let mut infinite = vec![0i64; radii.len() + 1];
    for center in 0..t.cell_count() {
        let (cx, cy) = t.col_row(center);
        let (cx, cy) = (cx as u64, cy as u64);
        let reach = (cx.max(side - 1 - cx), cy.max(side - 1 - cy));
        let valid = valid_cache.entry(reach).or_insert_with(|| {
            let mut v = vec![false; radii.len()];
            for a in 0..=reach.0 {
                for b in 0..=reach.1 {
                    if a + b > 0 {
                        v[index[&(a * a + b * b)]] = true;
                    }
                }
            }
            v
        });
        weight.iter_mut().for_each(|w| *w = 0);
        infinite.iter_mut().for_each(|w| *w = 0);
        for &(cell, j) in &heavy {
            let (dx, dy) = t.offset(center, cell);
            let (near, far) = cell_distance_range(dx.unsigned_abs(), dy.unsigned_abs());
            let lo = radii.partition_point(|&r| !reaches_far_side(r, far));
            let hi = radii.partition_point(|&r| clears_near_side(r, near));
            if lo >= hi {
                continue;
            }
            match j {
                Some(j) => {
                    weight[lo] += j as i64;
                    weight[hi] -= j as i64;
                }
                None => {
                    infinite[lo] += 1;
                    infinite[hi] -= 1;
                }
            }
        }
        let (mut w, mut inf) = (0i64, 0i64);
        for i in 0..radii.len() {
            w += weight[i];
            inf += infinite[i];
            if valid[i] && (inf > 0 || w as f64 >= threshold) {
                return true;
            }
        }
    }
    false
}
