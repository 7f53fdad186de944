//! k-nearest-neighbour graphs over a uniform bucket grid.
//!
//! Neighbours are ranked by the key `(squared distance, x, y, id)`, a total
//! order, so the grid search and the all-pairs oracle agree exactly.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::geometry::{Point, PointSet, Rect};

pub type VertexId = u32;

/// Upper bound on the number of grid buckets.
const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone)]
pub struct GridIndex {
    region: Rect,
    cell_size: f64,
    nx: usize,
    ny: usize,
    /// Bucket `c` owns `ids[starts[c]..starts[c + 1]]`, with coordinates
    /// stored alongside so a query reads each bucket contiguously.
    starts: Vec<u32>,
    ids: Vec<VertexId>,
    coords: Vec<Point>,
    /// Inverse of `ids`.
    slot_of: Vec<u32>,
}

impl GridIndex {
    /// Buckets every point of `points` into square cells of side `cell_size`.
    ///
    /// Very small cell sizes are coarsened so the grid stays below
    /// `MAX_CELLS` buckets; query results do not depend on the cell size.
    pub fn build(points: &PointSet, cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        let region = points.region;
        let mut cell_size = cell_size;
        let (mut nx, mut ny) = grid_dims(&region, cell_size);
        while nx.saturating_mul(ny) > MAX_CELLS {
            cell_size *= 2.0;
            (nx, ny) = grid_dims(&region, cell_size);
        }
        let mut index = GridIndex {
            region,
            cell_size,
            nx,
            ny,
            starts: vec![0; nx * ny + 1],
            ids: vec![0; points.len()],
            coords: vec![Point::ORIGIN; points.len()],
            slot_of: vec![0; points.len()],
        };
        let cells: Vec<usize> = points
            .points
            .iter()
            .map(|p| {
                let (cx, cy) = index.cell_of(p);
                cy * nx + cx
            })
            .collect();
        for &c in &cells {
            index.starts[c + 1] += 1;
        }
        for c in 0..nx * ny {
            index.starts[c + 1] += index.starts[c];
        }
        let mut fill: Vec<u32> = index.starts[..nx * ny].to_vec();
        for (i, (&c, p)) in cells.iter().zip(&points.points).enumerate() {
            let slot = fill[c] as usize;
            index.ids[slot] = i as VertexId;
            index.coords[slot] = *p;
            index.slot_of[i] = slot as u32;
            fill[c] += 1;
        }
        index
    }

    /// Default cell side `√(k/3)`: about `k/3` points per bucket, so most
    /// queries stop after the first ring or two.
    pub fn default_cell_size(points: &PointSet, k: usize) -> f64 {
        let per_cell = (k.max(1) as f64 / 3.0 / points.intensity.max(f64::MIN_POSITIVE)).sqrt();
        let span = points.region.width().max(points.region.height());
        if span > 0.0 {
            per_cell.min(span)
        } else {
            1.0
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn bucket(&self, cx: usize, cy: usize) -> &[VertexId] {
        &self.ids[self.range(cy * self.nx + cx)]
    }

    fn range(&self, c: usize) -> std::ops::Range<usize> {
        self.starts[c] as usize..self.starts[c + 1] as usize
    }

    /// Vertex ids in bucket order.
    pub fn ordered_ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn cell_of(&self, p: &Point) -> (usize, usize) {
        let cx = ((p.x - self.region.xmin) / self.cell_size).floor();
        let cy = ((p.y - self.region.ymin) / self.cell_size).floor();
        (clamp_cell(cx, self.nx), clamp_cell(cy, self.ny))
    }

    pub fn non_empty_buckets(&self) -> usize {
        self.starts.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn total_membership(&self) -> usize {
        self.ids.len()
    }

    /// The `min(k, m-1)` nearest other points to `u`, nearest first.
    ///
    /// Rings of cells are scanned outward until every unscanned point is
    /// provably farther than the current k-th candidate.
    pub fn k_nearest(&self, points: &PointSet, u: VertexId, k: usize) -> Vec<VertexId> {
        debug_assert_eq!(points.len(), self.ids.len());
        self.k_nearest_slot(self.slot_of[u as usize] as usize, k, &mut Vec::new())
    }

    /// Neighbours of the point stored at `slot` of the bucket order, with a
    /// caller-owned scratch buffer.
    fn k_nearest_slot(&self, slot: usize, k: usize, buf: &mut Vec<(f64, u32)>) -> Vec<VertexId> {
        let want = k.min(self.ids.len().saturating_sub(1));
        if want == 0 {
            return Vec::new();
        }
        let (u, q) = (self.ids[slot], self.coords[slot]);
        let (cx, cy) = self.cell_of(&q);
        let max_ring = cx.max(self.nx - 1 - cx).max(cy).max(self.ny - 1 - cy);
        // (squared distance, slot) of every scanned point but `u`
        buf.clear();
        let by_d2 = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0);
        for ring in 0..=max_ring {
            self.visit_ring(cx, cy, ring, |slot| {
                if self.ids[slot] != u {
                    buf.push((q.dist2(&self.coords[slot]), slot as u32));
                }
            });
            if buf.len() >= want {
                let clear = self.clearance(&q, cx, cy, ring);
                let kth = buf.select_nth_unstable_by(want - 1, by_d2).1 .0;
                if kth < clear * clear {
                    break;
                }
            }
        }
        // only ties at the k-th distance need the full key
        let kth = if buf.len() >= want { buf.select_nth_unstable_by(want - 1, by_d2).1 .0 } else { f64::INFINITY };
        let mut best: Vec<Candidate> = buf
            .iter()
            .filter(|e| e.0 <= kth)
            .map(|&(d2, slot)| {
                let p = self.coords[slot as usize];
                Candidate { d2, x: p.x, y: p.y, id: self.ids[slot as usize] }
            })
            .collect();
        best.sort_unstable_by(Candidate::cmp);
        best.iter().take(want).map(|c| c.id).collect()
    }

    /// Lower bound on the distance from `q` (in cell `(cx, cy)`) to any point
    /// outside the block of rings `0..=ring`; infinite once the block covers
    /// the grid. Shrunk slightly to absorb rounding in the bucket assignment.
    fn clearance(&self, q: &Point, cx: usize, cy: usize, ring: usize) -> f64 {
        let cs = self.cell_size;
        let (x0, y0) = (self.region.xmin, self.region.ymin);
        let mut d = f64::INFINITY;
        if cx > ring {
            d = d.min(q.x - (x0 + (cx - ring) as f64 * cs));
        }
        if cx + ring + 1 < self.nx {
            d = d.min(x0 + (cx + ring + 1) as f64 * cs - q.x);
        }
        if cy > ring {
            d = d.min(q.y - (y0 + (cy - ring) as f64 * cs));
        }
        if cy + ring + 1 < self.ny {
            d = d.min(y0 + (cy + ring + 1) as f64 * cs - q.y);
        }
        d * (1.0 - 1e-9) - 1e-9 * cs
    }

    /// Calls `f` with the slot of every point in the cells of one ring.
    fn visit_ring(&self, cx: usize, cy: usize, ring: usize, mut f: impl FnMut(usize)) {
        let (cx, cy, r) = (cx as isize, cy as isize, ring as isize);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let mut cell = |x: isize, y: isize| {
            if x >= 0 && y >= 0 && x < nx && y < ny {
                for slot in self.range((y * nx + x) as usize) {
                    f(slot);
                }
            }
        };
        if r == 0 {
            cell(cx, cy);
            return;
        }
        for x in cx - r..=cx + r {
            cell(x, cy - r);
            cell(x, cy + r);
        }
        for y in cy - r + 1..cy + r {
            cell(cx - r, y);
            cell(cx + r, y);
        }
    }
}

fn grid_dims(region: &Rect, cell_size: f64) -> (usize, usize) {
    let nx = ((region.width() / cell_size).ceil() as usize).max(1);
    let ny = ((region.height() / cell_size).ceil() as usize).max(1);
    (nx, ny)
}

fn clamp_cell(c: f64, n: usize) -> usize {
    if c <= 0.0 || c.is_nan() {
        0
    } else {
        (c as usize).min(n - 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    x: f64,
    y: f64,
    id: VertexId,
}

impl Candidate {
    #[inline]
    fn new(pts: &[Point], q: &Point, id: VertexId) -> Self {
        let p = pts[id as usize];
        Candidate { d2: q.dist2(&p), x: p.x, y: p.y, id }
    }

    #[inline]
    fn cmp(a: &Self, b: &Self) -> Ordering {
        a.d2.total_cmp(&b.d2)
            .then(a.x.total_cmp(&b.x))
            .then(a.y.total_cmp(&b.y))
            .then(a.id.cmp(&b.id))
    }
}

/// Directed k-NN lists and their symmetrisation.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph<'a> {
    pub points: &'a PointSet,
    pub k: usize,
    pub out_neighbours: Vec<Vec<VertexId>>,
    /// Undirected edges as `(u, v)` with `u < v`, sorted.
    pub undirected_edges: Vec<(VertexId, VertexId)>,
}

impl<'a> KnnGraph<'a> {
    fn from_out(points: &'a PointSet, k: usize, out_neighbours: Vec<Vec<VertexId>>) -> Self {
        // (u, v) packed into one u64 sorts in the same order
        let mut keys: Vec<u64> = out_neighbours
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| {
                let u = u as VertexId;
                nb.iter().map(move |&v| (u64::from(u.min(v)) << 32) | u64::from(u.max(v)))
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let edges = keys.into_iter().map(|e| ((e >> 32) as VertexId, e as VertexId)).collect();
        KnnGraph { points, k, out_neighbours, undirected_edges: edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    /// The graph for a smaller `k`, reusing the ordered neighbour lists.
    pub fn truncated(&self, k: usize) -> KnnGraph<'a> {
        assert!(k <= self.k, "can only truncate to a smaller k");
        let out = self
            .out_neighbours
            .iter()
            .map(|nb| nb[..k.min(nb.len())].to_vec())
            .collect();
        KnnGraph::from_out(self.points, k, out)
    }

    pub fn edge_set(&self) -> BTreeSet<(VertexId, VertexId)> {
        self.undirected_edges.iter().copied().collect()
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.undirected_edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn edge_length(&self, (u, v): (VertexId, VertexId)) -> f64 {
        self.points.points[u as usize].dist(&self.points.points[v as usize])
    }
}

pub fn build_index(points: &PointSet, cell_size: f64) -> GridIndex {
    GridIndex::build(points, cell_size)
}

pub fn k_nearest(index: &GridIndex, points: &PointSet, u: VertexId, k: usize) -> Vec<VertexId> {
    index.k_nearest(points, u, k)
}

pub fn build_knn_graph(points: &PointSet, k: usize) -> KnnGraph<'_> {
    build_knn_graph_with_cell_size(points, k, GridIndex::default_cell_size(points, k))
}

/// Construction parallelises over vertices; the output does not depend on
/// the thread count.
pub fn build_knn_graph_with_cell_size(points: &PointSet, k: usize, cell_size: f64) -> KnnGraph<'_> {
    KnnGraph::from_out(points, k, knn_lists_with_cell_size(points, k, cell_size))
}

/// The ordered out-neighbour lists alone, without the undirected edge set.
pub fn knn_lists(points: &PointSet, k: usize) -> Vec<Vec<VertexId>> {
    knn_lists_with_cell_size(points, k, GridIndex::default_cell_size(points, k))
}

fn knn_lists_with_cell_size(points: &PointSet, k: usize, cell_size: f64) -> Vec<Vec<VertexId>> {
    if k == 0 || points.len() < 2 {
        return vec![Vec::new(); points.len()];
    }
    let index = GridIndex::build(points, cell_size);
    // queries run in bucket order for locality, then scatter back by id
    let lists: Vec<Vec<VertexId>> = (0..points.len())
        .into_par_iter()
        .with_min_len(256)
        .map_init(Vec::new, |buf, slot| index.k_nearest_slot(slot, k, buf))
        .collect();
    let mut out = vec![Vec::new(); points.len()];
    for (&u, nb) in index.ordered_ids().iter().zip(lists) {
        out[u as usize] = nb;
    }
    out
}

/// O(m²) oracle with the same ranking key.
pub fn brute_force_knn(points: &PointSet, k: usize) -> KnnGraph<'_> {
    let pts = &points.points;
    let m = pts.len();
    let want = k.min(m.saturating_sub(1));
    let out = (0..m)
        .map(|u| {
            if want == 0 {
                return Vec::new();
            }
            let q = pts[u];
            let mut all: Vec<Candidate> = (0..m)
                .filter(|&v| v != u)
                .map(|v| Candidate::new(pts, &q, v as VertexId))
                .collect();
            if want < all.len() {
                all.select_nth_unstable_by(want - 1, Candidate::cmp);
                all.truncate(want);
            }
            all.sort_unstable_by(Candidate::cmp);
            all.into_iter().map(|c| c.id).collect()
        })
        .collect();
    KnnGraph::from_out(points, k, out)
}

/// Maximum Euclidean length over undirected edges, 0 for an edgeless graph.
pub fn longest_edge(graph: &KnnGraph<'_>) -> f64 {
    graph
        .undirected_edges
        .iter()
        .map(|&e| graph.edge_length(e))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_poisson;

    fn set(coords: &[(f64, f64)]) -> PointSet {
        let pts: Vec<Point> = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let region = Rect::bounding(pts.iter().copied()).unwrap_or(Rect::centered_square(1.0));
        PointSet::from_points(pts, region).unwrap()
    }

    #[test]
    fn index_partitions_points() {
        let empty = PointSet::from_points(vec![], Rect::centered_square(10.0)).unwrap();
        let idx = GridIndex::build(&empty, 1.0);
        assert_eq!(idx.non_empty_buckets(), 0);

        let one = PointSet::from_points(vec![Point::ORIGIN], Rect::centered_square(10.0)).unwrap();
        assert_eq!(GridIndex::build(&one, 1.0).non_empty_buckets(), 1);

        let ps = sample_poisson(Rect::centered_square(30.0), 1.0, 3).unwrap();
        for cs in [0.3, 1.0, 2.5, 100.0] {
            let idx = GridIndex::build(&ps, cs);
            assert_eq!(idx.total_membership(), ps.len());
            for (i, p) in ps.points.iter().enumerate() {
                let (cx, cy) = idx.cell_of(p);
                assert!(idx.bucket(cx, cy).contains(&(i as VertexId)));
            }
        }
    }

    #[test]
    fn collinear_tie_break() {
        let ps = set(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]);
        let idx = GridIndex::build(&ps, 1.0);
        assert_eq!(idx.k_nearest(&ps, 1, 1), vec![0]);
        assert!(idx.k_nearest(&ps, 1, 0).is_empty());
    }

    #[test]
    fn single_point_has_no_neighbours() {
        let ps = set(&[(2.0, 2.0)]);
        assert!(GridIndex::build(&ps, 1.0).k_nearest(&ps, 0, 5).is_empty());
    }

    #[test]
    fn equidistant_neighbours_break_ties_by_coordinates() {
        let ps = set(&[(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]);
        let idx = GridIndex::build(&ps, 0.5);
        assert_eq!(idx.k_nearest(&ps, 0, 4), vec![2, 4, 3, 1]);
        assert_eq!(brute_force_knn(&ps, 4).out_neighbours[0], vec![2, 4, 3, 1]);
    }

    #[test]
    fn grid_matches_oracle_on_random_instance() {
        let ps = sample_poisson(Rect::new(0.0, 25.0, 0.0, 20.0).unwrap(), 1.0, 11).unwrap();
        assert!(ps.len() > 400);
        let g = build_knn_graph(&ps, 10);
        let b = brute_force_knn(&ps, 10);
        assert_eq!(g.out_neighbours, b.out_neighbours);
        assert_eq!(g.undirected_edges, b.undirected_edges);
    }

    #[test]
    fn small_sets_are_complete() {
        let ps = set(&[(0.0, 0.0), (5.0, 1.0), (2.0, 7.0), (9.0, 9.0)]);
        for k in 3..6 {
            assert_eq!(build_knn_graph(&ps, k).undirected_edges.len(), 6);
            assert_eq!(brute_force_knn(&ps, k).undirected_edges.len(), 6);
        }
        assert!(build_knn_graph(&ps, 0).undirected_edges.is_empty());
    }

    #[test]
    fn longest_edge_cases() {
        let ps = set(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(longest_edge(&build_knn_graph(&ps, 0)), 0.0);
        assert_eq!(longest_edge(&build_knn_graph(&ps, 1)), 5.0);
    }

    #[test]
    fn truncation_matches_fresh_build() {
        let ps = sample_poisson(Rect::centered_square(15.0), 1.0, 8).unwrap();
        let g = build_knn_graph(&ps, 8);
        for k in 0..8 {
            let t = g.truncated(k);
            let f = build_knn_graph(&ps, k);
            assert_eq!(t.out_neighbours, f.out_neighbours);
            assert_eq!(t.undirected_edges, f.undirected_edges);
        }
    }
}
