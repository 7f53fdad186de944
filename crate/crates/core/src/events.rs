//! Connected components and the small-component events `A_k, A'_k, B_k, B'_k`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{DiscConstruction, Point, PointSet, Rect};
use crate::knn::{KnnGraph, VertexId};
use crate::unionfind::UnionFind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    pub id: usize,
    pub vertex_ids: Vec<VertexId>,
    pub size: usize,
    pub bbox: Rect,
    pub diameter: f64,
}

fn component_labels(graph: &KnnGraph<'_>) -> (Vec<u32>, usize) {
    let mut uf = UnionFind::new(graph.vertex_count());
    for &(u, v) in &graph.undirected_edges {
        uf.union(u, v);
    }
    let count = uf.set_count();
    (uf.labels(), count)
}

/// Components ordered by their smallest vertex id.
pub fn components(graph: &KnnGraph<'_>) -> Vec<ComponentSummary> {
    let (labels, count) = component_labels(graph);
    let mut members: Vec<Vec<VertexId>> = vec![Vec::new(); count];
    for (v, &l) in labels.iter().enumerate() {
        members[l as usize].push(v as VertexId);
    }
    let pts = &graph.points.points;
    members
        .into_iter()
        .enumerate()
        .map(|(id, vertex_ids)| {
            let bbox = Rect::bounding(vertex_ids.iter().map(|&v| pts[v as usize]))
                .expect("components are non-empty");
            let diameter = diameter_of(vertex_ids.iter().map(|&v| pts[v as usize]).collect());
            ComponentSummary { id, size: vertex_ids.len(), vertex_ids, bbox, diameter }
        })
        .collect()
}

pub fn is_connected(graph: &KnnGraph<'_>) -> bool {
    graph.vertex_count() <= 1 || component_labels(graph).1 == 1
}

pub fn component_diameter(c: &ComponentSummary, points: &PointSet) -> f64 {
    diameter_of(c.vertex_ids.iter().map(|&v| points.points[v as usize]).collect())
}

const HULL_THRESHOLD: usize = 1000;

fn diameter_of(pts: Vec<Point>) -> f64 {
    let pts = if pts.len() > HULL_THRESHOLD { convex_hull(pts) } else { pts };
    let mut best = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max(a.dist2(b));
        }
    }
    best.sqrt()
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// Component inside `½S`.
    A,
    /// Component inside `¾S`.
    APrime,
    /// Component inside `½R`.
    B,
    /// Component inside `¾R`.
    BPrime,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [EventKind::A, EventKind::APrime, EventKind::B, EventKind::BPrime];

    /// Kinds sharing an outer region share per-trial samples.
    pub fn outer_tag(self) -> &'static str {
        match self {
            EventKind::A | EventKind::APrime => "S",
            EventKind::B | EventKind::BPrime => "R",
        }
    }

    fn inner_scale(self) -> f64 {
        match self {
            EventKind::A | EventKind::B => 0.5,
            EventKind::APrime | EventKind::BPrime => 0.75,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::A => "A",
            EventKind::APrime => "A'",
            EventKind::B => "B",
            EventKind::BPrime => "B'",
        })
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(EventKind::A),
            "A'" | "a'" | "Ap" | "ap" | "A-prime" => Ok(EventKind::APrime),
            "B" | "b" => Ok(EventKind::B),
            "B'" | "b'" | "Bp" | "bp" | "B-prime" => Ok(EventKind::BPrime),
            _ => Err(Error::InvalidParameter(format!("event kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub m: u32,
    pub k: u32,
}

impl EventSpec {
    pub fn new(kind: EventKind, m: u32, k: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        Ok(EventSpec { kind, m, k })
    }

    /// Side `M√k` of `S` and `R`.
    pub fn side(&self) -> f64 {
        f64::from(self.m) * f64::from(self.k).sqrt()
    }
}

/// `(outer, inner)` for an event. `S` is centred at the origin and `R`
/// spans `[0, M√k] × [-½M√k, ½M√k]`; inner regions scale about the origin,
/// so `R'` and `R''` share the left side of `R`.
pub fn event_regions(spec: &EventSpec) -> (Rect, Rect) {
    let side = spec.side();
    let outer = match spec.kind {
        EventKind::A | EventKind::APrime => Rect::centered_square(side),
        EventKind::B | EventKind::BPrime => {
            Rect { xmin: 0.0, xmax: side, ymin: -side / 2.0, ymax: side / 2.0 }
        }
    };
    (outer, outer.scaled(spec.kind.inner_scale()))
}

/// True iff some component lies entirely in the closed rectangle `inner`.
pub fn has_component_within(graph: &KnnGraph<'_>, inner: &Rect) -> bool {
    let m = graph.vertex_count();
    if m == 0 {
        return false;
    }
    let (labels, count) = component_labels(graph);
    let mut escapes = vec![false; count];
    for (v, &l) in labels.iter().enumerate() {
        if !inner.contains(&graph.points.points[v]) {
            escapes[l as usize] = true;
        }
    }
    escapes.iter().any(|e| !e)
}

pub fn event_small_component(graph: &KnnGraph<'_>, spec: &EventSpec) -> bool {
    has_component_within(graph, &event_regions(spec).1)
}

/// Default net resolution for condition (III).
pub const DEFAULT_EPS_NET: f64 = 0.05;

pub fn check_condition_iii(points: &PointSet, k: u32, center: Point) -> bool {
    check_condition_iii_with(points, k, center, DEFAULT_EPS_NET)
}

/// Condition (III) via a finite net on the boundary of `D3`.
///
/// The net has `t = ⌈3π/ε⌉` equally spaced points `x_i`, so every boundary
/// point `P` is within `εr` of one of them and `B(P, 2r) ⊇ B(x_i, (2-ε)r)`.
/// Requiring `k+1` points of `D5 \ D3` in every `B(x_i, (2-ε)r)` therefore
/// implies the condition for all `P`.
pub fn check_condition_iii_with(points: &PointSet, k: u32, center: Point, eps_net: f64) -> bool {
    assert!(eps_net > 0.0 && eps_net < 2.0, "net resolution must lie in (0, 2)");
    let c = DiscConstruction::new(k, center);
    let shell = c.outer_annulus();
    let ring: Vec<Point> = points.points.iter().copied().filter(|p| shell.contains(p)).collect();
    let need = k as usize + 1;
    if ring.len() < need {
        return false;
    }
    let t = (3.0 * PI / eps_net).ceil() as usize;
    let probe = (2.0 - eps_net) * c.r;
    let probe2 = probe * probe;
    (0..t).all(|i| {
        let phi = 2.0 * PI * i as f64 / t as f64;
        let x = Point::new(center.x + 3.0 * c.r * phi.cos(), center.y + 3.0 * c.r * phi.sin());
        ring.iter().filter(|p| p.dist2(&x) <= probe2).take(need).count() == need
    })
}

/// Edges joining a point of `D1` to a point outside `D3`.
pub fn edges_across_disc_gap(graph: &KnnGraph<'_>, construction: &DiscConstruction) -> usize {
    let pts = &graph.points.points;
    graph
        .undirected_edges
        .iter()
        .filter(|&&(u, v)| {
            let (a, b) = (&pts[u as usize], &pts[v as usize]);
            (construction.in_d1(a) && construction.outside_d3(b))
                || (construction.in_d1(b) && construction.outside_d3(a))
        })
        .count()
}
