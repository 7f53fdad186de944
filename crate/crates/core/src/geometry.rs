//! Planar regions, exact areas and seeded Poisson sampling.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::rng::{derive_seed, stream, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Squared Euclidean distance. Every comparison in the crate goes through
    /// this one expression so that index and oracle agree bit for bit.
    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let all_finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !all_finite || xmin > xmax || ymin > ymax {
            return Err(Error::InvalidParameter(format!(
                "rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Rect { xmin, xmax, ymin, ymax })
    }

    /// Square of the given side centred at the origin.
    pub fn centered_square(side: f64) -> Self {
        let h = side / 2.0;
        Rect { xmin: -h, xmax: h, ymin: -h, ymax: h }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.xmin >= self.xmin
            && other.xmax <= self.xmax
            && other.ymin >= self.ymin
            && other.ymax <= self.ymax
    }

    pub fn contains_disc(&self, d: &Disc) -> bool {
        self.contains_rect(&d.bounding_box())
    }

    /// `{ f·x : x ∈ self }`, scaling about the origin.
    pub fn scaled(&self, f: f64) -> Self {
        Rect {
            xmin: self.xmin * f,
            xmax: self.xmax * f,
            ymin: self.ymin * f,
            ymax: self.ymax * f,
        }
    }

    /// Smallest rectangle containing all points; `None` for an empty slice.
    pub fn bounding(points: impl IntoIterator<Item = Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut r = Rect { xmin: first.x, xmax: first.x, ymin: first.y, ymax: first.y };
        for p in it {
            r.xmin = r.xmin.min(p.x);
            r.xmax = r.xmax.max(p.x);
            r.ymin = r.ymin.min(p.y);
            r.ymax = r.ymax.max(p.y);
        }
        Some(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidParameter(format!("disc radius {radius}")));
        }
        Ok(Disc { center, radius })
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.center.dist2(p) <= self.radius * self.radius
    }

    pub fn bounding_box(&self) -> Rect {
        Rect {
            xmin: self.center.x - self.radius,
            xmax: self.center.x + self.radius,
            ymin: self.center.y - self.radius,
            ymax: self.center.y + self.radius,
        }
    }
}

/// The closed outer disc minus the closed inner disc, concentric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub center: Point,
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn new(center: Point, inner: f64, outer: f64) -> Result<Self> {
        if !(0.0..=outer).contains(&inner) || !outer.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "annulus radii {inner}..{outer}"
            )));
        }
        Ok(Annulus { center, inner, outer })
    }

    pub fn area(&self) -> f64 {
        PI * (self.outer * self.outer - self.inner * self.inner)
    }

    pub fn contains(&self, p: &Point) -> bool {
        let d2 = self.center.dist2(p);
        d2 > self.inner * self.inner && d2 <= self.outer * self.outer
    }
}

/// Anything with an exact area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Rect(Rect),
    Disc(Disc),
    Annulus(Annulus),
}

impl Region {
    pub fn area(&self) -> f64 {
        match self {
            Region::Rect(r) => r.area(),
            Region::Disc(d) => d.area(),
            Region::Annulus(a) => a.area(),
        }
    }
}

/// A realised point pattern together with how it was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Point>,
    pub region: Rect,
    pub seed: u64,
    pub intensity: f64,
}

impl PointSet {
    /// Wraps explicit points; fails if any point is non-finite or outside `region`.
    pub fn from_points(points: Vec<Point>, region: Rect) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.is_finite() || !region.contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "point ({}, {}) is not a finite point of the region",
                p.x, p.y
            )));
        }
        Ok(PointSet { points, region, seed: 0, intensity: 1.0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const INVERSION_CUTOFF: f64 = 30.0;

/// Draws a Poisson(`mean`) variate: sequential inversion below 30,
/// Hörmann's PTRS transformed rejection above.
pub fn poisson_variate(mean: f64, rng: &mut Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_CUTOFF {
        poisson_inversion(mean, rng)
    } else {
        poisson_ptrs(mean, rng)
    }
}

fn poisson_inversion(mean: f64, rng: &mut Rng) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        // the cdf can stall just below 1 in floating point
        if p < f64::MIN_POSITIVE && k as f64 > mean {
            break;
        }
    }
    k
}

fn poisson_ptrs(mean: f64, rng: &mut Rng) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

fn uniform_in_rect(region: &Rect, rng: &mut Rng) -> Point {
    let x = region.xmin + rng.random::<f64>() * region.width();
    let y = region.ymin + rng.random::<f64>() * region.height();
    // guards the rounding of xmin + u·w past xmax
    Point::new(x.min(region.xmax), y.min(region.ymax))
}

fn uniform_in_disc(center: Point, radius: f64, rng: &mut Rng) -> Point {
    let rho = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Point::new(center.x + rho * phi.cos(), center.y + rho * phi.sin())
}

fn check_intensity(intensity: f64) -> Result<()> {
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(Error::InvalidParameter(format!("intensity {intensity}")));
    }
    Ok(())
}

/// Homogeneous Poisson process on `region`: the count first, then the
/// coordinates, all from the stream seeded by `seed`.
pub fn sample_poisson(region: Rect, intensity: f64, seed: u64) -> Result<PointSet> {
    check_intensity(intensity)?;
    let mut rng = stream(seed);
    let count = poisson_variate(intensity * region.area(), &mut rng);
    let points = (0..count).map(|_| uniform_in_rect(&region, &mut rng)).collect();
    Ok(PointSet { points, region, seed, intensity })
}

/// The three concentric discs `D1 ⊂ D3 ⊂ D5` of radii `r, 3r, 5r` with
/// `π r² = k + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscConstruction {
    pub k: u32,
    pub center: Point,
    pub r: f64,
}

impl DiscConstruction {
    pub fn new(k: u32, center: Point) -> Self {
        let r = ((f64::from(k) + 1.0) / PI).sqrt();
        DiscConstruction { k, center, r }
    }

    pub fn d1(&self) -> Disc {
        Disc { center: self.center, radius: self.r }
    }

    pub fn d3(&self) -> Disc {
        Disc { center: self.center, radius: 3.0 * self.r }
    }

    pub fn d5(&self) -> Disc {
        Disc { center: self.center, radius: 5.0 * self.r }
    }

    /// `D3 \ D1`, the region forced empty.
    pub fn inner_annulus(&self) -> Annulus {
        Annulus { center: self.center, inner: self.r, outer: 3.0 * self.r }
    }

    /// `D5 \ D3`, the region condition (III) counts in.
    pub fn outer_annulus(&self) -> Annulus {
        Annulus { center: self.center, inner: 3.0 * self.r, outer: 5.0 * self.r }
    }

    pub fn in_d1(&self, p: &Point) -> bool {
        self.center.dist2(p) <= self.r * self.r
    }

    pub fn outside_d3(&self, p: &Point) -> bool {
        self.center.dist2(p) > 9.0 * self.r * self.r
    }

    pub fn check_fit(&self, outer: &Rect) -> Result<()> {
        let d5 = self.d5();
        if outer.contains_disc(&d5) {
            Ok(())
        } else {
            Err(Error::GeometryFit { cx: self.center.x, cy: self.center.y, radius: d5.radius })
        }
    }
}

/// A conditioned sample plus the number of draws the D1 rejection step took.
#[derive(Debug, Clone)]
pub struct DiscSample {
    pub points: PointSet,
    pub construction: DiscConstruction,
    pub d1_attempts: u32,
}

/// Poisson process on `outer` conditioned on (I) `|D1 ∩ P| ≥ k+1` and
/// (II) `D3 \ D1` empty. The exterior `outer \ D3` keeps intensity
/// `exterior_intensity` and is left unconditioned.
pub fn sample_disc_conditioned_with(
    k: u32,
    outer: Rect,
    center: Point,
    exterior_intensity: f64,
    seed: u64,
) -> Result<DiscSample> {
    check_intensity(exterior_intensity)?;
    let construction = DiscConstruction::new(k, center);
    construction.check_fit(&outer)?;
    let d1 = construction.d1();

    let mut d1_rng = stream(derive_seed(seed, "disc-d1", 0));
    let mut attempts = 0u32;
    let d1_count = loop {
        attempts += 1;
        let c = poisson_variate(d1.area(), &mut d1_rng);
        if c > u64::from(k) {
            break c;
        }
    };
    let mut points: Vec<Point> = (0..d1_count)
        .map(|_| uniform_in_disc(center, d1.radius, &mut d1_rng))
        .collect();

    let exterior = sample_poisson(outer, exterior_intensity, derive_seed(seed, "disc-exterior", 0))?;
    points.extend(exterior.points.into_iter().filter(|p| construction.outside_d3(p)));

    Ok(DiscSample {
        points: PointSet { points, region: outer, seed, intensity: exterior_intensity },
        construction,
        d1_attempts: attempts,
    })
}

pub fn sample_disc_conditioned(k: u32, outer: Rect, center: Point, seed: u64) -> Result<PointSet> {
    sample_disc_conditioned_with(k, outer, center, 1.0, seed).map(|s| s.points)
}
