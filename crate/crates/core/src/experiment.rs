//! Seeded Monte Carlo estimators.
//!
//! Trial `i` of an experiment always draws from the seed derived from
//! `(master seed, tag, parameters, i)`, and successes are reduced as integer
//! sums, so results do not depend on the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::events::{event_regions, has_component_within, EventKind, EventSpec};
use crate::geometry::{sample_poisson, Rect};
use crate::knn::{build_knn_graph, knn_lists, KnnGraph, VertexId};
use crate::rng::derive_seed_path;
use crate::unionfind::UnionFind;
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    wilson_interval_z(successes, trials, Z95)
}

pub fn wilson_interval_z(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // pin the exact endpoints so 0 ≤ lo ≤ p ≤ hi ≤ 1 survives rounding
    let lo = if successes == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Not serialised: output files must not depend on timing.
    #[serde(skip)]
    pub wall_ms: u128,
}

impl EstimateResult {
    pub fn from_counts(successes: u64, trials: u64, seed: u64, wall_ms: u128) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials);
        EstimateResult {
            trials,
            successes,
            p_hat: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_low,
            ci_high,
            seed,
            wall_ms,
        }
    }
}

/// Runs `f` on a pool of `workers` threads (0 means rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn event_trial_seed(seed: u64, kind: EventKind, m: u32, k: u32, trial: u64) -> u64 {
    derive_seed_path(seed, kind.outer_tag(), &[u64::from(m), u64::from(k), trial])
}

/// Per-trial event outcomes for several kinds on shared samples.
///
/// Kinds with the same outer region (`A`/`A'` on `S`, `B`/`B'` on `R`) see
/// the same point set in every trial.
pub fn event_outcomes(kinds: &[EventKind], m: u32, k: u32, trial: u64, seed: u64) -> Result<Vec<bool>> {
    let mut out = vec![false; kinds.len()];
    for tag in ["S", "R"] {
        let members: Vec<usize> = (0..kinds.len()).filter(|&i| kinds[i].outer_tag() == tag).collect();
        let Some(&first) = members.first() else { continue };
        let spec = EventSpec::new(kinds[first], m, k)?;
        let (outer, _) = event_regions(&spec);
        let ps = sample_poisson(outer, 1.0, event_trial_seed(seed, kinds[first], m, k, trial))?;
        let graph = build_knn_graph(&ps, k as usize);
        for i in members {
            let (_, inner) = event_regions(&EventSpec::new(kinds[i], m, k)?);
            out[i] = has_component_within(&graph, &inner);
        }
    }
    Ok(out)
}

pub fn estimate_events(
    kinds: &[EventKind],
    m: u32,
    k: u32,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<EstimateResult>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    EventSpec::new(EventKind::A, m, k)?;
    let start = Instant::now();
    let counts = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                event_outcomes(kinds, m, k, t, seed)
                    .map(|o| o.into_iter().map(u64::from).collect::<Vec<u64>>())
            })
            .try_reduce(
                || vec![0; kinds.len()],
                |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
            )
    })??;
    let wall = start.elapsed().as_millis();
    Ok(counts
        .into_iter()
        .map(|s| EstimateResult::from_counts(s, trials, seed, wall))
        .collect())
}

pub fn estimate_event(spec: &EventSpec, trials: u64, seed: u64, workers: usize) -> Result<EstimateResult> {
    estimate_events(&[spec.kind], spec.m, spec.k, trials, seed, workers).map(|mut v| v.remove(0))
}

/// `f = -ln p / k` with its interval mapped through the same decreasing map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RateEstimate {
    Measured { f_hat: f64, ci_low: f64, ci_high: f64 },
    Unmeasurable,
}

impl RateEstimate {
    pub fn from_estimate(p: &EstimateResult, k: u32) -> Self {
        if p.successes == 0 || k == 0 {
            return RateEstimate::Unmeasurable;
        }
        let kf = f64::from(k);
        let f = |x: f64| if x > 0.0 { -x.ln() / kf } else { f64::INFINITY };
        RateEstimate::Measured { f_hat: f(p.p_hat), ci_low: f(p.ci_high), ci_high: f(p.ci_low) }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            RateEstimate::Measured { f_hat, .. } => Some(*f_hat),
            RateEstimate::Unmeasurable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: u32,
    pub p1: EstimateResult,
    pub p2: EstimateResult,
    pub f1: RateEstimate,
    pub f2: RateEstimate,
}

impl RateRow {
    pub fn is_measurable(&self) -> bool {
        self.f1.value().is_some() && self.f2.value().is_some()
    }
}

/// Estimates `p1 = P(A_k)` and `p2 = P(B_k)` and their decay rates per `k`.
pub fn estimate_f(k_list: &[u32], m: u32, trials: u64, seed: u64, workers: usize) -> Result<Vec<RateRow>> {
    k_list
        .iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::InvalidParameter("rates need k >= 1".into()));
            }
            let mut r = estimate_events(&[EventKind::A, EventKind::B], m, k, trials, seed, workers)?;
            let p2 = r.pop().expect("two estimates");
            let p1 = r.pop().expect("two estimates");
            Ok(RateRow { k, f1: RateEstimate::from_estimate(&p1, k), f2: RateEstimate::from_estimate(&p2, k), p1, p2 })
        })
        .collect()
}

/// Connectivity of the graph restricted to each prefix length `0..=graph.k`
/// of the neighbour lists. Entry `j` is whether `G_j` is connected.
pub fn connectivity_profile(graph: &KnnGraph<'_>) -> Vec<bool> {
    profile_of_lists(&graph.out_neighbours, graph.k)
}

fn profile_of_lists(lists: &[Vec<VertexId>], k: usize) -> Vec<bool> {
    let m = lists.len();
    let mut uf = UnionFind::new(m);
    let mut out = Vec::with_capacity(k + 1);
    out.push(m <= 1);
    for level in 0..k {
        for (u, nb) in lists.iter().enumerate() {
            if let Some(&v) = nb.get(level) {
                uf.union(u as u32, v);
            }
        }
        out.push(m <= 1 || uf.set_count() == 1);
    }
    out
}

/// `k = ⌊c ln n⌋`.
pub fn k_for(n: f64, c: f64) -> u32 {
    (c * n.ln()).floor().max(0.0) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityRow {
    pub n: f64,
    pub c: f64,
    pub k: u32,
    pub estimate: EstimateResult,
}

/// The square `S_n` of area `n`, centred at the origin.
pub fn square_of_area(n: f64) -> Rect {
    Rect::centered_square(n.sqrt())
}

/// Per trial, one sample of `S_n` is shared by every `c`, so connectivity is
/// monotone in `c` instance by instance.
pub fn connectivity_curve(
    n_list: &[f64],
    c_list: &[f64],
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<ConnectivityRow>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if let Some(n) = n_list.iter().find(|&&n| !n.is_finite() || n < 1.0) {
        return Err(Error::InvalidParameter(format!("n = {n}")));
    }
    if let Some(c) = c_list.iter().find(|&&c| !c.is_finite() || c < 0.0) {
        return Err(Error::InvalidParameter(format!("c = {c}")));
    }
    let mut rows = Vec::new();
    for (ni, &n) in n_list.iter().enumerate() {
        let ks: Vec<u32> = c_list.iter().map(|&c| k_for(n, c)).collect();
        let kmax = ks.iter().copied().max().unwrap_or(0) as usize;
        let start = Instant::now();
        let counts = with_workers(workers, || {
            (0..trials)
                .into_par_iter()
                .map(|t| -> Result<Vec<u64>> {
                    let s = derive_seed_path(seed, "connectivity", &[ni as u64, n.to_bits(), t]);
                    let ps = sample_poisson(square_of_area(n), 1.0, s)?;
                    let profile = profile_of_lists(&knn_lists(&ps, kmax), kmax);
                    Ok(ks.iter().map(|&k| u64::from(profile[k as usize])).collect())
                })
                .try_reduce(
                    || vec![0; ks.len()],
                    |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
                )
        })??;
        let wall = start.elapsed().as_millis();
        for ((&c, &k), s) in c_list.iter().zip(&ks).zip(counts) {
            rows.push(ConnectivityRow { n, c, k, estimate: EstimateResult::from_counts(s, trials, seed, wall) });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::is_connected;
    use crate::geometry::sample_poisson;
    use crate::knn::build_knn_graph;

    #[test]
    fn wilson_is_ordered_and_bounded() {
        for trials in [1u64, 7, 100, 100_000] {
            for s in [0, 1, trials / 2, trials - 1, trials] {
                let (lo, hi) = wilson_interval(s, trials);
                let p = s as f64 / trials as f64;
                assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0, "{s}/{trials}: {lo} {hi}");
            }
        }
        // textbook value: 10/100
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.0552).abs() < 1e-4 && (hi - 0.1744).abs() < 1e-4);
    }

    #[test]
    fn rate_transform() {
        let p = EstimateResult::from_counts(1, 1, 0, 0);
        assert_eq!(RateEstimate::from_estimate(&p, 1).value(), Some(0.0));
        let mut q = EstimateResult::from_counts(3, 10, 0, 0);
        q.p_hat = (-8.0f64).exp();
        assert!((RateEstimate::from_estimate(&q, 1).value().unwrap() - 8.0).abs() < 1e-12);
        let z = EstimateResult::from_counts(0, 10, 0, 0);
        assert_eq!(RateEstimate::from_estimate(&z, 2), RateEstimate::Unmeasurable);
        match RateEstimate::from_estimate(&EstimateResult::from_counts(5, 50, 0, 0), 2) {
            RateEstimate::Measured { f_hat, ci_low, ci_high } => assert!(ci_low <= f_hat && f_hat <= ci_high),
            RateEstimate::Unmeasurable => panic!(),
        }
    }

    #[test]
    fn k_zero_square_is_degenerate() {
        // the side M√k vanishes, so no point is ever sampled
        let spec = EventSpec::new(EventKind::A, 4, 0).unwrap();
        let r = estimate_event(&spec, 20, 1, 1).unwrap();
        assert_eq!(r.successes, 0);
        let r = estimate_events(&[EventKind::A], 4, 1, 200, 1, 1).unwrap();
        assert!(r[0].p_hat > 0.0);
    }

    #[test]
    fn shared_samples_nest() {
        let r = estimate_events(&EventKind::ALL, 8, 1, 400, 5, 1).unwrap();
        assert!(r[0].successes <= r[1].successes);
        assert!(r[2].successes <= r[3].successes);
        for t in 0..200 {
            let o = event_outcomes(&EventKind::ALL, 8, 1, t, 9).unwrap();
            assert!(!o[0] || o[1]);
            assert!(!o[2] || o[3]);
        }
    }

    #[test]
    fn estimates_ignore_worker_count() {
        let a = estimate_events(&EventKind::ALL, 6, 2, 64, 3, 1).unwrap();
        let b = estimate_events(&EventKind::ALL, 6, 2, 64, 3, 4).unwrap();
        let strip = |v: Vec<EstimateResult>| v.into_iter().map(|mut e| { e.wall_ms = 0; e }).collect::<Vec<_>>();
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn profile_matches_direct_connectivity() {
        let ps = sample_poisson(square_of_area(400.0), 1.0, 2).unwrap();
        let g = build_knn_graph(&ps, 7);
        let prof = connectivity_profile(&g);
        for k in 0..=7 {
            assert_eq!(prof[k], is_connected(&g.truncated(k)), "k={k}");
        }
    }

    #[test]
    fn tiny_n_is_connected_by_convention() {
        let rows = connectivity_curve(&[1.0], &[0.5, 2.0], 30, 1, 1).unwrap();
        for r in rows {
            assert_eq!(r.k, 0);
            // at most one vertex happens often; the rest are k = 0 graphs
            assert!(r.estimate.successes > 0);
        }
    }

    #[test]
    fn curve_is_monotone_in_c() {
        let rows = connectivity_curve(&[2000.0], &[0.2, 0.5, 0.8, 1.2], 30, 4, 1).unwrap();
        for w in rows.windows(2) {
            assert!(w[0].estimate.successes <= w[1].estimate.successes);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(estimate_f(&[0], 8, 10, 1, 1).is_err());
        assert!(connectivity_curve(&[0.5], &[1.0], 10, 1, 1).is_err());
        assert!(estimate_events(&[EventKind::A], 0, 1, 10, 1, 1).is_err());
        assert!(estimate_events(&[EventKind::A], 8, 1, 0, 1, 1).is_err());
    }
}
