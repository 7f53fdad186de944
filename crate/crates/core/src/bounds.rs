//! Closed-form Poisson bounds, exact tails and the disc-construction lower bound.
//!
//! All logarithms are natural. Functions whose values can underflow have an
//! `_ln` twin returning the logarithm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::events::{check_condition_iii, event_regions, EventKind, EventSpec};
use crate::experiment::wilson_interval;
use crate::geometry::{sample_poisson, DiscConstruction, Point};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailDirection {
    /// `P(X ≥ ·)`
    Upper,
    /// `P(X ≤ ·)`
    Lower,
}

/// A Chernoff query about `Po(area)` relative to the level `rho·area`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub area: f64,
    pub rho: f64,
    pub direction: TailDirection,
}

/// `ρ - 1 - ρ log ρ` with `0 log 0 = 0`. Non-positive, zero only at `ρ = 1`.
pub fn rate(rho: f64) -> f64 {
    if rho == 0.0 {
        -1.0
    } else {
        rho - 1.0 - rho * rho.ln()
    }
}

pub fn poisson_tail_bound_ln(q: &TailQuery) -> f64 {
    rate(q.rho) * q.area
}

/// `e^{(ρ-1-ρ log ρ)A}`. It bounds `P(Po(A) ≥ ρA)` for `ρ > 1` and
/// `P(Po(A) ≤ ρA)` for `ρ < 1`; the direction only selects which tail the
/// caller means.
pub fn poisson_tail_bound(q: &TailQuery) -> f64 {
    poisson_tail_bound_ln(q).exp()
}

pub const EXACT_MEAN_CAP: f64 = 1e4;

fn ln_pmf(mean: f64, j: u64) -> f64 {
    let j = j as f64;
    -mean + j * mean.ln() - ln_gamma(j + 1.0)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln P(X ≥ t)` by direct summation, for `t > mean` where terms decrease.
fn ln_upper_direct(mean: f64, t: u64) -> f64 {
    let mut terms = Vec::new();
    let mut j = t;
    loop {
        let lt = ln_pmf(mean, j);
        terms.push(lt);
        if lt < terms[0] - 45.0 || j > t + 100_000 {
            break;
        }
        j += 1;
    }
    log_sum_exp(&terms)
}

/// `ln P(X ≤ t)` by direct summation.
fn ln_lower_direct(mean: f64, t: u64) -> f64 {
    let terms: Vec<f64> = (0..=t).map(|j| ln_pmf(mean, j)).collect();
    log_sum_exp(&terms)
}

fn ln_one_minus_exp(l: f64) -> f64 {
    (-l.exp()).ln_1p()
}

/// `ln P(Po(mean) ≥ t)` or `ln P(Po(mean) ≤ t)`.
pub fn poisson_tail_exact_ln(mean: f64, threshold: u64, direction: TailDirection) -> Result<f64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::InvalidParameter(format!("Poisson mean {mean}")));
    }
    if mean > EXACT_MEAN_CAP {
        return Err(Error::MeanTooLarge(mean));
    }
    if mean == 0.0 {
        let mass_at_zero = match direction {
            TailDirection::Upper => threshold == 0,
            TailDirection::Lower => true,
        };
        return Ok(if mass_at_zero { 0.0 } else { f64::NEG_INFINITY });
    }
    let t = threshold;
    Ok(match direction {
        TailDirection::Upper if t == 0 => 0.0,
        TailDirection::Upper if t as f64 > mean => ln_upper_direct(mean, t),
        TailDirection::Upper => ln_one_minus_exp(ln_lower_direct(mean, t - 1)),
        TailDirection::Lower if t as f64 <= mean => ln_lower_direct(mean, t),
        TailDirection::Lower => ln_one_minus_exp(ln_upper_direct(mean, t + 1)),
    })
}

pub fn poisson_tail_exact(mean: f64, threshold: u64, direction: TailDirection) -> Result<f64> {
    poisson_tail_exact_ln(mean, threshold, direction).map(f64::exp)
}

/// The exact probability that the bound of `q` is about:
/// `P(X ≥ ⌈ρA⌉)` for the upper side, `P(X ≤ ⌊ρA⌋)` for the lower side.
pub fn poisson_tail_exact_for(q: &TailQuery) -> Result<f64> {
    let level = q.rho * q.area;
    match q.direction {
        TailDirection::Upper => poisson_tail_exact(q.area, level.ceil() as u64, TailDirection::Upper),
        TailDirection::Lower => poisson_tail_exact(q.area, level.floor() as u64, TailDirection::Lower),
    }
}

/// A region of the plogp estimate: density ratio and area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub rho: f64,
    pub area: f64,
}

/// Leading exponent `Σ (ρ_i - 1 - ρ_i log ρ_i)|A_i|` of the probability of
/// exactly `ρ_i|A_i|` points in each block. The lower-order term is
/// reported separately by [`plogp_correction_scale`].
pub fn plogp_exponent(blocks: &[Block]) -> f64 {
    blocks.iter().map(|b| rate(b.rho) * b.area).sum()
}

/// `r log₊ Σ ρ_i|A_i|` with `log₊ x = max(log x, 1)`: the size of the
/// correction term, without its unknown constant.
pub fn plogp_correction_scale(blocks: &[Block]) -> f64 {
    let total: f64 = blocks.iter().map(|b| b.rho * b.area).sum();
    let log_plus = if total > 0.0 { total.ln().max(1.0) } else { 1.0 };
    blocks.len() as f64 * log_plus
}

/// `ln` of the expected number of vertices whose k-th neighbour is farther
/// than `5√k`: fewer than `k` points in a quarter disc of area `(π/4)25k > 19k`.
pub fn long_edge_probability_bound_ln(m: f64, k: u32, big_m: u32) -> Result<f64> {
    let kf = f64::from(k);
    let needed = f64::from(big_m).powi(2) * kf;
    if !m.is_finite() || m < needed {
        return Err(Error::InvalidParameter(format!(
            "area {m} is below M²k = {needed}; the quarter disc does not fit"
        )));
    }
    Ok(m.ln() + rate(1.0 / 19.0) * 19.0 * kf)
}

pub fn long_edge_probability_bound(m: f64, k: u32, big_m: u32) -> Result<f64> {
    long_edge_probability_bound_ln(m, k, big_m).map(f64::exp)
}

/// Union bound on an over-dense cell (`d > N²/21`) under Poisson sampling,
/// capped at 1. Trivial (1) when `N²/21 ≤ 1`.
pub fn type_a_probability_bound(big_m: u32, n: u32, k: u32) -> f64 {
    let cells = (f64::from(big_m) * f64::from(n)).powi(2);
    let rho = f64::from(n).powi(2) / 21.0;
    if rho <= 1.0 {
        return 1.0;
    }
    let area = f64::from(k) / f64::from(n).powi(2);
    (cells.ln() + rate(rho) * area).exp().min(1.0)
}

/// Union bound on a heavy annulus over the circle family, capped at 1.
/// Trivial (1) below `N₁ = (180M/ε)^{1/2}` or when `εN/(90M) ≤ 1`.
pub fn type_b_probability_bound(big_m: u32, n: u32, k: u32, eps: f64) -> f64 {
    let (mf, nf, kf) = (f64::from(big_m), f64::from(n), f64::from(k));
    let n1 = (180.0 * mf / eps).sqrt();
    let rho = eps * nf / (90.0 * mf);
    if nf < n1 || rho <= 1.0 {
        return 1.0;
    }
    let area = 30.0 * mf * kf / nf;
    (4.0 * (mf * nf).ln() + rate(rho) * area).exp().min(1.0)
}

/// The three-disc lower bound on `p1(k) = P(A_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscBoundResult {
    pub k: u32,
    pub m: u32,
    pub trials: u64,
    pub seed: u64,
    /// `P(Po(k+1) ≥ k+1)`, exact.
    pub p_i: f64,
    /// `-8(k+1)`, the log void probability of `D3 \ D1`.
    pub ln_p_ii: f64,
    pub p_ii: f64,
    pub p_iii_successes: u64,
    pub p_iii_hat: f64,
    pub p_iii_ci_low: f64,
    pub p_iii_ci_high: f64,
    pub ln_p1_lower: f64,
    pub p1_lower: f64,
    /// `-ln(p1_lower)/k`; infinite when the lower confidence limit of `pIII` is 0.
    pub f1_upper: f64,
}

/// Lower bound `pI · pII · pIII_low` on `P(A_k)`, with `pIII` estimated by
/// Monte Carlo over an unconditioned intensity-one process on `S`.
///
/// The discs are centred at the origin. `D5` must fit in `S` and `D1` in the
/// inner square `½S`, which is what the event needs.
pub fn disc_construction_bound(k: u32, big_m: u32, trials: u64, seed: u64) -> Result<DiscBoundResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let spec = EventSpec::new(EventKind::A, big_m, k)?;
    let (outer, inner) = event_regions(&spec);
    let construction = DiscConstruction::new(k, Point::ORIGIN);
    construction.check_fit(&outer)?;
    if !inner.contains_disc(&construction.d1()) {
        return Err(Error::GeometryFit { cx: 0.0, cy: 0.0, radius: construction.r });
    }

    let kf = f64::from(k);
    let ln_p_i = poisson_tail_exact_ln(kf + 1.0, u64::from(k) + 1, TailDirection::Upper)?;
    let ln_p_ii = -8.0 * (kf + 1.0);

    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let ps = sample_poisson(outer, 1.0, derive_seed(seed, "disc-bound-exterior", t))?;
            Ok(u64::from(check_condition_iii(&ps, k, Point::ORIGIN)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (lo, hi) = wilson_interval(successes, trials);
    let ln_p1_lower = ln_p_i + ln_p_ii + lo.ln();
    let f1_upper = if k == 0 { f64::NAN } else { -ln_p1_lower / kf };

    Ok(DiscBoundResult {
        k,
        m: big_m,
        trials,
        seed,
        p_i: ln_p_i.exp(),
        ln_p_ii,
        p_ii: ln_p_ii.exp(),
        p_iii_successes: successes,
        p_iii_hat: successes as f64 / trials as f64,
        p_iii_ci_low: lo,
        p_iii_ci_high: hi,
        ln_p1_lower,
        p1_lower: ln_p1_lower.exp(),
        f1_upper,
    })
}

/// `max{1/c1, 1/(2 c2)}`.
pub fn c_crit_from_rates(c1: f64, c2: f64) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(Error::InvalidParameter(format!("rates must be positive, got ({c1}, {c2})")));
    }
    Ok((1.0 / c1).max(1.0 / (2.0 * c2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: forward pmf recurrence from `e^{-A}`.
    fn upper_by_recurrence(mean: f64, t: u64) -> f64 {
        let mut p = (-mean).exp();
        let mut below = 0.0;
        for j in 0..t {
            below += p;
            p *= mean / (j + 1) as f64;
        }
        1.0 - below
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn bound_at_rho_one_is_one() {
        for area in [0.0, 1.0, 17.5] {
            let q = TailQuery { area, rho: 1.0, direction: TailDirection::Upper };
            assert_eq!(poisson_tail_bound(&q), 1.0);
        }
    }

    #[test]
    fn long_edge_intermediate() {
        let q = TailQuery { area: 19.0, rho: 1.0 / 19.0, direction: TailDirection::Lower };
        let b = poisson_tail_bound(&q);
        let want = 19.0 * (-18.0f64).exp();
        assert!(close(b, want, 1e-12), "{b} vs {want}");
        assert!(b < (-15.0f64).exp());
        assert!(close(b, 2.89e-7, 2e-3));
    }

    #[test]
    fn rho_zero_is_void_probability() {
        let q = TailQuery { area: 8.0, rho: 0.0, direction: TailDirection::Lower };
        assert_eq!(poisson_tail_bound(&q), (-8.0f64).exp());
        assert_eq!(poisson_tail_exact(8.0, 0, TailDirection::Lower).unwrap(), (-8.0f64).exp());
    }

    #[test]
    fn exact_tail_values() {
        let e = std::f64::consts::E;
        assert!(close(poisson_tail_exact(1.0, 1, TailDirection::Upper).unwrap(), 1.0 - 1.0 / e, 1e-14));
        let p = poisson_tail_exact(2.0, 2, TailDirection::Upper).unwrap();
        assert!(close(p, 1.0 - 3.0 / (e * e), 1e-14));
        assert!((p - 0.5940).abs() < 1e-4);
        for k in 0..=100u64 {
            let p = poisson_tail_exact((k + 1) as f64, k + 1, TailDirection::Upper).unwrap();
            assert!(p > 0.5, "k={k}: {p}");
        }
    }

    #[test]
    fn exact_tail_matches_recurrence_oracle() {
        for mean in [0.3, 1.0, 4.5, 12.0, 40.0, 150.0] {
            for t in 0..(3.0 * mean) as u64 + 5 {
                let a = poisson_tail_exact(mean, t, TailDirection::Upper).unwrap();
                let b = upper_by_recurrence(mean, t);
                assert!((a - b).abs() < 1e-12, "mean {mean} t {t}: {a} vs {b}");
                let lo = poisson_tail_exact(mean, t, TailDirection::Lower).unwrap();
                let want_lo = 1.0 - upper_by_recurrence(mean, t + 1);
                assert!((lo - want_lo).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_tail_deep_in_the_tail_stays_positive() {
        let l = poisson_tail_exact_ln(10.0, 400, TailDirection::Upper).unwrap();
        assert!(l.is_finite() && l < -700.0);
        let want = ln_pmf(10.0, 400);
        assert!((l - want).abs() < 0.05);
    }

    #[test]
    fn exact_tail_rejects_large_means() {
        assert!(matches!(
            poisson_tail_exact(2e4, 3, TailDirection::Upper),
            Err(Error::MeanTooLarge(_))
        ));
        assert_eq!(poisson_tail_exact(0.0, 0, TailDirection::Upper).unwrap(), 1.0);
        assert_eq!(poisson_tail_exact(0.0, 1, TailDirection::Upper).unwrap(), 0.0);
    }

    #[test]
    fn plogp_examples() {
        assert_eq!(plogp_exponent(&[Block { rho: 1.0, area: 5.0 }, Block { rho: 1.0, area: 2.0 }]), 0.0);
        for k in [1.0, 4.0, 63.0] {
            let e = plogp_exponent(&[Block { rho: 0.0, area: 8.0 * (k + 1.0) }]);
            assert_eq!(e, -8.0 * (k + 1.0));
        }
        let e = plogp_exponent(&[Block { rho: 2.0, area: 5.0 }]);
        assert!(close(e, 5.0 - 10.0 * 2f64.ln(), 1e-15));
        assert!((e + 1.9315).abs() < 1e-4);
        assert!(plogp_correction_scale(&[Block { rho: 2.0, area: 5.0 }]) > 0.0);
    }

    #[test]
    fn long_edge_bound_values() {
        let b = long_edge_probability_bound(1600.0, 1, 40).unwrap();
        assert!(close(b, 1600.0 * 19.0 * (-18.0f64).exp(), 1e-12));
        assert!((b - 4.6e-4).abs() < 0.1e-4);
        assert!(long_edge_probability_bound(1599.0, 1, 40).is_err());
        let grow = long_edge_probability_bound(3200.0, 1, 40).unwrap();
        let shrink = long_edge_probability_bound(3200.0, 2, 40).unwrap();
        assert!(grow > b && shrink < grow);
    }

    #[test]
    fn c_crit_values() {
        assert_eq!(c_crit_from_rates(8.0, 8.0).unwrap(), 0.125);
        assert_eq!(c_crit_from_rates(4.0, 1.0).unwrap(), 0.5);
        for c in [0.1, 1.0, 7.3] {
            assert_eq!(c_crit_from_rates(c, c).unwrap(), 1.0 / c);
        }
        assert!(c_crit_from_rates(0.0, 1.0).is_err());
        assert!(c_crit_from_rates(1.0, -2.0).is_err());
    }

    #[test]
    fn disc_bound_structure() {
        let r = disc_construction_bound(3, 12, 50, 1).unwrap();
        assert!(close(r.p_ii, (-32.0f64).exp(), 1e-15));
        assert!((r.p_ii - 1.27e-14).abs() < 0.01e-14);
        let lhs = r.f1_upper - 8.0 * 4.0 / 3.0 + (r.p_i * r.p_iii_ci_low).ln() / 3.0;
        assert!(lhs.abs() < 1e-12);
        assert!(disc_construction_bound(3, 3, 10, 1).is_err());
    }

    #[test]
    fn type_bounds_are_probabilities() {
        assert_eq!(type_a_probability_bound(8, 4, 64), 1.0);
        let a = type_a_probability_bound(2, 21, 100_000);
        assert!(a < 1e-10);
        assert_eq!(type_b_probability_bound(8, 8, 64, 0.4), 1.0);
    }
}
