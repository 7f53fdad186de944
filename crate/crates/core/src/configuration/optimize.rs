//! Simulated annealing over certified good configurations.

use std::collections::BTreeSet;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bad::{is_type_a_default, is_type_b};
use super::certificate::Certifier;
use super::seed::certified_disc_seed;
use super::{is_feasible, theta, theta_contribution, tile, CellId, Configuration, Label};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub iterations: u64,
    pub restarts: u32,
    pub t_start: f64,
    pub t_end: f64,
    /// Probability of a label move; the rest are `T`-boundary moves.
    pub label_move_prob: f64,
    /// Moves touch cells within `window_factor · r + 4` cells of the origin.
    pub window_factor: f64,
    pub enforce_type_a: bool,
    /// The Type B scan is quadratic in the cell count and is off by default.
    pub enforce_type_b: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            iterations: 20_000,
            restarts: 1,
            t_start: 0.05,
            t_end: 1e-4,
            label_move_prob: 0.8,
            window_factor: 4.0,
            enforce_type_a: true,
            enforce_type_b: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub configuration: Configuration,
    pub t_cells: BTreeSet<CellId>,
    pub theta: f64,
    pub seed_theta: f64,
    pub accepted: u64,
}

fn is_good(config: &Configuration, eps: f64, params: &SearchParams) -> bool {
    !(params.enforce_type_a && is_type_a_default(config)) && !(params.enforce_type_b && is_type_b(config, eps))
}

/// Seeds from the best certified disc configuration and anneals.
pub fn optimize_theta(m: u32, n: u32, k: u32, eps: f64, params: &SearchParams, seed: u64) -> Result<OptimizeResult> {
    let tiling = tile(m, n, k)?;
    let (config, t_cells, _) = certified_disc_seed(&tiling)?;
    optimize_from(&config, &t_cells, eps, params, seed)
}

/// Anneals from a given certified configuration; restarts run in parallel.
pub fn optimize_from(
    config: &Configuration,
    t_cells: &BTreeSet<CellId>,
    eps: f64,
    params: &SearchParams,
    seed: u64,
) -> Result<OptimizeResult> {
    if !(params.t_start > 0.0 && params.t_end > 0.0 && (0.0..=1.0).contains(&params.label_move_prob)) {
        return Err(Error::InvalidParameter(format!("bad search parameters {params:?}")));
    }
    let cert = Certifier::new(config.tiling);
    if !cert.small_component(config, t_cells) || !is_good(config, eps, params) {
        return Err(Error::SeedNotCertified);
    }
    let seed_theta = theta(config)?;
    let runs: Vec<OptimizeResult> = (0..params.restarts.max(1))
        .into_par_iter()
        .map(|i| anneal(&cert, config, t_cells, seed_theta, eps, params, derive_seed(seed, "anneal", u64::from(i))))
        .collect::<Result<_>>()?;
    let mut best = runs
        .into_iter()
        .reduce(|a, b| if b.theta < a.theta { b } else { a })
        .expect("at least one restart");
    best.seed_theta = seed_theta;
    Ok(best)
}

enum Move {
    Label(CellId, Label),
    Add(CellId),
    Remove(CellId),
}

fn anneal(
    cert: &Certifier,
    seed_config: &Configuration,
    seed_t: &BTreeSet<CellId>,
    seed_theta: f64,
    eps: f64,
    params: &SearchParams,
    rng_seed: u64,
) -> Result<OptimizeResult> {
    let tiling = *cert.tiling();
    let n = tiling.n;
    let mut rng = stream(rng_seed);
    let labels: Vec<Label> =
        (0..=2 * n).map(Label::Finite).filter(|&l| is_feasible(l, tiling.k, n)).collect();
    let r = (f64::from(tiling.k + 1) / std::f64::consts::PI).sqrt() / tiling.ell();
    let window_radius = params.window_factor * r + 4.0;
    let window: Vec<CellId> = (0..tiling.cell_count())
        .filter(|&id| {
            let z = tiling.cell_center(id);
            (z.x * z.x + z.y * z.y).sqrt() / tiling.ell() <= window_radius
        })
        .collect();
    let threshold_a = f64::from(n * n) / 21.0;

    let mut config = seed_config.clone();
    let mut t_cells = seed_t.clone();
    let mut reaches = cert.reaches(&config);
    let mut current = seed_theta;
    let mut best = (seed_theta, config.clone(), t_cells.clone());
    let mut accepted = 0u64;

    for it in 0..params.iterations {
        let frac = it as f64 / params.iterations.max(1) as f64;
        let temp = params.t_start * (params.t_end / params.t_start).powf(frac);
        let cell = window[rng.random_range(0..window.len())];
        let mv = if rng.random_bool(params.label_move_prob) {
            let new = labels[rng.random_range(0..labels.len())];
            if new == config.labels[cell] {
                continue;
            }
            Move::Label(cell, new)
        } else if t_cells.contains(&cell) {
            Move::Remove(cell)
        } else if tiling.neighbours4(cell).any(|q| t_cells.contains(&q)) {
            Move::Add(cell)
        } else {
            continue;
        };

        let (ok, delta, undo) = match mv {
            Move::Label(c, new) => {
                let old = config.labels[c];
                config.labels[c] = new;
                let undo = cert.refresh(&config, &mut reaches, c);
                let delta = theta_contribution(new, n).expect("finite move label")
                    - theta_contribution(old, n).ok_or(Error::InfiniteLabel(c))?;
                let ok = !(params.enforce_type_a && new.value(n) > threshold_a)
                    && !(params.enforce_type_b && is_type_b(&config, eps))
                    && cert.small_component_with(&config, &t_cells, &reaches);
                (ok, delta, Some((c, old, undo)))
            }
            Move::Add(c) => {
                t_cells.insert(c);
                (cert.small_component_with(&config, &t_cells, &reaches), 0.0, None)
            }
            Move::Remove(c) => {
                t_cells.remove(&c);
                (cert.small_component_with(&config, &t_cells, &reaches), 0.0, None)
            }
        };
        let accept = ok && (delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp());
        if accept {
            accepted += 1;
            current += delta;
            if current < best.0 - 1e-12 {
                best = (current, config.clone(), t_cells.clone());
            }
            continue;
        }
        match (mv, undo) {
            (Move::Label(..), Some((c, old, undo))) => {
                config.labels[c] = old;
                for (s, v) in undo {
                    reaches[s] = v;
                }
            }
            (Move::Add(c), _) => {
                t_cells.remove(&c);
            }
            (Move::Remove(c), _) => {
                t_cells.insert(c);
            }
            _ => unreachable!(),
        }
    }
    let (_, configuration, t_cells) = best;
    Ok(OptimizeResult { theta: theta(&configuration)?, configuration, t_cells, seed_theta, accepted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::{small_component_certificate, Tiling};

    fn quick(iterations: u64) -> SearchParams {
        SearchParams { iterations, ..SearchParams::default() }
    }

    #[test]
    fn zero_iterations_return_the_seed() {
        let t = tile(10, 8, 4096).unwrap();
        let (c, tc, _) = certified_disc_seed(&t).unwrap();
        let res = optimize_from(&c, &tc, 0.4, &quick(0), 1).unwrap();
        assert_eq!(res.configuration, c);
        assert_eq!(res.theta, res.seed_theta);
    }

    #[test]
    fn annealing_never_loses_to_the_seed() {
        let res = optimize_theta(10, 8, 4096, 0.4, &quick(3000), 7).unwrap();
        assert!(res.theta <= res.seed_theta + 1e-12);
        assert!(res.theta > 0.0);
        assert!(small_component_certificate(&res.configuration, &res.t_cells));
        assert!(!is_type_a_default(&res.configuration));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = SearchParams { restarts: 3, ..quick(500) };
        let a = optimize_theta(10, 8, 4096, 0.4, &p, 3).unwrap();
        let b = optimize_theta(10, 8, 4096, 0.4, &p, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forced_optimum() {
        // no cell outside T can ever reach k + 2 points around it, so the
        // search is confined to the four cells of ½S
        let t = Tiling::new(2, 2, 100).unwrap();
        let center = t.cell_id(1, 1);
        let mut c = Configuration::uniform(t, Label::EMPTY);
        c.labels[center] = Label::Finite(4);
        let tc: BTreeSet<CellId> = [center].into_iter().collect();
        let p = SearchParams { enforce_type_a: false, window_factor: 10.0, ..quick(5000) };
        let res = optimize_from(&c, &tc, 0.4, &p, 5).unwrap();
        // densities 1 and 1 + 1/N both cost nothing
        let inner = [(1, 1), (2, 1), (1, 2), (2, 2)].map(|(col, row)| t.cell_id(col, row));
        for (id, l) in res.configuration.labels.iter().enumerate() {
            if inner.contains(&id) {
                assert!(matches!(l, Label::Finite(2 | 3)), "cell {id}: {l}");
            } else {
                assert!(l.is_empty(), "cell {id}: {l}");
            }
        }
        assert!((res.theta - 3.0).abs() < 1e-12);
    }

    #[test]
    fn uncertified_seed_is_rejected() {
        let t = tile(4, 2, 16).unwrap();
        let c = Configuration::uniform(t, Label::Finite(2));
        let tc: BTreeSet<CellId> = [t.cell_id(3, 3)].into_iter().collect();
        assert!(matches!(optimize_from(&c, &tc, 0.4, &quick(10), 0), Err(Error::SeedNotCertified)));
    }
}
