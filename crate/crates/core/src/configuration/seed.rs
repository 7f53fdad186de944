//! Discretised three-disc configuration: a dense core `T` around the origin,
//! an empty ring out to `3r` plus a margin, density one beyond.

use std::collections::BTreeSet;

use super::certificate::Certifier;
use super::{is_feasible, theta, CellId, Configuration, Label, Tiling};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscSeedParams {
    /// Extra empty ring beyond `3r`, in cells.
    pub margin: f64,
    /// Core label numerator `j` (density `j/N`).
    pub core: u32,
}

impl DiscSeedParams {
    /// One cell of margin and core density 2.
    pub fn standard(tiling: &Tiling) -> Self {
        DiscSeedParams { margin: 1.0, core: 2 * tiling.n }
    }
}

/// Builds the seed; `T` is every cell whose centre lies within
/// `r = √((k+1)/π)` of the origin (at least the cells touching it).
pub fn disc_seed(tiling: &Tiling, params: DiscSeedParams) -> (Configuration, BTreeSet<CellId>) {
    let ell = tiling.ell();
    let r = (f64::from(tiling.k + 1) / std::f64::consts::PI).sqrt() / ell;
    let core_radius = r.max(std::f64::consts::FRAC_1_SQRT_2 + 1e-9);
    let ring = 3.0 * r + params.margin;
    let mut config = Configuration::uniform(*tiling, Label::Finite(tiling.n));
    let mut t_cells = BTreeSet::new();
    for id in 0..tiling.cell_count() {
        let z = tiling.cell_center(id);
        let d = (z.x * z.x + z.y * z.y).sqrt() / ell;
        if d <= core_radius {
            config.labels[id] = Label::Finite(params.core);
            t_cells.insert(id);
        } else if d <= ring {
            config.labels[id] = Label::EMPTY;
        }
    }
    (config, t_cells)
}

/// Lowest-`θ` certified disc seed over feasible core labels in `[1, 2]` and
/// margins in half-cell steps.
pub fn certified_disc_seed(tiling: &Tiling) -> Result<(Configuration, BTreeSet<CellId>, DiscSeedParams)> {
    let cert = Certifier::new(*tiling);
    let n = tiling.n;
    let r = (f64::from(tiling.k + 1) / std::f64::consts::PI).sqrt() / tiling.ell();
    let max_margin = 3.0 * r + 8.0;
    let mut best: Option<(f64, Configuration, BTreeSet<CellId>, DiscSeedParams)> = None;
    for core in n..=2 * n {
        if !is_feasible(Label::Finite(core), tiling.k, n) {
            continue;
        }
        let mut margin = 0.0;
        while margin <= max_margin {
            let params = DiscSeedParams { margin, core };
            let (config, t_cells) = disc_seed(tiling, params);
            if cert.small_component(&config, &t_cells) {
                let th = theta(&config)?;
                if best.as_ref().is_none_or(|b| th < b.0) {
                    best = Some((th, config, t_cells, params));
                }
                break;
            }
            margin += 0.5;
        }
    }
    best.map(|(_, c, t, p)| (c, t, p)).ok_or(Error::SeedNotCertified)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::{small_component_certificate, tile};

    #[test]
    fn seed_shape() {
        let t = tile(10, 8, 64).unwrap();
        let (c, tc) = disc_seed(&t, DiscSeedParams::standard(&t));
        assert!(!tc.is_empty());
        assert!(tc.iter().all(|&id| c.labels[id] == Label::Finite(16)));
        let empty = c.labels.iter().filter(|l| l.is_empty()).count();
        // ring between r and 3r + 1 cells: about π((3r+1)² - r²)
        let r = 65f64.sqrt() / std::f64::consts::PI.sqrt();
        let expect = std::f64::consts::PI * ((3.0 * r + 1.0).powi(2) - r * r);
        assert!((empty as f64 - expect).abs() < 0.1 * expect, "{empty} vs {expect}");
    }

    #[test]
    fn standard_seeds_are_certified() {
        for (m, n, k) in [(8, 4, 64), (10, 8, 64), (8, 8, 64), (10, 8, 4096)] {
            let t = tile(m, n, k).unwrap();
            let (c, tc) = disc_seed(&t, DiscSeedParams::standard(&t));
            assert!(small_component_certificate(&c, &tc), "M={m} N={n} k={k}");
        }
    }

    #[test]
    fn standard_seed_theta_decreases_with_n() {
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16] {
            let t = tile(10, n, 64).unwrap();
            let (c, _) = disc_seed(&t, DiscSeedParams::standard(&t));
            let th = theta(&c).unwrap();
            assert!(th <= prev && th > 8.0, "N={n}: {th}");
            prev = th;
        }
    }

    #[test]
    fn certified_search_beats_the_standard_seed() {
        let t = tile(10, 8, 4096).unwrap();
        let (c, tc, p) = certified_disc_seed(&t).unwrap();
        assert!(small_component_certificate(&c, &tc));
        let (std_c, _) = disc_seed(&t, DiscSeedParams::standard(&t));
        assert!(theta(&c).unwrap() <= theta(&std_c).unwrap() + 1e-12, "{p:?}");
    }

    #[test]
    fn coarse_tilings_need_a_wider_ring() {
        let t = tile(8, 4, 256).unwrap();
        let (c, tc) = disc_seed(&t, DiscSeedParams::standard(&t));
        assert!(!small_component_certificate(&c, &tc));
        let (c, tc, p) = certified_disc_seed(&t).unwrap();
        assert!(p.margin > 1.0);
        assert!(small_component_certificate(&c, &tc));
    }

    #[test]
    fn uncertifiable_tiling_is_reported() {
        // S too small to hold the empty ring
        let t = tile(1, 2, 16).unwrap();
        assert!(matches!(certified_disc_seed(&t), Err(Error::SeedNotCertified)));
    }
}
