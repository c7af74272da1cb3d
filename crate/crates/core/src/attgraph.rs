//! Stochastic spatial attention graph: a budgeted subsample of the moving
//! region (positive edges among its nodes) and a Gaussian halo of
//! out-of-region nodes (negative edges to the in-region nodes).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::coords::Pixel;
use crate::error::{Error, Result};
use crate::motionseg::MovingRegion;

/// Node budget for a target edge count `e` per edge type:
/// `s = floor((1 + sqrt(1 + 8e)) / 2)` in-region nodes and `o = ceil(e / s)`
/// out-region nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphBudget {
    pub edges: u64,
    pub inside: u64,
    pub outside: u64,
}

/// Exact integer floor of sqrt(n).
fn isqrt(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u64;
    // One fix-up pass each way covers float rounding at the boundary.
    while x.saturating_mul(x) > n {
        x -= 1;
    }
    while (x + 1).saturating_mul(x + 1) <= n {
        x += 1;
    }
    x
}

pub fn node_budget(e: u64) -> Result<GraphBudget> {
    if e < 1 {
        return Err(Error::invalid("edge budget e must be >= 1"));
    }
    let s = (1 + isqrt(1 + 8 * e)) / 2;
    let o = e.div_ceil(s);
    debug_assert!(s * (s - 1) / 2 <= e && (s + 1) * s / 2 > e);
    Ok(GraphBudget { edges: e, inside: s, outside: o })
}

/// Sampled graph: `inside` always starts with the attention point; positive
/// edges are all unordered pairs within `inside`, negative edges are
/// `inside x outside`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticGraph {
    pub inside: Vec<Pixel>,
    pub outside: Vec<Pixel>,
    /// Set when Gaussian sampling ran out of rounds before filling the
    /// outside budget.
    pub outside_budget_unmet: bool,
}

impl StochasticGraph {
    pub fn positive_edge_count(&self) -> usize {
        self.inside.len() * (self.inside.len() - 1) / 2
    }

    pub fn negative_edge_count(&self) -> usize {
        self.inside.len() * self.outside.len()
    }
}

/// Samples the stochastic graph for one frame.
///
/// In-region nodes: the attention pixel plus a uniform without-replacement
/// sample of the rest of the region. Out-region nodes: pixel-rounded draws
/// from an axis-independent Gaussian centered on the attention point with
/// standard deviation `beta * sqrt(|S_t|)`, rejecting draws that fall
/// outside the frame, inside the region, or on an already-sampled pixel.
/// At most `max_rounds` draws are spent; an unmet budget is flagged, not an
/// error. Returns `None` for an empty region (no graph, losses skipped).
pub fn sample_graph<R: Rng>(
    region: &MovingRegion,
    a_t: Pixel,
    budget: GraphBudget,
    beta: u32,
    rng: &mut R,
    max_rounds: usize,
) -> Result<Option<StochasticGraph>> {
    if region.is_empty() {
        return Ok(None);
    }
    if beta < 1 {
        return Err(Error::invalid("spread factor beta must be >= 1"));
    }
    if !region.contains(a_t) {
        return Err(Error::invalid(format!(
            "attention pixel ({}, {}) is not in the moving region",
            a_t.x, a_t.y
        )));
    }
    let (w, h) = region.dims();

    // Uniform without replacement over the region minus the attention pixel.
    let pool: Vec<Pixel> = region.coords().iter().copied().filter(|&p| p != a_t).collect();
    let take = (budget.inside as usize - 1).min(pool.len());
    let mut inside = Vec::with_capacity(take + 1);
    inside.push(a_t);
    for idx in rand::seq::index::sample(rng, pool.len(), take) {
        inside.push(pool[idx]);
    }

    let sigma = beta as f64 * (region.len() as f64).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("gaussian: {e}")))?;
    let target = budget.outside as usize;
    let mut outside = Vec::with_capacity(target);
    let mut seen = vec![false; (w * h) as usize];
    let mut rounds = 0usize;
    while outside.len() < target && rounds < max_rounds {
        rounds += 1;
        let dx: f64 = normal.sample(rng);
        let dy: f64 = normal.sample(rng);
        let x = (a_t.x as f64 + dx).round();
        let y = (a_t.y as f64 + dy).round();
        if x < 1.0 || x > w as f64 || y < 1.0 || y > h as f64 {
            continue;
        }
        let p = Pixel::new(x as u32, y as u32);
        if region.contains(p) || seen[p.ravel(w)] {
            continue;
        }
        seen[p.ravel(w)] = true;
        outside.push(p);
    }

    Ok(Some(StochasticGraph {
        outside_budget_unmet: outside.len() < target,
        inside,
        outside,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motionseg::{segment_moving_region, Connectivity};
    use crate::stream::FlowField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force budget oracle: the largest s with s(s-1)/2 <= e.
    fn budget_oracle(e: u64) -> (u64, u64) {
        let mut s = 1u64;
        while (s + 1) * s / 2 <= e {
            s += 1;
        }
        (s, e.div_ceil(s))
    }

    #[test]
    fn budget_matches_oracle_on_key_values() {
        for e in [1u64, 10, 1000, 5000, 20000, 30000] {
            let b = node_budget(e).unwrap();
            let (s, o) = budget_oracle(e);
            assert_eq!((b.inside, b.outside), (s, o), "e = {e}");
        }
        let b = node_budget(20000).unwrap();
        assert_eq!((b.inside, b.outside), (200, 100));
        let b = node_budget(1000).unwrap();
        assert_eq!((b.inside, b.outside), (45, 23));
        let b = node_budget(1).unwrap();
        assert_eq!((b.inside, b.outside), (2, 1));
    }

    #[test]
    fn budget_invariant_over_a_sweep() {
        for e in (1..5000u64).step_by(7) {
            let b = node_budget(e).unwrap();
            let s = b.inside;
            assert!(s * (s - 1) / 2 <= e);
            assert!((s + 1) * s / 2 > e);
            assert_eq!(b.outside, e.div_ceil(s));
        }
    }

    #[test]
    fn rejects_zero_budget() {
        assert!(node_budget(0).is_err());
    }

    fn block_region(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> (MovingRegion, Pixel) {
        let mut flow = FlowField::<f64>::zeros(w, h);
        for y in y0..=y1 {
            for x in x0..=x1 {
                flow.set(Pixel::new(x, y), (1.0, 0.0));
            }
        }
        let a_t = Pixel::new(x0, y0);
        let region = segment_moving_region(&flow, a_t, 0.1, Connectivity::Four).unwrap();
        (region, a_t)
    }

    #[test]
    fn small_region_saturates_inside() {
        let (region, a_t) = block_region(16, 16, 5, 5, 7, 5); // 3 pixels
        let budget = node_budget(1000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_graph(&region, a_t, budget, 1, &mut rng, 1000).unwrap().unwrap();
        let mut inside = g.inside.clone();
        inside.sort();
        assert_eq!(inside, region.coords());
    }

    #[test]
    fn graph_invariants_hold_on_seeded_runs() {
        let (region, a_t) = block_region(32, 32, 4, 4, 14, 12);
        let budget = node_budget(200).unwrap();
        for seed in 0..25u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = sample_graph(&region, a_t, budget, 2, &mut rng, 20 * budget.outside as usize)
                .unwrap()
                .unwrap();
            assert_eq!(g.inside[0], a_t);
            assert_eq!(g.positive_edge_count(), g.inside.len() * (g.inside.len() - 1) / 2);
            assert_eq!(g.negative_edge_count(), g.inside.len() * g.outside.len());
            // Duplicate-free and disjoint.
            let mut all = g.inside.clone();
            all.extend(&g.outside);
            let total = all.len();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), total);
            for p in &g.inside {
                assert!(region.contains(*p));
            }
            for p in &g.outside {
                assert!(!region.contains(*p));
            }
        }
    }

    #[test]
    fn equal_seeds_reproduce_the_graph() {
        let (region, a_t) = block_region(24, 24, 3, 3, 12, 10);
        let budget = node_budget(500).unwrap();
        let sample = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_graph(&region, a_t, budget, 1, &mut rng, 2000).unwrap().unwrap()
        };
        assert_eq!(sample(77), sample(77));
        assert_ne!(sample(77), sample(78));
    }

    #[test]
    fn exhausted_rounds_set_the_flag() {
        let (region, a_t) = block_region(8, 8, 2, 2, 6, 6);
        let budget = node_budget(5000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_graph(&region, a_t, budget, 1, &mut rng, 3).unwrap().unwrap();
        assert!(g.outside.len() < budget.outside as usize);
        assert!(g.outside_budget_unmet);
    }

    #[test]
    fn empty_region_yields_no_graph() {
        let region = MovingRegion::empty(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_graph(&region, Pixel::new(4, 4), node_budget(10).unwrap(), 1, &mut rng, 10).unwrap();
        assert!(g.is_none());
    }

    #[test]
    fn larger_spread_pushes_outside_samples_farther() {
        // Monte-Carlo check: the mean distance from outside samples to the
        // region grows with beta.
        let (region, a_t) = block_region(64, 64, 28, 28, 36, 36);
        let budget = node_budget(300).unwrap();
        let mean_distance = |beta: u32| {
            let mut total = 0.0f64;
            let mut count = 0usize;
            for seed in 0..1000u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = sample_graph(&region, a_t, budget, beta, &mut rng, 5000).unwrap().unwrap();
                for p in &g.outside {
                    let mut best = f64::INFINITY;
                    for q in region.coords() {
                        let d = ((p.x as f64 - q.x as f64).powi(2) + (p.y as f64 - q.y as f64).powi(2)).sqrt();
                        if d < best {
                            best = d;
                        }
                    }
                    total += best;
                    count += 1;
                }
            }
            total / count as f64
        };
        let near = mean_distance(1);
        let far = mean_distance(5);
        assert!(far > near, "beta=5 mean distance {far} should exceed beta=1 {near}");
    }
}
