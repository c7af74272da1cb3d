//! Frontier expansion of the connected moving region around the attention
//! point. The attention pixel seeds the frontier unconditionally; every
//! other member must carry flow magnitude above the threshold. A region
//! that never grows past the seed is cleared to empty.

use crate::coords::Pixel;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::stream::FlowField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Default for Connectivity {
    fn default() -> Self {
        Connectivity::Four
    }
}

/// The connected moving region containing the attention point.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingRegion {
    w: u32,
    h: u32,
    /// Canonical row-major order, independent of expansion order.
    coords: Vec<Pixel>,
    membership: Vec<bool>,
    pub contains_attention: bool,
}

impl MovingRegion {
    pub fn empty(w: u32, h: u32) -> Self {
        MovingRegion {
            w,
            h,
            coords: Vec::new(),
            membership: vec![false; (w * h) as usize],
            contains_attention: false,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Pixel] {
        &self.coords
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.in_bounds(self.w, self.h) && self.membership[p.ravel(self.w)]
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.w, self.h)
    }
}

/// Expands from `a_t` over neighbors with `||v|| > gamma`. Returns the empty
/// region when nothing beyond the seed qualifies.
pub fn segment_moving_region<T: Real>(
    flow: &FlowField<T>,
    a_t: Pixel,
    gamma: T,
    connectivity: Connectivity,
) -> Result<MovingRegion> {
    let (w, h) = (flow.w, flow.h);
    a_t.checked(w, h)?;
    if gamma <= T::zero() {
        return Err(Error::invalid("gamma must be > 0"));
    }

    let mut member = vec![false; (w * h) as usize];
    member[a_t.ravel(w)] = true;
    let mut frontier = vec![a_t];
    let mut count = 1usize;
    while let Some(p) = frontier.pop() {
        let push = |q: Pixel, member: &mut Vec<bool>, frontier: &mut Vec<Pixel>, count: &mut usize| {
            let idx = q.ravel(w);
            if !member[idx] && flow.magnitude(q) > gamma {
                member[idx] = true;
                *count += 1;
                frontier.push(q);
            }
        };
        match connectivity {
            Connectivity::Four => {
                for q in p.neighbors4(w, h) {
                    push(q, &mut member, &mut frontier, &mut count);
                }
            }
            Connectivity::Eight => {
                for q in p.neighbors8(w, h) {
                    push(q, &mut member, &mut frontier, &mut count);
                }
            }
        }
    }

    if count == 1 {
        return Ok(MovingRegion::empty(w, h));
    }

    let mut coords = Vec::with_capacity(count);
    for (idx, &m) in member.iter().enumerate() {
        if m {
            coords.push(Pixel::unravel(idx, w));
        }
    }
    Ok(MovingRegion { w, h, coords, membership: member, contains_attention: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flow_from_magnitudes(w: u32, h: u32, mags: &[f64]) -> FlowField<f64> {
        let mut f = FlowField::zeros(w, h);
        for (idx, &m) in mags.iter().enumerate() {
            f.set(Pixel::unravel(idx, w), (m, 0.0));
        }
        f
    }

    /// Brute-force oracle: threshold every pixel (treating the attention
    /// pixel as moving), label connected components, take the one holding
    /// the attention point, then apply the |S|=1 clearing rule.
    pub(crate) fn oracle(flow: &FlowField<f64>, a_t: Pixel, gamma: f64, conn: Connectivity) -> Vec<Pixel> {
        let (w, h) = (flow.w, flow.h);
        let moving = |p: Pixel| p == a_t || flow.magnitude(p) > gamma;
        let mut label = vec![0usize; (w * h) as usize];
        let mut next = 0usize;
        for y in 1..=h {
            for x in 1..=w {
                let p = Pixel::new(x, y);
                if !moving(p) || label[p.ravel(w)] != 0 {
                    continue;
                }
                next += 1;
                let mut stack = vec![p];
                label[p.ravel(w)] = next;
                while let Some(q) = stack.pop() {
                    let neigh: Vec<Pixel> = match conn {
                        Connectivity::Four => q.neighbors4(w, h).collect(),
                        Connectivity::Eight => q.neighbors8(w, h).collect(),
                    };
                    for r in neigh {
                        if moving(r) && label[r.ravel(w)] == 0 {
                            label[r.ravel(w)] = next;
                            stack.push(r);
                        }
                    }
                }
            }
        }
        let target = label[a_t.ravel(w)];
        let mut coords: Vec<Pixel> = (0..(w * h) as usize)
            .filter(|&i| label[i] == target)
            .map(|i| Pixel::unravel(i, w))
            .collect();
        if coords.len() == 1 {
            coords.clear();
        }
        coords.sort();
        coords
    }

    #[test]
    fn zero_flow_clears_to_empty() {
        let flow = FlowField::<f64>::zeros(8, 8);
        let region = segment_moving_region(&flow, Pixel::new(4, 4), 0.1, Connectivity::Four).unwrap();
        assert!(region.is_empty());
        assert!(!region.contains_attention);
    }

    #[test]
    fn block_region_is_recovered_exactly() {
        let gamma = 0.5;
        let mut mags = vec![0.0; 64];
        for y in 3..=5u32 {
            for x in 3..=5u32 {
                mags[Pixel::new(x, y).ravel(8)] = 2.0 * gamma;
            }
        }
        let flow = flow_from_magnitudes(8, 8, &mags);
        let region = segment_moving_region(&flow, Pixel::new(4, 4), gamma, Connectivity::Four).unwrap();
        assert_eq!(region.len(), 9);
        assert_eq!(region.coords(), &oracle(&flow, Pixel::new(4, 4), gamma, Connectivity::Four)[..]);
    }

    #[test]
    fn only_the_attended_blob_is_kept() {
        let gamma = 0.1;
        let mut mags = vec![0.0; 100];
        for x in 1..=3u32 {
            for y in 1..=3u32 {
                mags[Pixel::new(x, y).ravel(10)] = 1.0;
            }
        }
        for x in 7..=9u32 {
            for y in 7..=9u32 {
                mags[Pixel::new(x, y).ravel(10)] = 1.0;
            }
        }
        let flow = flow_from_magnitudes(10, 10, &mags);
        let region = segment_moving_region(&flow, Pixel::new(2, 2), gamma, Connectivity::Four).unwrap();
        assert_eq!(region.len(), 9);
        assert!(region.contains(Pixel::new(3, 3)));
        assert!(!region.contains(Pixel::new(8, 8)));
    }

    #[test]
    fn out_of_bounds_attention_is_rejected() {
        let flow = FlowField::<f64>::zeros(8, 8);
        assert!(segment_moving_region(&flow, Pixel::new(9, 1), 0.1, Connectivity::Four).is_err());
        assert!(segment_moving_region(&flow, Pixel::new(0, 1), 0.1, Connectivity::Four).is_err());
    }

    #[test]
    fn matches_oracle_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..60 {
            let (w, h) = (24u32, 24u32);
            let density = rng.random_range(0.2..0.7);
            let mut flow = FlowField::zeros(w, h);
            for idx in 0..(w * h) as usize {
                if rng.random_bool(density) {
                    flow.set(
                        Pixel::unravel(idx, w),
                        (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    );
                }
            }
            let a_t = Pixel::new(rng.random_range(1..=w), rng.random_range(1..=h));
            let gamma = rng.random_range(0.05..1.0);
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let region = segment_moving_region(&flow, a_t, gamma, conn).unwrap();
                let expect = oracle(&flow, a_t, gamma, conn);
                assert_eq!(region.coords(), &expect[..], "case {case}");
            }
        }
    }

    #[test]
    fn threshold_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let (w, h) = (16u32, 16u32);
            let mut flow = FlowField::zeros(w, h);
            for idx in 0..(w * h) as usize {
                if rng.random_bool(0.5) {
                    flow.set(Pixel::unravel(idx, w), (rng.random_range(0.0..2.0), 0.0));
                }
            }
            let a_t = Pixel::new(rng.random_range(1..=w), rng.random_range(1..=h));
            let g1 = rng.random_range(0.05..0.8);
            let g2 = g1 + rng.random_range(0.0..0.8);
            let r1 = segment_moving_region(&flow, a_t, g1, Connectivity::Four).unwrap();
            let r2 = segment_moving_region(&flow, a_t, g2, Connectivity::Four).unwrap();
            if !r1.is_empty() && !r2.is_empty() {
                for p in r2.coords() {
                    assert!(r1.contains(*p), "S(gamma2) must be inside S(gamma1)");
                }
            }
        }
    }
}
