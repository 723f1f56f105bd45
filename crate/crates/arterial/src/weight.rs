//! Path weights: integer lengths plus the random nuance vectors used for
//! deterministic tie-breaking.
//!
//! A path weight orders by length first, then by the component-wise nuance
//! sum lexicographically. Nuance components are summed in 128-bit integers so
//! that paths of up to `n` edges never overflow.

use std::cmp::Ordering;

/// Maximum number of nuance components supported per edge.
pub const MAX_NUANCE_COMPONENTS: usize = 4;

/// Per-edge nuance vector: `k` integers, each below the perturbation range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Nuance {
    pub components: [u64; MAX_NUANCE_COMPONENTS],
}

impl Nuance {
    pub const ZERO: Nuance = Nuance { components: [0; MAX_NUANCE_COMPONENTS] };

    pub fn new(components: [u64; MAX_NUANCE_COMPONENTS]) -> Self {
        Nuance { components }
    }
}

/// Total weight of a path: primary key `length`, secondary key the summed
/// nuance vector compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathWeight {
    pub length: u64,
    pub nuance_sum: [u128; MAX_NUANCE_COMPONENTS],
    pub k: u8,
}

impl PathWeight {
    pub fn zero(k: u8) -> Self {
        PathWeight { length: 0, nuance_sum: [0; MAX_NUANCE_COMPONENTS], k }
    }

    pub fn from_edge(length: u64, nuance: &Nuance, k: u8) -> Self {
        let mut sum = [0u128; MAX_NUANCE_COMPONENTS];
        for (s, &c) in sum.iter_mut().zip(nuance.components.iter()) {
            *s = c as u128;
        }
        PathWeight { length, nuance_sum: sum, k }
    }

    /// Weight of this path extended by one edge.
    pub fn plus_edge(&self, length: u64, nuance: &Nuance) -> Self {
        let mut out = *self;
        out.length += length;
        for (s, &c) in out.nuance_sum.iter_mut().zip(nuance.components.iter()) {
            *s += c as u128;
        }
        out
    }

    /// Concatenation of two path weights.
    pub fn plus(&self, other: &PathWeight) -> Self {
        debug_assert_eq!(self.k, other.k);
        let mut out = *self;
        out.length += other.length;
        for (s, o) in out.nuance_sum.iter_mut().zip(other.nuance_sum.iter()) {
            *s += o;
        }
        out
    }

    /// Removes a prefix (or suffix) weight; `None` when `part` is not
    /// componentwise within `self`.
    pub fn minus(&self, part: &PathWeight) -> Option<Self> {
        debug_assert_eq!(self.k, part.k);
        let mut out = *self;
        out.length = self.length.checked_sub(part.length)?;
        for (s, p) in out.nuance_sum.iter_mut().zip(part.nuance_sum.iter()) {
            *s = s.checked_sub(*p)?;
        }
        Some(out)
    }
}

impl PartialOrd for PathWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PathWeight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.length
            .cmp(&other.length)
            .then_with(|| self.nuance_sum.cmp(&other.nuance_sum))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WeightError {
    #[error("path weights built with different nuance dimensions: {0} vs {1}")]
    MismatchedK(u8, u8),
}

/// Strict comparison of two path weights from the same network.
///
/// Errors when the weights were built with different nuance dimensions.
/// When the weights tie exactly and node sequences are supplied, falls back
/// to lexicographic comparison of the node sequences so that callers can
/// impose a strict total order on concrete paths.
pub fn compare_path_weights(
    a: &PathWeight,
    b: &PathWeight,
    route_a: Option<&[u32]>,
    route_b: Option<&[u32]>,
) -> Result<Ordering, WeightError> {
    if a.k != b.k {
        return Err(WeightError::MismatchedK(a.k, b.k));
    }
    let ord = a.cmp(b);
    if ord != Ordering::Equal {
        return Ok(ord);
    }
    if let (Some(ra), Some(rb)) = (route_a, route_b) {
        return Ok(ra.cmp(rb));
    }
    Ok(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn length_dominates_nuance() {
        let a = PathWeight { length: 10, nuance_sum: [9, 9, 0, 0], k: 2 };
        let b = PathWeight { length: 11, nuance_sum: [0, 0, 0, 0], k: 2 };
        assert!(a < b);
    }

    #[test]
    fn equal_lengths_compare_nuance_lexicographically() {
        let a = PathWeight { length: 7, nuance_sum: [3, 7, 0, 0], k: 2 };
        let b = PathWeight { length: 7, nuance_sum: [3, 9, 0, 0], k: 2 };
        assert!(a < b);
        assert_eq!(compare_path_weights(&a, &b, None, None), Ok(Ordering::Less));
    }

    #[test]
    fn reflexive_equality() {
        let a = PathWeight { length: 7, nuance_sum: [3, 7, 0, 0], k: 2 };
        assert_eq!(compare_path_weights(&a, &a, None, None), Ok(Ordering::Equal));
    }

    #[test]
    fn mismatched_k_is_an_error() {
        let a = PathWeight::zero(1);
        let b = PathWeight::zero(2);
        assert_eq!(
            compare_path_weights(&a, &b, None, None),
            Err(WeightError::MismatchedK(1, 2))
        );
    }

    #[test]
    fn route_fallback_breaks_exact_ties() {
        let a = PathWeight { length: 7, nuance_sum: [3, 7, 0, 0], k: 2 };
        let ra = [0u32, 2, 3];
        let rb = [0u32, 4, 3];
        assert_eq!(
            compare_path_weights(&a, &a, Some(&ra), Some(&rb)),
            Ok(Ordering::Less)
        );
    }

    fn arb_weight() -> impl Strategy<Value = PathWeight> {
        (0u64..1000, proptest::array::uniform4(0u128..1000)).prop_map(|(l, ns)| PathWeight {
            length: l,
            nuance_sum: ns,
            k: 4,
        })
    }

    proptest! {
        // Strict weak order: antisymmetry and transitivity over random triples.
        #[test]
        fn ordering_is_consistent(a in arb_weight(), b in arb_weight(), c in arb_weight()) {
            use Ordering::*;
            prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
            if a.cmp(&b) != Greater && b.cmp(&c) != Greater {
                prop_assert_ne!(a.cmp(&c), Greater);
            }
        }

        // Additivity: the weight of a concatenation is the sum of the parts.
        #[test]
        fn concatenation_adds_componentwise(a in arb_weight(), b in arb_weight()) {
            let c = a.plus(&b);
            prop_assert_eq!(c.length, a.length + b.length);
            for i in 0..MAX_NUANCE_COMPONENTS {
                prop_assert_eq!(c.nuance_sum[i], a.nuance_sum[i] + b.nuance_sum[i]);
            }
        }
    }
}
