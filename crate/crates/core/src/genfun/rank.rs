use std::cmp::Ordering;
use std::ops::Range;

use crate::num::Scalar;

/// Weights sorted in descending order together with the rank bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedWeights<T> {
    /// `x_(1) >= x_(2) >= ... >= x_(d)`.
    pub sorted: Vec<T>,
    /// `perm[i]` is the (0-based) rank of asset `i`.
    pub perm: Vec<usize>,
    /// `order[r]` is the asset holding rank `r`.
    pub order: Vec<usize>,
    /// `counts[r] = N_r(x)`, the number of components equal to `x_(r)`.
    pub counts: Vec<usize>,
}

impl<T: Scalar> RankedWeights<T> {
    /// Rank ranges of equal values, in rank order.
    pub fn tie_groups(&self) -> Vec<Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        while start < self.sorted.len() {
            let end = start + self.counts[start];
            groups.push(start..end);
            start = end;
        }
        groups
    }
}

/// Sorts `x` descending; ties keep ascending original index.
pub fn rank_weights<T: Scalar>(x: &[T]) -> RankedWeights<T> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap_or(Ordering::Equal));
    let sorted: Vec<T> = order.iter().map(|&i| x[i]).collect();
    let mut perm = vec![0; x.len()];
    for (r, &i) in order.iter().enumerate() {
        perm[i] = r;
    }
    let mut counts = vec![0; x.len()];
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        counts[start..end].fill(end - start);
        start = end;
    }
    RankedWeights { sorted, perm, order, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorts_descending() {
        let r = rank_weights(&[0.2, 0.5, 0.3]);
        assert_eq!(r.sorted, vec![0.5, 0.3, 0.2]);
        // asset 2 (1-based) holds rank 1
        assert_eq!(r.perm[1], 0);
        assert_eq!(r.order, vec![1, 2, 0]);
        assert_eq!(r.counts, vec![1, 1, 1]);
    }

    #[test]
    fn tie_counts() {
        let r = rank_weights(&[0.4, 0.4, 0.2]);
        assert_eq!(r.sorted, vec![0.4, 0.4, 0.2]);
        assert_eq!(r.counts, vec![2, 2, 1]);
        assert_eq!(r.perm, vec![0, 1, 2]);
        assert_eq!(r.tie_groups(), vec![0..2, 2..3]);
    }

    #[test]
    fn identity_on_sorted_input() {
        let r = rank_weights(&[0.5, 0.3, 0.15, 0.05]);
        assert_eq!(r.perm, vec![0, 1, 2, 3]);
        assert!(r.counts.iter().all(|&c| c == 1));
    }

    proptest! {
        #[test]
        fn ranking_is_a_permutation(x in proptest::collection::vec(0.0f64..1.0, 1..30)) {
            let r = rank_weights(&x);
            let mut a = x.clone();
            let mut b = r.sorted.clone();
            a.sort_by(|p, q| p.partial_cmp(q).unwrap());
            b.sort_by(|p, q| p.partial_cmp(q).unwrap());
            prop_assert_eq!(a, b);
            for (i, &rank) in r.perm.iter().enumerate() {
                prop_assert_eq!(r.sorted[rank], x[i]);
                prop_assert_eq!(r.order[rank], i);
            }
            prop_assert!(r.sorted.windows(2).all(|w| w[0] >= w[1]));
            let again = rank_weights(&r.sorted);
            prop_assert_eq!(&again.sorted, &r.sorted);
            for (l, &n) in r.counts.iter().enumerate() {
                prop_assert_eq!(n, x.iter().filter(|&&v| v == r.sorted[l]).count());
            }
        }
    }
}
