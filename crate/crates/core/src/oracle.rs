//! The myopic next-request oracle.
//!
//! Algorithms in this crate never see absolute future times, only the
//! relative order of next requests within a weight class. [`NextKey`] is the
//! comparison key realising that order: pages that are never requested again
//! compare greater than all requested ones and among themselves by universe
//! index.

use crate::trace::RequestTrace;

/// Comparison key for "when is this page requested next".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NextKey {
    At(usize),
    /// Never requested again; the payload is the page index used as a
    /// deterministic tie break.
    Never(usize),
}

/// Next-occurrence oracle over a single page sequence.
#[derive(Debug, Clone)]
pub struct SeqOracle {
    occ: Vec<Vec<usize>>,
}

impl SeqOracle {
    pub fn new(seq: &[usize], n_pages: usize) -> Self {
        let mut occ = vec![Vec::new(); n_pages];
        for (t, &p) in seq.iter().enumerate() {
            occ[p].push(t);
        }
        Self { occ }
    }

    pub fn n_pages(&self) -> usize {
        self.occ.len()
    }

    /// First occurrence of `page` at time `t` or later.
    pub fn next_at_or_after(&self, page: usize, t: usize) -> NextKey {
        let occs = &self.occ[page];
        match occs.partition_point(|&u| u < t) {
            i if i < occs.len() => NextKey::At(occs[i]),
            _ => NextKey::Never(page),
        }
    }

    /// First occurrence strictly after `t`.
    pub fn next_after(&self, page: usize, t: usize) -> NextKey {
        self.next_at_or_after(page, t + 1)
    }

    /// Pages sorted by next request at or after `t` (position 0 is requested
    /// soonest). This is the next-request ranking used by the potentials.
    pub fn rank_order(&self, t: usize) -> Vec<usize> {
        let mut pages: Vec<usize> = (0..self.occ.len()).collect();
        pages.sort_by_key(|&p| self.next_at_or_after(p, t));
        pages
    }
}

/// Per-class myopic oracle over a full trace (global request times).
#[derive(Debug, Clone)]
pub struct MyopicOracle {
    per_class: Vec<SeqOracle>,
}

impl MyopicOracle {
    pub fn new(trace: &RequestTrace) -> Self {
        let per_class = (0..trace.num_classes())
            .map(|c| {
                let mut occ = vec![Vec::new(); trace.pages_in_class(c)];
                for (t, r) in trace.requests.iter().enumerate() {
                    if r.class == c {
                        occ[r.page].push(t);
                    }
                }
                SeqOracle { occ }
            })
            .collect();
        Self { per_class }
    }

    pub fn class(&self, class: usize) -> &SeqOracle {
        &self.per_class[class]
    }

    pub fn next_after(&self, class: usize, page: usize, t: usize) -> NextKey {
        self.per_class[class].next_after(page, t)
    }

    /// Strict total order on same-class pages by next request after `t`.
    pub fn cmp_within_class(&self, class: usize, p: usize, q: usize, t: usize) -> std::cmp::Ordering {
        self.per_class[class]
            .next_after(p, t)
            .cmp(&self.per_class[class].next_after(q, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn never_pages_compare_after_requested_ones() {
        let seq = vec![0, 1, 0];
        let o = SeqOracle::new(&seq, 3);
        assert_eq!(o.next_after(0, 0), NextKey::At(2));
        assert_eq!(o.next_after(1, 1), NextKey::Never(1));
        assert!(o.next_after(1, 1) > o.next_after(0, 0));
        assert!(NextKey::Never(1) < NextKey::Never(2));
    }

    #[test]
    fn rank_order_puts_current_request_first() {
        let seq = vec![2, 0, 1, 2];
        let o = SeqOracle::new(&seq, 3);
        assert_eq!(o.rank_order(0), vec![2, 0, 1]);
        assert_eq!(o.rank_order(3), vec![2, 0, 1]);
    }

    #[test]
    fn comparisons_depend_only_on_next_occurrence_order() {
        // Mutating the suffix while preserving each page's next occurrence
        // leaves all time-t comparisons unchanged.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 5;
            let len = 20;
            let seq: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
            let t = rng.random_range(0..len - 1);
            let o1 = SeqOracle::new(&seq, n);
            // every position past the last first-occurrence-after-t is a
            // duplicate; rewriting those with already-seen pages preserves
            // each page's next occurrence at time t
            let mut mutated = seq.clone();
            let mut seen = vec![false; n];
            let mut tail_start = len;
            for (u, &p) in seq.iter().enumerate().skip(t + 1) {
                if !seen[p] {
                    seen[p] = true;
                    tail_start = u + 1;
                }
            }
            if tail_start < len {
                let seen_pages: Vec<usize> = (0..n).filter(|&p| seen[p]).collect();
                if !seen_pages.is_empty() {
                    for u in tail_start..len {
                        mutated[u] = seen_pages[rng.random_range(0..seen_pages.len())];
                    }
                }
            }
            let o2 = SeqOracle::new(&mutated, n);
            for p in 0..n {
                for q in 0..n {
                    assert_eq!(
                        o1.next_after(p, t).cmp(&o1.next_after(q, t)),
                        o2.next_after(p, t).cmp(&o2.next_after(q, t)),
                        "seq={seq:?} mutated={mutated:?} t={t} p={p} q={q}"
                    );
                }
            }
        }
    }
}
