//! Farthest-in-future simulation, the induced page ranking, and the exact
//! step-by-step potential monitor for FiF optimality.
//!
//! Everything in this module works on a single page sequence (an unweighted
//! trace or the subsequence of one weight class). Pages are universe indices
//! `0..n`; the universe order doubles as the initial configuration: the
//! cache of size `m` starts as the first `m` universe pages when rankings
//! are involved, or empty when costs are measured.

use std::collections::BTreeSet;

use crate::error::Error;
use crate::oracle::{NextKey, SeqOracle};
use crate::Result;

/// Initial cache contents for a FiF run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCache {
    /// Start cold; the first `m` faults fill the cache.
    Empty,
    /// Start with the first `m` universe pages (used by ranking machinery,
    /// which needs full nested configurations at time zero).
    UniversePrefix,
}

/// Result of one FiF simulation.
#[derive(Debug, Clone)]
pub struct FifRun {
    /// Post-service cache contents at every time step.
    pub states: Vec<BTreeSet<usize>>,
    pub faults: usize,
    pub evictions: usize,
}

/// Simulate FiF with cache size `m` on `seq` over `n_pages` pages.
///
/// On a fault with a full cache the cached page whose next request is
/// farthest away is evicted; pages never requested again count as farthest
/// and tie-break by universe index.
pub fn simulate_fif(seq: &[usize], n_pages: usize, m: usize, initial: InitialCache) -> FifRun {
    assert!(m >= 1, "cache size must be at least 1");
    let oracle = SeqOracle::new(seq, n_pages);
    let mut cache: BTreeSet<usize> = match initial {
        InitialCache::Empty => BTreeSet::new(),
        InitialCache::UniversePrefix => (0..m.min(n_pages)).collect(),
    };
    let mut states = Vec::with_capacity(seq.len());
    let mut faults = 0;
    let mut evictions = 0;
    for (t, &p) in seq.iter().enumerate() {
        if !cache.contains(&p) {
            faults += 1;
            if cache.len() == m {
                let victim = *cache
                    .iter()
                    .max_by_key(|&&q| oracle.next_after(q, t))
                    .expect("cache is non-empty");
                cache.remove(&victim);
                evictions += 1;
            }
            cache.insert(p);
        }
        states.push(cache.clone());
    }
    FifRun { states, faults, evictions }
}

/// The ranking of all pages of one class induced by running FiF at every
/// cache size simultaneously: position `m` holds the unique page of
/// `C^m \ C^{m-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeladyRanking {
    /// `order[i]` is the page at position `i + 1`.
    order: Vec<usize>,
    /// `pos[page]` is the 0-based position of `page`.
    pos: Vec<usize>,
}

impl BeladyRanking {
    /// Initial ranking = universe order.
    pub fn new(n_pages: usize) -> Self {
        Self { order: (0..n_pages).collect(), pos: (0..n_pages).collect() }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 1-based position of `page`.
    pub fn position_of(&self, page: usize) -> usize {
        self.pos[page] + 1
    }

    pub fn page_at(&self, position: usize) -> usize {
        self.order[position - 1]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Apply a request to `page` at (sequence-local) time `t`.
    ///
    /// Computes the chain `m_0 > m_1 > ... > m_b = 1` where `m_{a+1}` is the
    /// position of the page requested farthest in the future among positions
    /// `1..m_a - 1`; the requested page moves to position 1 and the page at
    /// `m_a` moves to `m_{a-1}`. Returns the chain (1-based, including
    /// `m_0`).
    pub fn update(&mut self, page: usize, t: usize, oracle: &SeqOracle) -> Result<Vec<usize>> {
        if page >= self.pos.len() {
            return Err(Error::InvalidArgument(format!("page {page} not in ranking")));
        }
        let m0 = self.pos[page] + 1;
        if m0 == 1 {
            return Ok(vec![1]);
        }
        // The chain positions are exactly the left-to-right prefix maxima of
        // the next-request keys over positions 1..m0-1, read right to left.
        let mut chain_rev: Vec<usize> = Vec::new();
        let mut best: Option<NextKey> = None;
        for i in 0..m0 - 1 {
            let key = oracle.next_after(self.order[i], t);
            if best.is_none_or(|b| key > b) {
                best = Some(key);
                chain_rev.push(i + 1);
            }
        }
        // chain_rev is increasing and starts at 1; the lemma's chain is m0
        // followed by chain_rev reversed.
        let mut chain = Vec::with_capacity(chain_rev.len() + 1);
        chain.push(m0);
        chain.extend(chain_rev.iter().rev());
        // page at m_a moves to position m_{a-1}; requested page to position 1
        for a in 1..chain.len() {
            let from = chain[a] - 1;
            let to = chain[a - 1] - 1;
            let moved = self.order[from];
            self.order[to] = moved;
            self.pos[moved] = to;
        }
        self.order[0] = page;
        self.pos[page] = 0;
        Ok(chain)
    }
}

/// Outcome of simultaneous nested-FiF verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestingReport {
    /// `(t, m)` of the first containment or ranking violation, if any.
    pub violation: Option<(usize, usize)>,
}

impl NestingReport {
    pub fn ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// Simulate `FiF^m` for every `m = 1..=n` from nested initial
/// configurations, confirm `C^{m-1}_t` is contained in `C^m_t` at every step
/// and that the incrementally maintained [`BeladyRanking`] reproduces every
/// nested difference.
pub fn verify_nesting(seq: &[usize], n_pages: usize) -> NestingReport {
    if n_pages == 0 {
        return NestingReport { violation: None };
    }
    let runs: Vec<FifRun> = (1..=n_pages)
        .map(|m| simulate_fif(seq, n_pages, m, InitialCache::UniversePrefix))
        .collect();
    let oracle = SeqOracle::new(seq, n_pages);
    let mut ranking = BeladyRanking::new(n_pages);
    for t in 0..seq.len() {
        if ranking.update(seq[t], t, &oracle).is_err() {
            return NestingReport { violation: Some((t, 0)) };
        }
        let mut prev: &BTreeSet<usize> = &BTreeSet::new();
        for m in 1..=n_pages {
            let cur = &runs[m - 1].states[t];
            if !prev.is_subset(cur) {
                return NestingReport { violation: Some((t, m)) };
            }
            let prefix: BTreeSet<usize> = ranking.order()[..m].iter().copied().collect();
            if &prefix != cur {
                return NestingReport { violation: Some((t, m)) };
            }
            prev = cur;
        }
    }
    NestingReport { violation: None }
}

/// The suffix-count potential: `max_s (n(s) - n*(s))` where `n(s)` counts
/// online pages of next-request rank at least `s` and `n*(s)` the offline
/// ones. `rank[page]` is 1-based.
pub fn fif_potential(online: &BTreeSet<usize>, offline: &BTreeSet<usize>, rank: &[usize]) -> i64 {
    let n = rank.len();
    let mut on_count = vec![0i64; n + 2];
    let mut off_count = vec![0i64; n + 2];
    for &p in online {
        on_count[rank[p]] += 1;
    }
    for &p in offline {
        off_count[rank[p]] += 1;
    }
    let mut best = 0i64; // s = n + 1 gives e = 0
    let mut on_suffix = 0i64;
    let mut off_suffix = 0i64;
    for s in (1..=n).rev() {
        on_suffix += on_count[s];
        off_suffix += off_count[s];
        best = best.max(on_suffix - off_suffix);
    }
    best
}

/// One checked step of the FiF monitor.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FifMonitorStep {
    pub t: usize,
    pub phase: &'static str,
    pub online_cost: i64,
    pub offline_cost: i64,
    pub delta_phi: i64,
    pub ok: bool,
}

/// Report of the exact stepwise inequality `Bel' + Phi' <= Off'` over a run,
/// in eviction-charged units (every eviction costs 1, fetches are free; this
/// differs from fault counting by at most the final cache size).
#[derive(Debug, Clone)]
pub struct FifMonitorReport {
    pub steps: Vec<FifMonitorStep>,
    pub fif_faults: usize,
    pub fif_evictions: usize,
    pub offline_evictions: usize,
    pub final_phi: i64,
}

impl FifMonitorReport {
    pub fn ok(&self) -> bool {
        self.steps.iter().all(|s| s.ok)
    }
}

fn rank_vector(oracle: &SeqOracle, t: usize, n: usize) -> Vec<usize> {
    let mut rank = vec![0usize; n];
    for (i, p) in oracle.rank_order(t).into_iter().enumerate() {
        rank[p] = i + 1;
    }
    rank
}

/// Run FiF (cold start) against an arbitrary feasible offline schedule and
/// check the potential inequality exactly at every decomposed step: each
/// offline eviction and load, the online eviction and load, and the
/// reinsertion of the served page in the next-request order.
pub fn fif_monitor(seq: &[usize], n_pages: usize, k: usize, offline: &[BTreeSet<usize>]) -> Result<FifMonitorReport> {
    if offline.len() != seq.len() {
        return Err(Error::InvalidArgument("offline schedule length mismatch".into()));
    }
    let oracle = SeqOracle::new(seq, n_pages);
    let mut online: BTreeSet<usize> = BTreeSet::new();
    let mut off: BTreeSet<usize> = BTreeSet::new();
    let mut steps = Vec::new();
    let mut fif_faults = 0;
    let mut fif_evictions = 0;
    let mut offline_evictions = 0;
    let mut phi;
    for (t, &p) in seq.iter().enumerate() {
        let rank = rank_vector(&oracle, t, n_pages);
        debug_assert_eq!(rank[p], 1, "served page must have rank 1");
        phi = fif_potential(&online, &off, &rank);
        let target = &offline[t];
        if target.len() > k {
            return Err(Error::Infeasible { time: t, msg: "offline cache too large".into() });
        }
        if !target.contains(&p) {
            return Err(Error::Infeasible { time: t, msg: "offline misses the request".into() });
        }
        // offline evictions, one page at a time
        let evict: Vec<usize> = off.difference(target).copied().collect();
        for q in evict {
            off.remove(&q);
            offline_evictions += 1;
            let new_phi = fif_potential(&online, &off, &rank);
            let d = new_phi - phi;
            steps.push(FifMonitorStep { t, phase: "offline_evict", online_cost: 0, offline_cost: 1, delta_phi: d, ok: d <= 1 });
            phi = new_phi;
        }
        // offline loads are free and never raise the potential
        let load: Vec<usize> = target.difference(&off).copied().collect();
        for q in load {
            off.insert(q);
            let new_phi = fif_potential(&online, &off, &rank);
            let d = new_phi - phi;
            steps.push(FifMonitorStep { t, phase: "offline_load", online_cost: 0, offline_cost: 0, delta_phi: d, ok: d <= 0 });
            phi = new_phi;
        }
        // online move
        if !online.contains(&p) {
            fif_faults += 1;
            if online.len() == k {
                let victim = *online.iter().max_by_key(|&&q| oracle.next_after(q, t)).unwrap();
                online.remove(&victim);
                fif_evictions += 1;
                let new_phi = fif_potential(&online, &off, &rank);
                let d = new_phi - phi;
                steps.push(FifMonitorStep { t, phase: "online_evict", online_cost: 1, offline_cost: 0, delta_phi: d, ok: d == -1 });
                phi = new_phi;
            }
            online.insert(p);
            let new_phi = fif_potential(&online, &off, &rank);
            let d = new_phi - phi;
            steps.push(FifMonitorStep { t, phase: "online_load", online_cost: 0, offline_cost: 0, delta_phi: d, ok: d == 0 });
            phi = new_phi;
        }
        // reinsertion: ranks advance to time t + 1
        let rank_next = rank_vector(&oracle, t + 1, n_pages);
        let new_phi = fif_potential(&online, &off, &rank_next);
        let d = new_phi - phi;
        steps.push(FifMonitorStep { t, phase: "reinsert", online_cost: 0, offline_cost: 0, delta_phi: d, ok: d == 0 });
    }
    let rank_end = rank_vector(&oracle, seq.len(), n_pages);
    let final_phi = fif_potential(&online, &off, &rank_end);
    Ok(FifMonitorReport { steps, fif_faults, fif_evictions, offline_evictions, final_phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    /// Exhaustive minimum fault count over all eviction choices.
    fn brute_force_opt(seq: &[usize], m: usize) -> usize {
        fn rec(seq: &[usize], t: usize, m: usize, cache: &mut BTreeSet<usize>) -> usize {
            if t == seq.len() {
                return 0;
            }
            let p = seq[t];
            if cache.contains(&p) {
                return rec(seq, t + 1, m, cache);
            }
            if cache.len() < m {
                cache.insert(p);
                let r = 1 + rec(seq, t + 1, m, cache);
                cache.remove(&p);
                return r;
            }
            let options: Vec<usize> = cache.iter().copied().collect();
            let mut best = usize::MAX;
            for v in options {
                cache.remove(&v);
                cache.insert(p);
                best = best.min(1 + rec(seq, t + 1, m, cache));
                cache.remove(&p);
                cache.insert(v);
            }
            best
        }
        rec(seq, 0, m, &mut BTreeSet::new())
    }

    #[test]
    fn fif_example_matches_brute_force() {
        // a,b,c,a,b with m=2: FiF evicts b at the c-request, 4 faults
        let seq = vec![0, 1, 2, 0, 1];
        let run = simulate_fif(&seq, 3, 2, InitialCache::Empty);
        assert_eq!(run.faults, 4);
        assert_eq!(brute_force_opt(&seq, 2), 4);
    }

    #[test]
    fn fif_trivial_cases() {
        let seq = vec![0, 1, 2, 0, 1];
        let run = simulate_fif(&seq, 3, 3, InitialCache::Empty);
        assert_eq!(run.faults, 3);
        let run = simulate_fif(&[0, 0, 0], 1, 1, InitialCache::Empty);
        assert_eq!(run.faults, 1);
    }

    #[test]
    fn fif_matches_brute_force_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.random_range(2..=6);
            let m = rng.random_range(1..=3);
            let len = rng.random_range(0..=12);
            let seq: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
            let run = simulate_fif(&seq, n, m, InitialCache::Empty);
            assert_eq!(run.faults, brute_force_opt(&seq, m), "seq={seq:?} m={m}");
        }
    }

    #[test]
    fn ranking_update_examples() {
        // ranking (a,b,c), request c (m0 = 3), future order b-then-a:
        // the chain is (3, 1) and the new ranking is (c, b, a)
        let seq = vec![2, 1, 0]; // c now, then b, then a
        let oracle = SeqOracle::new(&seq, 3);
        let mut r = BeladyRanking::new(3);
        let chain = r.update(2, 0, &oracle).unwrap();
        assert_eq!(chain, vec![3, 1]);
        assert_eq!(r.order(), &[2, 1, 0]);

        // request to position 1 leaves the ranking unchanged
        let mut r = BeladyRanking::new(3);
        let chain = r.update(0, 0, &oracle).unwrap();
        assert_eq!(chain, vec![1]);
        assert_eq!(r.order(), &[0, 1, 2]);

        // request to position 2 swaps positions 1 and 2
        let seq = vec![1, 0, 2];
        let oracle = SeqOracle::new(&seq, 3);
        let mut r = BeladyRanking::new(3);
        let chain = r.update(1, 0, &oracle).unwrap();
        assert_eq!(chain, vec![2, 1]);
        assert_eq!(r.order(), &[1, 0, 2]);
    }

    #[test]
    fn nesting_holds_on_random_traces() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = 6;
            let seq: Vec<usize> = (0..50).map(|_| rng.random_range(0..n)).collect();
            assert!(verify_nesting(&seq, n).ok());
        }
        assert!(verify_nesting(&[], 4).ok());
    }

    #[test]
    fn corrupted_ranking_is_detected() {
        // simulate the cross-check against a ranking whose update swapped the
        // wrong pair: prefix sets then disagree with the FiF configurations
        let seq = vec![2, 1, 0, 2];
        let n = 3;
        let runs: Vec<FifRun> =
            (1..=n).map(|m| simulate_fif(&seq, n, m, InitialCache::UniversePrefix)).collect();
        let mut corrupt = BeladyRanking::new(n);
        // wrong update for the first request: move page 2 to position 2
        corrupt.order = vec![1, 2, 0];
        corrupt.pos = vec![2, 0, 1];
        let prefix: BTreeSet<usize> = corrupt.order()[..1].iter().copied().collect();
        assert_ne!(&prefix, &runs[0].states[0], "corruption must be visible at m=1");
    }

    #[test]
    fn potential_examples() {
        let rank = vec![1, 2, 3, 4];
        let same: BTreeSet<usize> = [0, 1].into_iter().collect();
        assert_eq!(fif_potential(&same, &same, &rank), 0);

        // online misses exactly the rank-1 page that offline holds
        let online: BTreeSet<usize> = [1, 2].into_iter().collect();
        let offline: BTreeSet<usize> = [0, 2].into_iter().collect();
        assert!(fif_potential(&online, &offline, &rank) >= 1);
    }

    #[test]
    fn potential_matches_suffix_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = 5;
            let mut rank: Vec<usize> = (1..=n).collect();
            // random permutation as rank assignment
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                rank.swap(i, j);
            }
            let online: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            let offline: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            let mut brute = 0i64;
            for s in 1..=n + 1 {
                let on = online.iter().filter(|&&p| rank[p] >= s).count() as i64;
                let off = offline.iter().filter(|&&p| rank[p] >= s).count() as i64;
                brute = brute.max(on - off);
            }
            assert_eq!(fif_potential(&online, &offline, &rank), brute);
        }
    }

    #[test]
    fn monitor_passes_against_random_offline_schedules() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let n = 5;
            let k = rng.random_range(1..=3);
            let len = rng.random_range(1..=15);
            let seq: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
            // random lazy offline schedule
            let mut cache: BTreeSet<usize> = BTreeSet::new();
            let mut states = Vec::new();
            for &p in &seq {
                if !cache.contains(&p) {
                    if cache.len() == k {
                        let opts: Vec<usize> = cache.iter().copied().collect();
                        let v = opts[rng.random_range(0..opts.len())];
                        cache.remove(&v);
                    }
                    cache.insert(p);
                }
                states.push(cache.clone());
            }
            let report = fif_monitor(&seq, n, k, &states).unwrap();
            assert!(report.ok(), "violation: {:?}", report.steps.iter().find(|s| !s.ok));
            assert!(report.final_phi >= 0);
            // eviction-charged optimality: online evictions never exceed offline's
            assert!(report.fif_evictions <= report.offline_evictions);
        }
    }
}
