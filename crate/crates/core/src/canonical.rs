//! Profile-driven caching: canonical configurations, canonicalization of
//! arbitrary fractional schedules with the factor-3 guarantee, and the
//! coupled randomized rounding of fractional prefixes.
//!
//! Profile streams serialize as CSV, one row per time with one column per
//! class.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::belady::BeladyRanking;
use crate::error::Error;
use crate::oracle::SeqOracle;
use crate::trace::{CacheState, CostLedger, FractionalSchedule, Request, RequestTrace};
use crate::Result;

pub const SIMPLEX_TOL: f64 = 1e-9;

/// Per-time cache fractions devoted to each weight class. Rows of algorithm
/// profiles sum to 1; profiles extracted from schedules that underuse the
/// cache may sum to less.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub rows: Vec<Vec<f64>>,
}

impl Profile {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse { line: i + 1, msg: format!("bad profile cell {s:?}") })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

/// Maintains the per-class page rankings of a trace as requests are served.
#[derive(Debug, Clone)]
pub struct RankingCtx {
    pub rankings: Vec<BeladyRanking>,
    oracles: Vec<SeqOracle>,
    local_t: Vec<usize>,
}

impl RankingCtx {
    pub fn new(trace: &RequestTrace) -> Self {
        let mut oracles = Vec::new();
        let mut rankings = Vec::new();
        for c in 0..trace.num_classes() {
            let seq: Vec<usize> = trace.class_subsequence(c).iter().map(|&(_, p)| p).collect();
            oracles.push(SeqOracle::new(&seq, trace.pages_in_class(c)));
            rankings.push(BeladyRanking::new(trace.pages_in_class(c)));
        }
        Self { rankings, oracles, local_t: vec![0; trace.num_classes()] }
    }

    /// Serve one request: returns the 1-based position the page occupied
    /// just before the ranking update.
    pub fn serve(&mut self, class: usize, page: usize) -> Result<usize> {
        let q = self.rankings[class].position_of(page);
        let t = self.local_t[class];
        self.rankings[class].update(page, t, &self.oracles[class])?;
        self.local_t[class] += 1;
        Ok(q)
    }

    /// Position the page would be served at, without applying the update.
    pub fn peek_position(&self, class: usize, page: usize) -> usize {
        self.rankings[class].position_of(page)
    }
}

/// A canonical cache: per class the number of fully held ranking-prefix
/// pages plus a fractional tail.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalConfig {
    pub full: Vec<usize>,
    pub tail_mass: Vec<f64>,
}

impl CanonicalConfig {
    pub fn total_mass(&self) -> f64 {
        self.full.iter().sum::<usize>() as f64 + self.tail_mass.iter().sum::<f64>()
    }

    /// Materialize as a page-mass map under the given rankings.
    pub fn to_state(&self, rankings: &[BeladyRanking]) -> CacheState {
        let mut state = CacheState::new();
        for (class, (&full, &tail)) in self.full.iter().zip(&self.tail_mass).enumerate() {
            for pos in 1..=full {
                state.insert(Request { class, page: rankings[class].page_at(pos) }, 1.0);
            }
            if tail > 0.0 {
                state.insert(Request { class, page: rankings[class].page_at(full + 1) }, tail);
            }
        }
        state
    }
}

/// Build the canonical configuration for one profile row: the first
/// `floor(k x_j)` ranking pages of each class fully plus the fractional
/// remainder of the next page.
pub fn canonical_config(row: &[f64], k: usize, rankings: &[BeladyRanking]) -> Result<CanonicalConfig> {
    if row.len() != rankings.len() {
        return Err(Error::InvalidArgument("profile row has wrong arity".into()));
    }
    let total: f64 = row.iter().sum();
    if total > 1.0 + SIMPLEX_TOL || row.iter().any(|&x| x < -SIMPLEX_TOL) {
        return Err(Error::Invariant(format!("profile row off the simplex: {row:?}")));
    }
    let mut full = Vec::with_capacity(row.len());
    let mut tail = Vec::with_capacity(row.len());
    for (class, &x) in row.iter().enumerate() {
        let mass = (x.max(0.0) * k as f64).min(k as f64);
        let n = rankings[class].len();
        if mass > n as f64 + SIMPLEX_TOL {
            return Err(Error::Invariant(format!(
                "class {class} asked for {mass} pages but only has {n}"
            )));
        }
        let mut f = mass.floor() as usize;
        let mut t = mass - f as f64;
        if t < SIMPLEX_TOL {
            t = 0.0;
        } else if t > 1.0 - SIMPLEX_TOL && f + 1 <= n {
            f += 1;
            t = 0.0;
        }
        if f > n {
            f = n;
            t = 0.0;
        }
        full.push(f);
        tail.push(t);
    }
    Ok(CanonicalConfig { full, tail_mass: tail })
}

/// Result of a canonical run.
#[derive(Debug, Clone)]
pub struct CanonicalRun {
    pub ledger: CostLedger,
    pub schedule: FractionalSchedule,
}

/// Run the canonical algorithm for a causally given profile stream.
///
/// Per step the cache first moves to the new per-class masses under the old
/// rankings (movement), then the requested class's ranking update swaps the
/// served page into the prefix (service). The produced schedule is checked
/// for feasibility via [`crate::trace::validate_schedule`].
pub fn run_canonical(trace: &RequestTrace, profile: &Profile) -> Result<CanonicalRun> {
    if profile.rows.len() != trace.len() {
        return Err(Error::InvalidArgument(format!(
            "profile has {} rows for {} requests",
            profile.rows.len(),
            trace.len()
        )));
    }
    let mut ctx = RankingCtx::new(trace);
    let mut ledger = CostLedger::default();
    let mut schedule = FractionalSchedule::default();
    let mut masses = vec![0.0f64; trace.num_classes()];
    for (t, req) in trace.requests.iter().enumerate() {
        let row = &profile.rows[t];
        let config = canonical_config(row, trace.k, &ctx.rankings)?;
        // movement under the old rankings
        for class in 0..trace.num_classes() {
            let new_mass = config.full[class] as f64 + config.tail_mass[class];
            let delta = new_mass - masses[class];
            let w = trace.weight_table.weight(class);
            if delta > 0.0 {
                ledger.add_load(w * delta);
                ledger.add_movement(w * delta);
            } else {
                ledger.add_evict(w * (-delta));
            }
            masses[class] = new_mass;
        }
        // service: the ranking update for the requested class
        let m_r = masses[req.class];
        if m_r < 1.0 - SIMPLEX_TOL {
            return Err(Error::Infeasible {
                time: t,
                msg: format!("profile gives class {} only {m_r} pages; requested page needs mass 1", req.class + 1),
            });
        }
        let q = ctx.serve(req.class, req.page)?;
        let service = (q as f64 - m_r).clamp(0.0, 1.0);
        let w = trace.weight_table.weight(req.class);
        ledger.add_load(w * service);
        ledger.add_evict(w * service);
        ledger.add_service(w * service);
        schedule.states.push(config.to_state(&ctx.rankings));
    }
    crate::trace::validate_schedule(trace, &schedule)?;
    Ok(CanonicalRun { ledger, schedule })
}

/// Extract the per-class cache fractions of an arbitrary schedule.
pub fn extract_profile(trace: &RequestTrace, schedule: &FractionalSchedule) -> Profile {
    let rows = schedule
        .states
        .iter()
        .map(|state| {
            let mut row = vec![0.0; trace.num_classes()];
            for (req, &m) in state {
                row[req.class] += m;
            }
            for v in &mut row {
                *v /= trace.k as f64;
            }
            row
        })
        .collect();
    Profile { rows }
}

/// Outcome of canonicalizing one schedule.
#[derive(Debug, Clone)]
pub struct CanonicalizeReport {
    pub input_ledger: CostLedger,
    pub canonical_ledger: CostLedger,
    /// Ratio of load-plus-eviction charges, the units of the factor-3
    /// guarantee.
    pub ratio_both: f64,
    /// Largest violation of the per-step potential inequality (should stay
    /// within numerical noise of zero).
    pub max_step_violation: f64,
}

/// Replace an arbitrary feasible fractional schedule by the canonical
/// algorithm with the same profile and verify, step by step with the
/// next-request-rank potential, that its load-plus-eviction charge never
/// exceeds three times the input's.
pub fn canonicalize(trace: &RequestTrace, input: &FractionalSchedule) -> Result<CanonicalizeReport> {
    let input_ledger = crate::trace::validate_schedule(trace, input)?;
    let profile = extract_profile(trace, input);
    let canon = run_canonical(trace, &profile)?;

    // Stepwise potential check with Phi = 2 sum_j w_j max_s (f*_j(s) - f_j(s)).
    let oracles: Vec<SeqOracle> = (0..trace.num_classes())
        .map(|c| {
            let seq: Vec<usize> = trace.class_subsequence(c).iter().map(|&(_, p)| p).collect();
            SeqOracle::new(&seq, trace.pages_in_class(c))
        })
        .collect();
    let local_times = local_time_table(trace);
    let empty = CacheState::new();
    let mut max_violation: f64 = 0.0;
    let mut prev_in = &empty;
    let mut prev_can = &empty;
    let mut phi = 0.0;
    for t in 0..trace.len() {
        let cur_in = &input.states[t];
        let cur_can = &canon.schedule.states[t];
        let cost_in = both_cost(trace, prev_in, cur_in);
        let cost_can = both_cost(trace, prev_can, cur_can);
        let new_phi = rank_potential(trace, &oracles, &local_times, t, cur_in, cur_can, false);
        // steps 1+2 combined: A moves, A* moves and absorbs the ranking change
        let lhs = cost_can + (new_phi - phi);
        let rhs = 3.0 * cost_in;
        max_violation = max_violation.max(lhs - rhs);
        // step 3: reinsertion leaves the potential unchanged
        let after = rank_potential(trace, &oracles, &local_times, t, cur_in, cur_can, true);
        max_violation = max_violation.max((after - new_phi).abs());
        phi = after;
        prev_in = cur_in;
        prev_can = cur_can;
    }

    let ratio_both = if input_ledger.both_cost() > 0.0 {
        canon.ledger.both_cost() / input_ledger.both_cost()
    } else {
        1.0
    };
    Ok(CanonicalizeReport {
        input_ledger,
        canonical_ledger: canon.ledger,
        ratio_both,
        max_step_violation: max_violation,
    })
}

fn local_time_table(trace: &RequestTrace) -> Vec<usize> {
    // local_times[t] = index of request t within its class
    let mut counters = vec![0usize; trace.num_classes()];
    trace
        .requests
        .iter()
        .map(|r| {
            let v = counters[r.class];
            counters[r.class] += 1;
            v
        })
        .collect()
}

fn both_cost(trace: &RequestTrace, prev: &CacheState, cur: &CacheState) -> f64 {
    let mut cost = 0.0;
    for (req, &m) in cur {
        let before = prev.get(req).copied().unwrap_or(0.0);
        if m > before {
            cost += trace.weight_table.weight(req.class) * (m - before);
        }
    }
    for (req, &before) in prev {
        let after = cur.get(req).copied().unwrap_or(0.0);
        if after < before {
            cost += trace.weight_table.weight(req.class) * (before - after);
        }
    }
    cost
}

/// `2 sum_j w_j max_s (f*_j(s) - f_j(s))` with ranks by next request.
/// `post_reinsert` evaluates ranks for time `t + 1` (after the served page
/// re-enters the order at its next-occurrence position).
fn rank_potential(
    trace: &RequestTrace,
    oracles: &[SeqOracle],
    local_times: &[usize],
    t: usize,
    input_state: &CacheState,
    canon_state: &CacheState,
    post_reinsert: bool,
) -> f64 {
    let mut phi = 0.0;
    // class-local rank time: number of class requests strictly before the
    // comparison point
    let mut next_local = vec![0usize; trace.num_classes()];
    for (u, r) in trace.requests.iter().enumerate() {
        if u < t || (u == t && post_reinsert) {
            next_local[r.class] = local_times[u] + 1;
        } else if u == t {
            next_local[r.class] = local_times[u];
        }
    }
    for class in 0..trace.num_classes() {
        let order = oracles[class].rank_order(next_local[class]);
        // suffix masses from the farthest page down
        let mut f_in = 0.0;
        let mut f_can = 0.0;
        let mut best = 0.0f64;
        for &p in order.iter().rev() {
            let req = Request { class, page: p };
            f_in += input_state.get(&req).copied().unwrap_or(0.0);
            f_can += canon_state.get(&req).copied().unwrap_or(0.0);
            best = best.max(f_can - f_in);
        }
        phi += 2.0 * trace.weight_table.weight(class) * best;
    }
    phi
}

/// Randomized rounding report.
#[derive(Debug, Clone)]
pub struct RoundedRun {
    pub ledger: CostLedger,
    pub schedule: FractionalSchedule,
}

/// Round a canonical fractional profile to an integral schedule: per class
/// the prefix keeps `floor(k x_j)` or `ceil(k x_j)` pages, coupled through
/// one uniform draw that is resampled only when the identity of the tail
/// page changes. Marginals match the fractional tail at every step.
pub fn round_online(trace: &RequestTrace, profile: &Profile, seed: u64) -> Result<RoundedRun> {
    if profile.rows.len() != trace.len() {
        return Err(Error::InvalidArgument("profile/trace length mismatch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = RankingCtx::new(trace);
    let mut uniforms: Vec<f64> = (0..trace.num_classes()).map(|_| rng.random::<f64>()).collect();
    let mut tail_identity: Vec<Option<(usize, usize)>> = vec![None; trace.num_classes()];
    let mut ledger = CostLedger::default();
    let mut schedule = FractionalSchedule::default();
    let empty = CacheState::new();
    for (t, req) in trace.requests.iter().enumerate() {
        let config = canonical_config(&profile.rows[t], trace.k, &ctx.rankings)?;
        let m_r = config.full[req.class] as f64 + config.tail_mass[req.class];
        if m_r < 1.0 - SIMPLEX_TOL {
            return Err(Error::Infeasible { time: t, msg: "rounded profile misses the request".into() });
        }
        ctx.serve(req.class, req.page)?;
        // integral state under the post-service rankings
        let mut state = CacheState::new();
        for class in 0..trace.num_classes() {
            let full = config.full[class];
            for pos in 1..=full {
                state.insert(Request { class, page: ctx.rankings[class].page_at(pos) }, 1.0);
            }
            if config.tail_mass[class] > 0.0 {
                let tail_page = ctx.rankings[class].page_at(full + 1);
                let identity = (full + 1, tail_page);
                if tail_identity[class] != Some(identity) {
                    tail_identity[class] = Some(identity);
                    uniforms[class] = rng.random::<f64>();
                }
                if uniforms[class] < config.tail_mass[class] {
                    state.insert(Request { class, page: tail_page }, 1.0);
                }
            } else {
                tail_identity[class] = None;
            }
        }
        let prev = schedule.states.last().unwrap_or(&empty);
        for (r, &m) in &state {
            let before = prev.get(r).copied().unwrap_or(0.0);
            if m > before {
                ledger.add_load(trace.weight_table.weight(r.class) * (m - before));
            }
        }
        for (r, &before) in prev {
            let after = state.get(r).copied().unwrap_or(0.0);
            if after < before {
                ledger.add_evict(trace.weight_table.weight(r.class) * (before - after));
            }
        }
        schedule.states.push(state);
    }
    Ok(RoundedRun { ledger, schedule })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn two_class_trace() -> RequestTrace {
        let mut t = RequestTrace::parse("k=4; w=1,4\n1 a\n2 x\n1 b\n2 y\n1 a\n2 x\n").unwrap();
        t.ensure_min_pages(4);
        t
    }

    #[test]
    fn canonical_config_examples() {
        let t = two_class_trace();
        let ctx = RankingCtx::new(&t);
        // k=4, x=(0.5,0.5): top two pages of each class fully
        let c = canonical_config(&[0.5, 0.5], 4, &ctx.rankings).unwrap();
        assert_eq!(c.full, vec![2, 2]);
        assert_eq!(c.tail_mass, vec![0.0, 0.0]);
        assert!((c.total_mass() - 4.0).abs() < 1e-12);

        // k=3: one full page plus half of the position-2 page per class
        let c = canonical_config(&[0.5, 0.5], 3, &ctx.rankings).unwrap();
        assert_eq!(c.full, vec![1, 1]);
        assert!((c.tail_mass[0] - 0.5).abs() < 1e-12);
        assert!((c.tail_mass[1] - 0.5).abs() < 1e-12);

        // boundary: everything from class 1
        let c = canonical_config(&[1.0, 0.0], 4, &ctx.rankings).unwrap();
        assert_eq!(c.full, vec![4, 0]);

        // off the simplex
        assert!(canonical_config(&[0.9, 0.9], 4, &ctx.rankings).is_err());
    }

    #[test]
    fn constant_profile_pays_initial_fill_only() {
        let t = two_class_trace();
        let profile = Profile { rows: vec![vec![0.5, 0.5]; t.len()] };
        let run = run_canonical(&t, &profile).unwrap();
        // the constant 2-page prefix per class holds every requested page
        // from the start, so only the fill is paid
        assert_eq!(run.ledger.load_cost, t.initial_fill_cost());
        assert_eq!(run.ledger.service_cost, 0.0);
    }

    #[test]
    fn infeasible_profile_is_rejected() {
        let t = two_class_trace();
        // class 2 never gets a full page
        let profile = Profile { rows: vec![vec![0.9, 0.1]; t.len()] };
        assert!(matches!(run_canonical(&t, &profile), Err(Error::Infeasible { .. })));
    }

    fn random_lazy_schedule(trace: &RequestTrace, rng: &mut impl Rng) -> FractionalSchedule {
        let mut cache: std::collections::BTreeSet<Request> = Default::default();
        let mut states = Vec::new();
        for req in &trace.requests {
            if !cache.contains(req) {
                if cache.len() == trace.k {
                    let opts: Vec<Request> = cache.iter().copied().collect();
                    cache.remove(&opts[rng.random_range(0..opts.len())]);
                }
                cache.insert(*req);
            }
            states.push(cache.iter().map(|&r| (r, 1.0)).collect::<BTreeMap<_, _>>());
        }
        FractionalSchedule { states }
    }

    #[test]
    fn canonicalize_fixed_point() {
        let t = two_class_trace();
        let profile = Profile { rows: vec![vec![0.5, 0.5]; t.len()] };
        let run = run_canonical(&t, &profile).unwrap();
        let report = canonicalize(&t, &run.schedule).unwrap();
        assert!((report.ratio_both - 1.0).abs() < 1e-9);
        assert_eq!(report.canonical_ledger.load_cost, report.input_ledger.load_cost);
    }

    #[test]
    fn canonicalize_factor_three_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let spec = crate::generate::GeneratorSpec {
                family: crate::generate::Family::UniformRandom,
                ell: 2,
                k: 3,
                pages_per_class: 4,
                len: 25,
                weights: Some(vec![1.0, 4.0]),
                class_skew: None,
            };
            let trace = crate::generate::generate(&spec, rng.random()).unwrap();
            if trace.is_empty() {
                continue;
            }
            // convex combination of two lazy integral schedules
            let s1 = random_lazy_schedule(&trace, &mut rng);
            let s2 = random_lazy_schedule(&trace, &mut rng);
            let lambda: f64 = rng.random_range(0.0..=1.0);
            let mut mixed = FractionalSchedule::default();
            for t in 0..trace.len() {
                let mut state = CacheState::new();
                for (r, &m) in &s1.states[t] {
                    *state.entry(*r).or_insert(0.0) += lambda * m;
                }
                for (r, &m) in &s2.states[t] {
                    *state.entry(*r).or_insert(0.0) += (1.0 - lambda) * m;
                }
                mixed.states.push(state);
            }
            let report = canonicalize(&trace, &mixed).unwrap();
            assert!(report.ratio_both <= 3.0 + 1e-9, "ratio {}", report.ratio_both);
            assert!(report.max_step_violation <= 1e-9, "step violation {}", report.max_step_violation);
        }
    }

    #[test]
    fn round_online_integral_profile_is_deterministic() {
        let t = two_class_trace();
        let profile = Profile { rows: vec![vec![0.5, 0.5]; t.len()] };
        let a = round_online(&t, &profile, 1).unwrap();
        let b = round_online(&t, &profile, 999).unwrap();
        assert_eq!(a.schedule, b.schedule);
        crate::trace::validate_schedule(&t, &a.schedule).unwrap();
    }

    #[test]
    fn round_online_marginals_track_the_tail() {
        // constant 0.5 fractional tail in class 1
        let mut t = RequestTrace::parse("k=2; w=1,4\n1 a\n1 a\n1 a\n1 a\n1 a\n1 a\n").unwrap();
        t.ensure_min_pages(2);
        let profile = Profile { rows: vec![vec![0.75, 0.25]; t.len()] };
        let seeds = 4000;
        let mut hits = vec![0usize; t.len()];
        for seed in 0..seeds {
            let run = round_online(&t, &profile, seed).unwrap();
            for (i, state) in run.schedule.states.iter().enumerate() {
                // tail page of class 1 is the position-2 page
                let tail = Request { class: 0, page: 1 };
                if state.get(&tail).copied().unwrap_or(0.0) > 0.5 {
                    hits[i] += 1;
                }
            }
        }
        for (i, &h) in hits.iter().enumerate() {
            let freq = h as f64 / seeds as f64;
            let sigma = (0.5f64 * 0.5 / seeds as f64).sqrt();
            assert!((freq - 0.5).abs() <= 4.0 * sigma + 0.01, "t={i} freq={freq}");
        }
    }

    #[test]
    fn profile_csv_roundtrip() {
        let p = Profile { rows: vec![vec![0.5, 0.5], vec![0.25, 0.75]] };
        let q = Profile::parse_csv(&p.to_csv()).unwrap();
        assert_eq!(p, q);
    }
}
