//! Exact offline optima for weighted paging.
//!
//! Two independent routes: a dynamic program over cache states for small
//! instances, and a min-cost-flow over retention intervals for anything
//! that fits in memory. Both carry exact rational costs so equality checks
//! between them are meaningful for arbitrary weights.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};

use crate::canonical::{run_canonical, Profile};
use crate::error::Error;
use crate::trace::{CacheState, CostLedger, FractionalSchedule, Request, RequestTrace};
use crate::Result;

fn rat(w: f64) -> BigRational {
    BigRational::from_f64(w).expect("finite weight")
}

/// An integral offline schedule in lazy form: pages are fetched only when
/// requested and stay cached along chosen retention intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSchedule {
    /// Post-service cache at every time step.
    pub states: Vec<BTreeSet<Request>>,
    pub cost: f64,
    pub cost_exact: BigRational,
}

impl OfflineSchedule {
    pub fn to_fractional(&self) -> FractionalSchedule {
        FractionalSchedule {
            states: self
                .states
                .iter()
                .map(|s| s.iter().map(|&r| (r, 1.0)).collect::<CacheState>())
                .collect(),
        }
    }

    /// Per-class page counts at every time step (page units).
    pub fn class_counts(&self, num_classes: usize) -> Vec<Vec<usize>> {
        self.states
            .iter()
            .map(|s| {
                let mut row = vec![0usize; num_classes];
                for r in s {
                    row[r.class] += 1;
                }
                row
            })
            .collect()
    }

    pub fn to_json(&self, trace: &RequestTrace) -> String {
        let rows: Vec<Vec<String>> = self
            .states
            .iter()
            .map(|s| s.iter().map(|r| format!("{}:{}", r.class + 1, trace.universe[r.class][r.page])).collect())
            .collect();
        serde_json::to_string(&rows).expect("serializable")
    }
}

const BRUTE_MAX_PAGES: usize = 10;
const BRUTE_MAX_K: usize = 5;
const BRUTE_MAX_LEN: usize = 25;

/// Exact minimum load cost by dynamic programming over cache states.
/// Instances beyond `n <= 10, k <= 5, T <= 25` are rejected.
pub fn opt_bruteforce(trace: &RequestTrace) -> Result<BigRational> {
    let mut page_ids: Vec<Request> = Vec::new();
    let mut index: BTreeMap<Request, usize> = BTreeMap::new();
    for r in &trace.requests {
        index.entry(*r).or_insert_with(|| {
            page_ids.push(*r);
            page_ids.len() - 1
        });
    }
    let n = page_ids.len();
    if n > BRUTE_MAX_PAGES || trace.k > BRUTE_MAX_K || trace.len() > BRUTE_MAX_LEN {
        return Err(Error::BudgetExceeded(format!(
            "n={n} k={} T={} exceeds n<={BRUTE_MAX_PAGES} k<={BRUTE_MAX_K} T<={BRUTE_MAX_LEN}",
            trace.k,
            trace.len()
        )));
    }
    if trace.is_empty() {
        return Ok(BigRational::zero());
    }
    let weights: Vec<BigRational> = page_ids
        .iter()
        .map(|r| rat(trace.weight_table.weight(r.class)))
        .collect();
    let seq: Vec<usize> = trace.requests.iter().map(|r| index[r]).collect();

    // dp: cache bitmask (containing the served page) -> min cost so far
    let mut dp: HashMap<u16, BigRational> = HashMap::new();
    dp.insert(1u16 << seq[0], weights[seq[0]].clone());
    for &p in &seq[1..] {
        let mut next: HashMap<u16, BigRational> = HashMap::new();
        let mut relax = |mask: u16, cost: BigRational| match next.entry(mask) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if cost < *e.get() {
                    e.insert(cost);
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(cost);
            }
        };
        for (mask, cost) in &dp {
            if mask & (1 << p) != 0 {
                relax(*mask, cost.clone());
            } else if (mask.count_ones() as usize) < trace.k {
                relax(mask | (1 << p), cost + &weights[p]);
            } else {
                let mut m = *mask;
                while m != 0 {
                    let v = m.trailing_zeros() as u16;
                    m &= m - 1;
                    relax((mask & !(1 << v)) | (1 << p), cost + &weights[p]);
                }
            }
        }
        dp = next;
    }
    Ok(dp.into_values().min().expect("nonempty dp"))
}

struct FlowEdge {
    to: usize,
    cap: i64,
    cost: BigRational,
    flow: i64,
}

/// Successive-shortest-path min-cost flow on the retention DAG, exact
/// rational costs, deterministic tie-breaking by arc insertion order.
struct Mcmf {
    edges: Vec<FlowEdge>,
    adj: Vec<Vec<usize>>,
}

impl Mcmf {
    fn new(n: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: BigRational) -> usize {
        let id = self.edges.len();
        self.edges.push(FlowEdge { to, cap, cost: cost.clone(), flow: 0 });
        self.adj[from].push(id);
        self.edges.push(FlowEdge { to: from, cap: 0, cost: -cost, flow: 0 });
        self.adj[to].push(id + 1);
        id
    }

    /// Send up to `want` units from `s` to `t`, stopping once the marginal
    /// path cost turns non-negative. Returns total cost of the flow sent.
    fn run(&mut self, s: usize, t: usize, want: i64) -> BigRational {
        let n = self.adj.len();
        let mut total = BigRational::zero();
        if s == t || want == 0 {
            return total;
        }
        // initial potentials by DAG relaxation in node order (all original
        // arcs point forward)
        let mut pot: Vec<BigRational> = vec![BigRational::zero(); n];
        {
            let mut dist: Vec<Option<BigRational>> = vec![None; n];
            dist[s] = Some(BigRational::zero());
            for u in 0..n {
                let Some(du) = dist[u].clone() else { continue };
                for &eid in &self.adj[u] {
                    let e = &self.edges[eid];
                    if eid % 2 == 1 || e.cap <= e.flow {
                        continue;
                    }
                    let cand = &du + &e.cost;
                    if dist[e.to].as_ref().is_none_or(|d| cand < *d) {
                        dist[e.to] = Some(cand);
                    }
                }
            }
            for u in 0..n {
                if let Some(d) = dist[u].take() {
                    pot[u] = d;
                }
            }
        }
        let mut sent = 0i64;
        while sent < want {
            // Dijkstra with reduced costs
            let mut dist: Vec<Option<BigRational>> = vec![None; n];
            let mut prev: Vec<Option<usize>> = vec![None; n];
            let mut done = vec![false; n];
            dist[s] = Some(BigRational::zero());
            loop {
                let mut u_best: Option<usize> = None;
                for u in 0..n {
                    if done[u] || dist[u].is_none() {
                        continue;
                    }
                    if u_best.is_none_or(|b| dist[u].as_ref().unwrap() < dist[b].as_ref().unwrap()) {
                        u_best = Some(u);
                    }
                }
                let Some(u) = u_best else { break };
                done[u] = true;
                let du = dist[u].clone().unwrap();
                for &eid in &self.adj[u] {
                    let e = &self.edges[eid];
                    if e.cap <= e.flow {
                        continue;
                    }
                    let cand = &du + &e.cost + &pot[u] - &pot[e.to];
                    if dist[e.to].as_ref().is_none_or(|d| cand < *d) {
                        dist[e.to] = Some(cand);
                        prev[e.to] = Some(eid);
                    }
                }
            }
            let Some(dt) = dist[t].clone() else { break };
            let path_cost = &dt + &pot[t] - &pot[s];
            if !path_cost.is_negative() {
                break;
            }
            // bottleneck along the path
            let mut bottleneck = want - sent;
            let mut v = t;
            while let Some(eid) = prev[v] {
                let e = &self.edges[eid];
                bottleneck = bottleneck.min(e.cap - e.flow);
                v = self.edges[eid ^ 1].to;
            }
            let mut v = t;
            while let Some(eid) = prev[v] {
                self.edges[eid].flow += bottleneck;
                self.edges[eid ^ 1].flow -= bottleneck;
                v = self.edges[eid ^ 1].to;
            }
            total += path_cost * BigRational::from_i64(bottleneck).unwrap();
            sent += bottleneck;
            for u in 0..n {
                if let Some(d) = dist[u].clone() {
                    pot[u] = &pot[u] + d;
                }
            }
        }
        total
    }
}

/// Exact offline optimum via the retention-interval flow: one node per
/// request, a chain of capacity `k - 1`, and an arc of cost `-w_p` for each
/// interval between consecutive requests to the same page. The recovered
/// schedule is lazy and deterministic.
pub fn opt_mincostflow(trace: &RequestTrace) -> Result<OfflineSchedule> {
    let t_len = trace.len();
    if t_len == 0 {
        return Ok(OfflineSchedule { states: Vec::new(), cost: 0.0, cost_exact: BigRational::zero() });
    }
    let mut base = BigRational::zero();
    for r in &trace.requests {
        base += rat(trace.weight_table.weight(r.class));
    }
    // consecutive-occurrence intervals per page
    let mut last_seen: BTreeMap<Request, usize> = BTreeMap::new();
    let mut intervals: Vec<(usize, usize, Request)> = Vec::new();
    for (t, r) in trace.requests.iter().enumerate() {
        if let Some(prev) = last_seen.insert(*r, t) {
            intervals.push((prev, t, *r));
        }
    }
    let mut savings = BigRational::zero();
    let mut chosen: Vec<(usize, usize, Request)> = Vec::new();
    let mut flow_intervals: Vec<(usize, usize, Request, usize)> = Vec::new();
    let mut net = Mcmf::new(t_len);
    for t in 0..t_len.saturating_sub(1) {
        net.add_edge(t, t + 1, trace.k as i64 - 1, BigRational::zero());
    }
    for &(t1, t2, r) in &intervals {
        let w = rat(trace.weight_table.weight(r.class));
        if t2 == t1 + 1 {
            // covers no interior serving time: always retain
            savings += w;
            chosen.push((t1, t2, r));
        } else {
            let id = net.add_edge(t1 + 1, t2, 1, -w);
            flow_intervals.push((t1, t2, r, id));
        }
    }
    if trace.k > 1 && t_len > 1 {
        let gained = net.run(0, t_len - 1, trace.k as i64 - 1);
        savings += -gained;
    }
    for &(t1, t2, r, id) in &flow_intervals {
        if net.edges[id].flow > 0 {
            chosen.push((t1, t2, r));
        }
    }
    // materialize lazy states: a page is cached from each chosen interval's
    // start through its end; the served page is always present
    let mut states: Vec<BTreeSet<Request>> = vec![BTreeSet::new(); t_len];
    for (t, r) in trace.requests.iter().enumerate() {
        states[t].insert(*r);
    }
    for &(t1, t2, r) in &chosen {
        for state in states.iter_mut().take(t2 + 1).skip(t1) {
            state.insert(r);
        }
    }
    let cost_exact = &base - &savings;
    let schedule = OfflineSchedule {
        states,
        cost: rational_to_f64(&cost_exact),
        cost_exact,
    };
    // the recovered schedule must cost exactly the flow objective
    let ledger = crate::trace::validate_schedule(trace, &schedule.to_fractional())?;
    let direct = BigRational::from_f64(ledger.load_cost).unwrap();
    if (&direct - &schedule.cost_exact).abs() > rat(1e-6) {
        return Err(Error::Invariant(format!(
            "flow objective {} disagrees with recovered schedule cost {}",
            schedule.cost,
            ledger.load_cost
        )));
    }
    Ok(schedule)
}

fn rational_to_f64(r: &BigRational) -> f64 {
    let numer = r.numer();
    let denom = r.denom();
    bigint_to_f64(numer) / bigint_to_f64(denom)
}

fn bigint_to_f64(b: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    b.to_f64().unwrap_or(f64::NAN)
}

/// Canonicalize an offline schedule: extract its per-class counts, run the
/// canonical algorithm on that profile, and assert the factor-3 bound with
/// the `sum_j w_j k` additive slack.
pub fn canonical_offline_profile(
    trace: &RequestTrace,
    schedule: &OfflineSchedule,
) -> Result<(Profile, CostLedger)> {
    let counts = schedule.class_counts(trace.num_classes());
    let rows: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / trace.k as f64).collect())
        .collect();
    let profile = Profile { rows };
    let run = run_canonical(trace, &profile)?;
    let additive: f64 = trace
        .weight_table
        .weights()
        .iter()
        .map(|w| w * trace.k as f64)
        .sum();
    if run.ledger.load_cost > 3.0 * schedule.cost + additive + 1e-6 {
        return Err(Error::Invariant(format!(
            "canonical offline cost {} exceeds 3 * {} + {}",
            run.ledger.load_cost, schedule.cost, additive
        )));
    }
    Ok((profile, run.ledger))
}
