//! Request traces, weight tables, cost ledgers and schedule validation.
//!
//! The on-disk trace format is line oriented:
//!
//! ```text
//! k=2; w=1,4
//! 1 a
//! 2 b
//! 1 a
//! ```
//!
//! The header fixes the cache size and the per-class weights; every further
//! non-comment line is `<class-index> <page-id>` with 1-based class indices.
//! Lines starting with `#` are ignored. Serialization is canonical, so
//! `parse(serialize(t)) == t` and `serialize(parse(s)) == s` for canonical
//! inputs, byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Error;
use crate::Result;

/// The distinct positive page weights `w_1..w_l`, one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    weights: Vec<f64>,
}

impl WeightTable {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("need at least one class".into()));
        }
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidWeights(format!("weight {w} is not positive")));
            }
        }
        let mut sorted = weights.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::InvalidWeights("weights must be pairwise distinct".into()));
        }
        Ok(Self { weights })
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, class: usize) -> f64 {
        self.weights[class]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// One request: a weight class and a page index into that class's universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Request {
    pub class: usize,
    pub page: usize,
}

/// A full paging instance: weights, cache size, requests and the per-class
/// page universes. The order of a class's universe doubles as the initial
/// page ranking, so traces constructed by different front ends can pin
/// different (nested) initial configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestTrace {
    pub weight_table: WeightTable,
    pub k: usize,
    pub requests: Vec<Request>,
    /// Per class: page names in ranking order. Parsed traces list pages in
    /// first-request order; padding pages are appended after all requested
    /// ones in id order.
    pub universe: Vec<Vec<String>>,
}

impl RequestTrace {
    /// Build a trace from raw `(class, page-name)` requests. The universe is
    /// the first-appearance order per class.
    pub fn from_named_requests(
        weight_table: WeightTable,
        k: usize,
        named: &[(usize, String)],
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("cache size k must be >= 1".into()));
        }
        let ell = weight_table.num_classes();
        let mut universe: Vec<Vec<String>> = vec![Vec::new(); ell];
        let mut index: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); ell];
        let mut requests = Vec::with_capacity(named.len());
        for (line, (class, name)) in named.iter().enumerate() {
            if *class >= ell {
                return Err(Error::UnknownClass { line: line + 1, class: class + 1 });
            }
            let page = *index[*class].entry(name.clone()).or_insert_with(|| {
                universe[*class].push(name.clone());
                universe[*class].len() - 1
            });
            requests.push(Request { class: *class, page });
        }
        Ok(Self { weight_table, k, requests, universe })
    }

    /// Build a trace whose universe order (and hence initial ranking) is
    /// given explicitly; requests refer to universe indices.
    pub fn from_indexed_requests(
        weight_table: WeightTable,
        k: usize,
        requests: Vec<Request>,
        universe: Vec<Vec<String>>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("cache size k must be >= 1".into()));
        }
        if universe.len() != weight_table.num_classes() {
            return Err(Error::InvalidArgument("universe/class count mismatch".into()));
        }
        for (t, r) in requests.iter().enumerate() {
            if r.class >= universe.len() || r.page >= universe[r.class].len() {
                return Err(Error::UnknownClass { line: t + 1, class: r.class + 1 });
            }
        }
        Ok(Self { weight_table, k, requests, universe })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, Vec<f64>)> = None;
        let mut named: Vec<(usize, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if header.is_none() {
                header = Some(parse_header(line, i + 1)?);
                continue;
            }
            let mut parts = line.split_whitespace();
            let class: usize = parts
                .next()
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse { line: i + 1, msg: format!("bad class index in {line:?}") })?;
            let page = parts
                .next()
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("missing page id in {line:?}") })?;
            if parts.next().is_some() {
                return Err(Error::Parse { line: i + 1, msg: format!("trailing tokens in {line:?}") });
            }
            if class == 0 {
                return Err(Error::Parse { line: i + 1, msg: "class indices are 1-based".into() });
            }
            named.push((class - 1, page.to_string()));
        }
        let (k, weights) = header.ok_or(Error::Parse { line: 0, msg: "missing header line".into() })?;
        let table = WeightTable::new(weights)?;
        Self::from_named_requests(table, k, &named)
    }

    /// Canonical text form. Pages are printed by name; comments are not
    /// preserved.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let ws: Vec<String> = self.weight_table.weights().iter().map(|w| format!("{w}")).collect();
        let _ = writeln!(out, "k={}; w={}", self.k, ws.join(","));
        for r in &self.requests {
            let _ = writeln!(out, "{} {}", r.class + 1, self.universe[r.class][r.page]);
        }
        out
    }

    pub fn num_classes(&self) -> usize {
        self.weight_table.num_classes()
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn pages_in_class(&self, class: usize) -> usize {
        self.universe[class].len()
    }

    /// Subsequence of request times belonging to one class, with page indices.
    pub fn class_subsequence(&self, class: usize) -> Vec<(usize, usize)> {
        self.requests
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class == class)
            .map(|(t, r)| (t, r.page))
            .collect()
    }

    /// Pad every class universe to at least `min_pages` pages with
    /// never-requested sentinel pages, appended after all real pages.
    pub fn ensure_min_pages(&mut self, min_pages: usize) {
        for (c, pages) in self.universe.iter_mut().enumerate() {
            let mut i = 0;
            while pages.len() < min_pages {
                let name = format!("_pad{}_{}", c + 1, i);
                if !pages.contains(&name) {
                    pages.push(name);
                }
                i += 1;
            }
        }
    }

    /// Total weight of the unavoidable first load of every requested page.
    pub fn initial_fill_cost(&self) -> f64 {
        let mut seen = std::collections::BTreeSet::new();
        let mut cost = 0.0;
        for r in &self.requests {
            if seen.insert((r.class, r.page)) {
                cost += self.weight_table.weight(r.class);
            }
        }
        cost
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<(usize, Vec<f64>)> {
    let err = |msg: String| Error::Parse { line: lineno, msg };
    let mut parts = line.splitn(2, ';');
    let kpart = parts.next().unwrap().trim();
    let wpart = parts
        .next()
        .ok_or_else(|| err("header must be `k=<int>; w=<reals>`".into()))?
        .trim();
    let k: usize = kpart
        .strip_prefix("k=")
        .ok_or_else(|| err(format!("expected `k=`, got {kpart:?}")))?
        .trim()
        .parse()
        .map_err(|_| err(format!("bad cache size in {kpart:?}")))?;
    if k == 0 {
        return Err(err("cache size k must be >= 1".into()));
    }
    let weights: Vec<f64> = wpart
        .strip_prefix("w=")
        .ok_or_else(|| err(format!("expected `w=`, got {wpart:?}")))?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| err(format!("bad weight {s:?}"))))
        .collect::<Result<_>>()?;
    Ok((k, weights))
}

/// Round raw weights in `[1, W]` up to powers of `base`, returning the
/// resulting weight table and the class index assigned to each input.
pub fn round_weights(raw: &[f64], base: f64) -> Result<(WeightTable, Vec<usize>)> {
    if !(base > 1.0) {
        return Err(Error::InvalidArgument(format!("base must exceed 1, got {base}")));
    }
    if raw.is_empty() {
        return Err(Error::InvalidArgument("no weights given".into()));
    }
    let mut exponents = Vec::with_capacity(raw.len());
    for &w in raw {
        if !(w >= 1.0) || !w.is_finite() {
            return Err(Error::InvalidWeights(format!("weight {w} outside [1, W]")));
        }
        // smallest integer e with base^e >= w; the float log is only a hint
        let mut e = (w.ln() / base.ln()).ceil() as i32;
        while base.powi(e) < w {
            e += 1;
        }
        while e > 0 && base.powi(e - 1) >= w {
            e -= 1;
        }
        exponents.push(e);
    }
    let mut classes: Vec<i32> = exponents.clone();
    classes.sort_unstable();
    classes.dedup();
    let weights: Vec<f64> = classes.iter().map(|&e| base.powi(e)).collect();
    let assignment = exponents
        .iter()
        .map(|e| classes.binary_search(e).unwrap())
        .collect();
    Ok((WeightTable::new(weights)?, assignment))
}

/// Accumulated costs of a run. Loading/eviction entries are used by the
/// paging simulators, service/movement by the allocation dynamics.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct CostLedger {
    pub load_cost: f64,
    pub evict_cost: f64,
    pub service_cost: f64,
    pub movement_cost: f64,
}

impl CostLedger {
    pub fn add_load(&mut self, w: f64) {
        debug_assert!(w >= 0.0);
        self.load_cost += w;
    }

    pub fn add_evict(&mut self, w: f64) {
        debug_assert!(w >= 0.0);
        self.evict_cost += w;
    }

    pub fn add_service(&mut self, w: f64) {
        debug_assert!(w >= 0.0);
        self.service_cost += w;
    }

    pub fn add_movement(&mut self, w: f64) {
        debug_assert!(w >= 0.0);
        self.movement_cost += w;
    }

    /// Load cost plus eviction cost (the charging used by the potential
    /// arguments, which bill both directions of page movement).
    pub fn both_cost(&self) -> f64 {
        self.load_cost + self.evict_cost
    }

    pub fn total(&self) -> f64 {
        self.load_cost + self.service_cost + self.movement_cost
    }
}

/// A fractional cache state: page mass per `(class, page)` in `[0,1]`.
pub type CacheState = BTreeMap<Request, f64>;

/// A fractional schedule: the post-service state at every time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FractionalSchedule {
    pub states: Vec<CacheState>,
}

impl FractionalSchedule {
    pub fn total_mass(state: &CacheState) -> f64 {
        state.values().sum()
    }
}

pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Check feasibility of `schedule` against `trace` and return the weighted
/// cost of all page mass loaded (starting from an empty cache).
pub fn validate_schedule(trace: &RequestTrace, schedule: &FractionalSchedule) -> Result<CostLedger> {
    if schedule.states.len() != trace.len() {
        return Err(Error::Infeasible {
            time: schedule.states.len(),
            msg: format!("schedule has {} states for {} requests", schedule.states.len(), trace.len()),
        });
    }
    let mut ledger = CostLedger::default();
    let empty = CacheState::new();
    let mut prev = &empty;
    for (t, state) in schedule.states.iter().enumerate() {
        let mass = FractionalSchedule::total_mass(state);
        if mass > trace.k as f64 + FEASIBILITY_TOL {
            return Err(Error::Infeasible { time: t, msg: format!("cache mass {mass} exceeds k={}", trace.k) });
        }
        for (req, &m) in state {
            if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&m) {
                return Err(Error::Infeasible {
                    time: t,
                    msg: format!("page mass {m} for class {} page {} outside [0,1]", req.class, req.page),
                });
            }
        }
        let served = trace.requests[t];
        let got = state.get(&served).copied().unwrap_or(0.0);
        if got < 1.0 - FEASIBILITY_TOL {
            return Err(Error::Infeasible {
                time: t,
                msg: format!("requested page only has mass {got} after service"),
            });
        }
        for (req, &m) in state {
            let before = prev.get(req).copied().unwrap_or(0.0);
            if m > before {
                let w = trace.weight_table.weight(req.class);
                ledger.add_load(w * (m - before));
            }
        }
        for (req, &before) in prev {
            let after = state.get(req).copied().unwrap_or(0.0);
            if after < before {
                let w = trace.weight_table.weight(req.class);
                ledger.add_evict(w * (before - after));
            }
        }
        prev = state;
    }
    Ok(ledger)
}
