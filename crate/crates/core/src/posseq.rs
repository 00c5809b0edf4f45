//! Position sequences: extraction from traces, the repeat property that
//! characterizes them, the inverse construction, and the amortized
//! convexity counting check.
//!
//! Position sequences are serialized as whitespace-separated integers.

use crate::belady::BeladyRanking;
use crate::error::Error;
use crate::oracle::SeqOracle;
use crate::trace::{RequestTrace, WeightTable};
use crate::Result;

/// Witness of a repeat-property violation: `h[t1] == h[t2]` (1-based) but
/// `missing` does not occur strictly between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepeatWitness {
    pub t1: usize,
    pub t2: usize,
    pub value: usize,
    pub missing: usize,
}

/// Positions in the page ranking at which the requests of one class land,
/// read off just before each request.
pub fn to_position_sequence(class_seq: &[usize], n_pages: usize) -> Vec<usize> {
    let oracle = SeqOracle::new(class_seq, n_pages);
    let mut ranking = BeladyRanking::new(n_pages);
    let mut h = Vec::with_capacity(class_seq.len());
    for (t, &p) in class_seq.iter().enumerate() {
        h.push(ranking.position_of(p));
        ranking.update(p, t, &oracle).expect("page in ranking");
    }
    h
}

/// Check the repeat property: between any two occurrences of a value `m`,
/// every element of `{2, ..., m-1}` occurs at least once. It suffices to
/// check consecutive occurrences.
pub fn check_repeat_property(h: &[usize]) -> std::result::Result<(), RepeatWitness> {
    let maxv = h.iter().copied().max().unwrap_or(0);
    let mut last_occ: Vec<Option<usize>> = vec![None; maxv + 1];
    // seen_at[v] = last index where value v occurred, for gap membership tests
    for (i, &v) in h.iter().enumerate() {
        if v == 0 {
            continue; // positions are >= 1; treat 0 defensively as absent
        }
        if let Some(j) = last_occ[v] {
            for need in 2..v {
                let ok = h[j + 1..i].contains(&need);
                if !ok {
                    return Err(RepeatWitness { t1: j + 1, t2: i + 1, value: v, missing: need });
                }
            }
        }
        last_occ[v] = Some(i);
    }
    Ok(())
}

/// Realize a repeat-property sequence as a page sequence over
/// `n = max(h)` pages whose extracted position sequence equals `h` exactly.
///
/// The construction keeps the invariant that the page in position 1 is the
/// one requested farthest in the future among any prefix it participates
/// in, so every ranking update degenerates to the swap of positions 1 and
/// `h_t`.
pub fn realize_positions(h: &[usize]) -> Result<Vec<usize>> {
    if let Err(w) = check_repeat_property(h) {
        return Err(Error::RepeatViolation { t1: w.t1, t2: w.t2, value: w.value, missing: w.missing });
    }
    let n = h.iter().copied().max().unwrap_or(0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut seq = Vec::with_capacity(h.len());
    for &m in h {
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!("position {m} out of range 1..={n}")));
        }
        seq.push(order[m - 1]);
        if m > 1 {
            order.swap(0, m - 1);
        }
    }
    Ok(seq)
}

/// [`realize_positions`] packaged as a single-class trace; the universe is
/// emitted in construction order so re-extraction reproduces `h`.
pub fn realize_position_sequence(h: &[usize], weight: f64, k: usize) -> Result<RequestTrace> {
    let seq = realize_positions(h)?;
    let n = h.iter().copied().max().unwrap_or(0);
    let universe: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
    let requests = seq
        .into_iter()
        .map(|p| crate::trace::Request { class: 0, page: p })
        .collect();
    RequestTrace::from_indexed_requests(WeightTable::new(vec![weight])?, k, requests, vec![universe])
}

/// Exact counting form of amortized convexity on one interval: occurrences
/// of `m` in `h[range]` are at least occurrences of `m + 1` minus one.
pub fn check_amortized_convexity(h: &[usize], range: std::ops::Range<usize>, m: usize) -> bool {
    assert!(m >= 2, "amortized convexity is only meaningful for m >= 2");
    let window = &h[range];
    let cm = window.iter().filter(|&&v| v == m).count();
    let cm1 = window.iter().filter(|&&v| v == m + 1).count();
    cm + 1 >= cm1
}

/// Amortized convexity over every interval and every position at once:
/// equivalent to requiring at least one `m` between consecutive occurrences
/// of `m + 1`, for every `m >= 2`.
pub fn check_amortized_convexity_all(h: &[usize]) -> bool {
    let maxv = h.iter().copied().max().unwrap_or(0);
    for m in 2..maxv {
        let mut since_last: Option<bool> = None; // seen m since last m+1?
        for &v in h {
            if v == m + 1 {
                if since_last == Some(false) {
                    return false;
                }
                since_last = Some(false);
            } else if v == m && since_last.is_some() {
                since_last = Some(true);
            }
        }
    }
    true
}

pub fn format_positions(h: &[usize]) -> String {
    h.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn parse_positions(text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse { line: 1, msg: format!("bad position {s:?}") })
        })
        .collect()
}
