//! Seeded instance generators: cyclic and mixed-cycle position-sequence
//! families realized into traces, and uniformly random page traces.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::posseq::{check_repeat_property, realize_positions};
use crate::trace::{Request, RequestTrace, WeightTable};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Full cycles `2..m_1`, `2..m_2`, ... with random endpoints.
    Cyclic,
    /// Several interleaved active cycles extended one position at a time.
    MixedCycles,
    /// Uniformly random page choices.
    UniformRandom,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Cyclic => "cyclic",
            Family::MixedCycles => "mixed_cycles",
            Family::UniformRandom => "uniform_random",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(Family::Cyclic),
            "mixed" | "mixed_cycles" => Ok(Family::MixedCycles),
            "uniform" | "uniform_random" => Ok(Family::UniformRandom),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

/// What to generate. Weights default to `2^j` per class when not given.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub ell: usize,
    pub k: usize,
    pub pages_per_class: usize,
    pub len: usize,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Per-class interleaving probabilities; uniform when absent.
    #[serde(default)]
    pub class_skew: Option<Vec<f64>>,
}

impl GeneratorSpec {
    fn weight_table(&self) -> Result<WeightTable> {
        match &self.weights {
            Some(w) => WeightTable::new(w.clone()),
            None => WeightTable::new((0..self.ell).map(|j| (2.0f64).powi(j as i32)).collect()),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::InvalidArgument("need at least one class".into()));
        }
        if self.family != Family::UniformRandom && self.pages_per_class < 2 {
            return Err(Error::InvalidArgument("cycle families need at least 2 pages per class".into()));
        }
        if let Some(s) = &self.class_skew {
            if s.len() != self.ell || s.iter().any(|&p| p < 0.0) || s.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidArgument("bad class skew".into()));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.ell {
                return Err(Error::InvalidArgument("weights/ell mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Append-legality under the repeat property: value `v` may follow the
/// current history iff every value in `{2, ..., v-1}` occurred after the
/// last occurrence of `v`.
fn may_append(v: usize, last: &[Option<usize>]) -> bool {
    match last[v] {
        None => true,
        Some(s) => (2..v).all(|u| last[u].is_some_and(|lu| lu > s)),
    }
}

/// Random repeat-property sequence grown by the mixed-cycles mechanism:
/// at each step either a fresh cycle opens at position 2 or some active
/// cycle is extended by one, restricted to extensions that keep the repeat
/// property. Cycles whose endpoints collide merge.
pub fn random_repeat_sequence(rng: &mut impl Rng, maxpos: usize, len: usize) -> Vec<usize> {
    assert!(maxpos >= 2);
    let mut h: Vec<usize> = Vec::with_capacity(len);
    let mut last: Vec<Option<usize>> = vec![None; maxpos + 2];
    let mut active: Vec<usize> = Vec::new();
    while h.len() < len {
        let t = h.len();
        if rng.random_bool(0.05) {
            h.push(1); // a repeat of the head page; never constrained
            continue;
        }
        let mut moves: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&e| e + 1 <= maxpos && may_append(e + 1, &last))
            .map(|e| e + 1)
            .collect();
        if may_append(2, &last) {
            moves.push(2);
        }
        if moves.is_empty() {
            h.push(1);
            continue;
        }
        let v = moves[rng.random_range(0..moves.len())];
        h.push(v);
        last[v] = Some(t);
        if v == 2 && !active.contains(&2) {
            active.push(2);
        } else if v > 2 {
            if let Some(i) = active.iter().position(|&e| e + 1 == v) {
                active[i] = v;
            }
        }
        // merge cycles whose endpoints became equal
        active.sort_unstable();
        active.dedup();
    }
    h
}

/// Full-cycle sequence `2..m_1, 2..m_2, ...` for the given endpoints.
pub fn cyclic_positions(endpoints: &[usize]) -> Vec<usize> {
    let mut h = Vec::new();
    for &m in endpoints {
        h.extend(2..=m);
    }
    h
}

/// Generate a trace. Cycle families draw per-class position sequences,
/// verify the repeat property, realize them into page sequences and
/// interleave the classes by a seeded categorical draw.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<RequestTrace> {
    spec.validate()?;
    let table = spec.weight_table()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.family {
        Family::UniformRandom => {
            let mut named = Vec::with_capacity(spec.len);
            for _ in 0..spec.len {
                let class = pick_class(&mut rng, spec);
                let page = rng.random_range(0..spec.pages_per_class.max(1));
                named.push((class, format!("p{}", page + 1)));
            }
            let mut trace = RequestTrace::from_named_requests(table, spec.k, &named)?;
            trace.ensure_min_pages(spec.pages_per_class.max(1));
            Ok(trace)
        }
        Family::Cyclic | Family::MixedCycles => {
            let per_class_len = spec.len;
            let mut class_pages: Vec<Vec<usize>> = Vec::with_capacity(spec.ell);
            let mut class_universe: Vec<Vec<String>> = Vec::with_capacity(spec.ell);
            for c in 0..spec.ell {
                let h = match spec.family {
                    Family::Cyclic => {
                        let mut h = Vec::new();
                        while h.len() < per_class_len {
                            let m = rng.random_range(2..=spec.pages_per_class);
                            h.extend(2..=m);
                        }
                        h.truncate(per_class_len);
                        h
                    }
                    Family::MixedCycles => random_repeat_sequence(&mut rng, spec.pages_per_class, per_class_len),
                    Family::UniformRandom => unreachable!(),
                };
                if let Err(w) = check_repeat_property(&h) {
                    return Err(Error::RepeatViolation { t1: w.t1, t2: w.t2, value: w.value, missing: w.missing });
                }
                let pages = realize_positions(&h)?;
                let n = h.iter().copied().max().unwrap_or(0).max(1);
                class_pages.push(pages);
                class_universe.push((1..=n).map(|i| format!("c{}p{}", c + 1, i)).collect());
            }
            let mut cursors = vec![0usize; spec.ell];
            let mut requests = Vec::with_capacity(spec.len);
            for _ in 0..spec.len {
                let avail: Vec<usize> = (0..spec.ell).filter(|&c| cursors[c] < class_pages[c].len()).collect();
                if avail.is_empty() {
                    break;
                }
                let class = pick_class_among(&mut rng, spec, &avail);
                let page = class_pages[class][cursors[class]];
                cursors[class] += 1;
                requests.push(Request { class, page });
            }
            let mut trace = RequestTrace::from_indexed_requests(table, spec.k, requests, class_universe)?;
            trace.ensure_min_pages(spec.pages_per_class);
            Ok(trace)
        }
    }
}

fn pick_class(rng: &mut impl Rng, spec: &GeneratorSpec) -> usize {
    let all: Vec<usize> = (0..spec.ell).collect();
    pick_class_among(rng, spec, &all)
}

fn pick_class_among(rng: &mut impl Rng, spec: &GeneratorSpec, among: &[usize]) -> usize {
    match &spec.class_skew {
        None => among[rng.random_range(0..among.len())],
        Some(skew) => {
            let total: f64 = among.iter().map(|&c| skew[c]).sum();
            let mut x = rng.random_range(0.0..total);
            for &c in among {
                x -= skew[c];
                if x <= 0.0 {
                    return c;
                }
            }
            *among.last().unwrap()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posseq::to_position_sequence;

    fn spec(family: Family) -> GeneratorSpec {
        GeneratorSpec {
            family,
            ell: 2,
            k: 4,
            pages_per_class: 6,
            len: 60,
            weights: None,
            class_skew: None,
        }
    }

    #[test]
    fn cyclic_endpoint_example() {
        assert_eq!(cyclic_positions(&[4, 3, 5]), vec![2, 3, 4, 2, 3, 2, 3, 4, 5]);
        assert!(check_repeat_property(&cyclic_positions(&[4, 3, 5])).is_ok());
    }

    #[test]
    fn mixed_sequences_pass_the_checker() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let h = random_repeat_sequence(&mut rng, 7, 50);
            assert!(check_repeat_property(&h).is_ok(), "h={h:?}");
        }
    }

    #[test]
    fn generated_traces_extract_to_valid_position_sequences() {
        for family in [Family::Cyclic, Family::MixedCycles] {
            for seed in 0..20 {
                let trace = generate(&spec(family), seed).unwrap();
                for c in 0..trace.num_classes() {
                    let seq: Vec<usize> = trace.class_subsequence(c).iter().map(|&(_, p)| p).collect();
                    if seq.is_empty() {
                        continue;
                    }
                    let h = to_position_sequence(&seq, trace.pages_in_class(c));
                    assert!(check_repeat_property(&h).is_ok());
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&spec(Family::MixedCycles), 42).unwrap();
        let b = generate(&spec(Family::MixedCycles), 42).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec(Family::MixedCycles), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_traces_are_valid() {
        let trace = generate(&spec(Family::UniformRandom), 7).unwrap();
        assert!(trace.len() <= 60);
        assert!(RequestTrace::parse(&trace.to_text()).is_ok());
    }
}
