//! Brute-force reference for composite mining, kept deliberately naive:
//! every window is rebuilt and compared element by element, and nothing is
//! shared with the miner beyond the public data types.

use std::collections::{BTreeMap, BTreeSet};

use cogloop_core::cognition::Binding;
use cogloop_core::evolution::{Verdict, Verdicts};
use cogloop_core::model::{ActionKind, ActionRecord, OutcomeStatus, StepRef, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComposite {
    pub names: Vec<String>,
    pub support: usize,
    pub success_rate: f64,
    /// (step position, parameter) -> binding
    pub bindings: BTreeMap<(usize, String), Binding>,
    pub provenance: Vec<StepRef>,
}

fn usable(r: &ActionRecord) -> bool {
    match r.kind {
        ActionKind::FinalAnswer | ActionKind::EmicCompositeInvoke(_) => false,
        _ => r.outcome.status != OutcomeStatus::ParseError,
    }
}

fn window_at(t: &Trajectory, start: usize, len: usize) -> Option<Vec<ActionKind>> {
    if start + len > t.records.len() {
        return None;
    }
    let mut kinds = Vec::new();
    for k in 0..len {
        let r = &t.records[start + k];
        if !usable(r) {
            return None;
        }
        kinds.push(r.kind.clone());
    }
    Some(kinds)
}

fn contains(long: &[ActionKind], short: &[ActionKind]) -> bool {
    if short.len() >= long.len() {
        return false;
    }
    for off in 0..=long.len() - short.len() {
        let mut same = true;
        for k in 0..short.len() {
            if long[off + k] != short[k] {
                same = false;
            }
        }
        if same {
            return true;
        }
    }
    false
}

type Stat = (Vec<ActionKind>, Vec<(usize, usize)>, f64);

pub fn enumerate(
    corpus: &[Trajectory],
    verdicts: &Verdicts,
    min_support: usize,
    min_success: f64,
    max_len: usize,
) -> Vec<OracleComposite> {
    let mut candidates: BTreeSet<Vec<ActionKind>> = BTreeSet::new();
    for t in corpus {
        for start in 0..t.records.len() {
            for len in 2..=max_len {
                if let Some(w) = window_at(t, start, len) {
                    candidates.insert(w);
                }
            }
        }
    }

    // (chain, occurrences as (trajectory, start), success rate)
    let mut stats: Vec<Stat> = Vec::new();
    for cand in &candidates {
        let mut occ = Vec::new();
        for (ti, t) in corpus.iter().enumerate() {
            for start in 0..t.records.len() {
                if window_at(t, start, cand.len()).as_ref() == Some(cand) {
                    occ.push((ti, start));
                }
            }
        }
        let mut wins = 0;
        for &(ti, start) in &occ {
            let last = &corpus[ti].records[start + cand.len() - 1];
            let key = StepRef::new(corpus[ti].task.task_id.clone(), last.step_index);
            if let Some(v) = verdicts.get(&key) {
                if v.verdict == Verdict::Fulfilled {
                    wins += 1;
                }
            }
        }
        let rate = wins as f64 / occ.len() as f64;
        if occ.len() >= min_support && rate >= min_success {
            stats.push((cand.clone(), occ, rate));
        }
    }

    let mut out = Vec::new();
    for (cand, occ, rate) in &stats {
        let mut dominated = false;
        for (other, other_occ, _) in &stats {
            if other_occ.len() == occ.len() && contains(other, cand) {
                dominated = true;
            }
        }
        if dominated {
            continue;
        }
        let mut bindings = BTreeMap::new();
        for i in 0..cand.len() {
            let mut names = BTreeSet::new();
            for &(ti, start) in occ {
                for k in corpus[ti].records[start + i].parameters.keys() {
                    names.insert(k.clone());
                }
            }
            for name in names {
                // latest earlier step per occurrence whose payload equals the value
                let mut sources = Vec::new();
                for &(ti, start) in occ {
                    let value = corpus[ti].records[start + i].parameters.get(&name);
                    let mut found = None;
                    if let Some(value) = value {
                        for j in 0..i {
                            if &corpus[ti].records[start + j].outcome.payload == value {
                                found = Some(j);
                            }
                        }
                    }
                    sources.push(found);
                }
                let first = sources[0];
                let binding = match first {
                    Some(j) if sources.iter().all(|s| *s == Some(j)) => Binding::Output(j),
                    _ => Binding::Input(format!("s{i}_{name}")),
                };
                bindings.insert((i, name), binding);
            }
        }
        let mut provenance = BTreeSet::new();
        for &(ti, start) in occ {
            for k in 0..cand.len() {
                let r = &corpus[ti].records[start + k];
                provenance.insert(StepRef::new(corpus[ti].task.task_id.clone(), r.step_index));
            }
        }
        out.push(OracleComposite {
            names: cand.iter().map(|k| k.name()).collect(),
            support: occ.len(),
            success_rate: *rate,
            bindings,
            provenance: provenance.into_iter().collect(),
        });
    }
    out.sort_by(|a, b| b.support.cmp(&a.support).then(a.names.cmp(&b.names)));
    out
}
