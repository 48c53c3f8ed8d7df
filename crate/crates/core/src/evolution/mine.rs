use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cognition::{Binding, CompositeAction, CompositeStep};
use crate::model::{ActionKind, ActionRecord, OutcomeStatus, StepRef, Trajectory};

use super::{EvolutionError, Verdict, Verdicts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedComposite {
    pub candidate: CompositeAction,
    pub support: usize,
    pub success_rate: f64,
    /// Every step of every occurrence, sorted.
    pub provenance: Vec<StepRef>,
}

/// Whether a step may appear inside a mined composite. Final answers end a
/// task, nested composites are not re-mined, and unparsable selections are
/// not actions the agent chose.
pub fn mineable(record: &ActionRecord) -> bool {
    !matches!(record.kind, ActionKind::FinalAnswer | ActionKind::EmicCompositeInvoke(_))
        && record.outcome.status != OutcomeStatus::ParseError
}

fn is_contiguous_sub(short: &[ActionKind], long: &[ActionKind]) -> bool {
    short.len() < long.len() && long.windows(short.len()).any(|w| w == short)
}

/// The binding of parameter `name` at window position `i`: an output
/// reference when every occurrence reuses the same earlier payload byte for
/// byte, otherwise a composite input.
fn bind(occurrences: &[&[ActionRecord]], i: usize, name: &str) -> Binding {
    let mut agreed: Option<usize> = None;
    for window in occurrences {
        let source = window[i].parameters.get(name).and_then(|value| {
            (0..i).rev().find(|&j| window[j].outcome.payload == *value)
        });
        match (source, agreed) {
            (None, _) => return Binding::Input(format!("s{i}_{name}")),
            (Some(j), None) => agreed = Some(j),
            (Some(j), Some(k)) if j != k => return Binding::Input(format!("s{i}_{name}")),
            _ => {}
        }
    }
    match agreed {
        Some(j) => Binding::Output(j),
        None => Binding::Input(format!("s{i}_{name}")),
    }
}

fn synthesize(kinds: &[ActionKind], occurrences: &[&[ActionRecord]]) -> CompositeAction {
    let names: Vec<String> = kinds.iter().map(ActionKind::name).collect();
    let mut inputs = Vec::new();
    let steps = kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            let params: BTreeSet<&String> = occurrences.iter().flat_map(|w| w[i].parameters.keys()).collect();
            let bindings: BTreeMap<String, Binding> = params
                .into_iter()
                .map(|p| {
                    let b = bind(occurrences, i, p);
                    if let Binding::Input(name) = &b {
                        inputs.push(name.clone());
                    }
                    (p.clone(), b)
                })
                .collect();
            CompositeStep {
                kind: kind.clone(),
                bindings,
            }
        })
        .collect();
    CompositeAction {
        composite_id: names.join("+"),
        goal: format!("run {} in one action", names.join(" then ")),
        preconditions: Vec::new(),
        steps,
        expected_output_pattern: format!("the outcome of {}", names[names.len() - 1]),
        inputs,
        reliability: Default::default(),
        revision_log: Vec::new(),
    }
}

/// Frequent successful action chains across a corpus.
///
/// Windows are contiguous runs of mineable steps of length `2..=max_len`;
/// overlapping occurrences each count. An occurrence succeeds when its last
/// step was judged Fulfilled. A qualifying chain is dropped when a longer
/// qualifying chain containing it has the same support.
pub fn mine_composites(
    corpus: &[Trajectory],
    verdicts: &Verdicts,
    min_support: usize,
    min_success: f64,
    max_len: usize,
) -> Result<Vec<MinedComposite>, EvolutionError> {
    if min_support < 2 || !(2..=6).contains(&max_len) {
        return Err(EvolutionError::InvalidMiningParameters { min_support, max_len });
    }
    let mut occurrences: BTreeMap<Vec<ActionKind>, Vec<(usize, usize)>> = BTreeMap::new();
    for (t, trajectory) in corpus.iter().enumerate() {
        let records = &trajectory.records;
        for start in 0..records.len() {
            if !mineable(&records[start]) {
                continue;
            }
            for end in start + 2..=(start + max_len).min(records.len()) {
                if !mineable(&records[end - 1]) {
                    break;
                }
                let kinds: Vec<ActionKind> = records[start..end].iter().map(|r| r.kind.clone()).collect();
                occurrences.entry(kinds).or_default().push((t, start));
            }
        }
    }

    let fulfilled = |t: usize, index: usize| {
        let step = StepRef::new(corpus[t].task.task_id.clone(), corpus[t].records[index].step_index);
        verdicts.get(&step).map(|v| v.verdict) == Some(Verdict::Fulfilled)
    };
    let qualifying: Vec<(Vec<ActionKind>, usize, f64)> = occurrences
        .iter()
        .filter_map(|(kinds, occ)| {
            let support = occ.len();
            let wins = occ.iter().filter(|&&(t, s)| fulfilled(t, s + kinds.len() - 1)).count();
            let rate = wins as f64 / support as f64;
            (support >= min_support && rate >= min_success).then(|| (kinds.clone(), support, rate))
        })
        .collect();

    let mut mined: Vec<(Vec<String>, MinedComposite)> = qualifying
        .iter()
        .filter(|(kinds, support, _)| {
            !qualifying
                .iter()
                .any(|(other, s, _)| s == support && is_contiguous_sub(kinds, other))
        })
        .map(|(kinds, support, rate)| {
            let occ = &occurrences[kinds];
            let windows: Vec<&[ActionRecord]> = occ
                .iter()
                .map(|&(t, s)| &corpus[t].records[s..s + kinds.len()])
                .collect();
            let provenance: BTreeSet<StepRef> = occ
                .iter()
                .flat_map(|&(t, s)| {
                    corpus[t].records[s..s + kinds.len()]
                        .iter()
                        .map(move |r| StepRef::new(corpus[t].task.task_id.clone(), r.step_index))
                })
                .collect();
            let names = kinds.iter().map(ActionKind::name).collect();
            (
                names,
                MinedComposite {
                    candidate: synthesize(kinds, &windows),
                    support: *support,
                    success_rate: *rate,
                    provenance: provenance.into_iter().collect(),
                },
            )
        })
        .collect();
    mined.sort_by(|(na, a), (nb, b)| b.support.cmp(&a.support).then_with(|| na.cmp(nb)));
    Ok(mined.into_iter().map(|(_, m)| m).collect())
}
