//! Random small corpora for the miner equivalence suite.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use cogloop_core::evolution::{AlignmentVerdict, Verdict, Verdicts};
use cogloop_core::model::{
    ActionKind, ActionRecord, FinalStatus, Outcome, Parameters, RunConfig, StepRef, TaskSpec, Trajectory, Usage,
};

pub struct Case {
    pub corpus: Vec<Trajectory>,
    pub verdicts: Verdicts,
    pub min_support: usize,
    pub min_success: f64,
    pub max_len: usize,
}

const PAYLOADS: [&str; 4] = ["p0", "p1", "p2", "p3"];

fn kind(rng: &mut StdRng) -> ActionKind {
    match rng.random_range(0..12) {
        0 => ActionKind::FinalAnswer,
        1 => ActionKind::EmicCompositeInvoke("c".into()),
        2 => ActionKind::EticAsk("peer".into()),
        3 => ActionKind::EmicGenerate,
        n => ActionKind::EmicToolCall(["a", "b", "c"][n % 3].into()),
    }
}

pub fn case(seed: u64) -> Case {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_traj = rng.random_range(1..=20);
    let mut corpus = Vec::new();
    let mut verdicts = Verdicts::new();
    for t in 0..n_traj {
        let task_id = format!("task{t}");
        let n_steps = rng.random_range(0..=8);
        let mut records: Vec<ActionRecord> = Vec::new();
        for i in 0..n_steps {
            let mut parameters = Parameters::new();
            for name in ["x", "y"] {
                if rng.random_bool(0.6) {
                    let value = if !records.is_empty() && rng.random_bool(0.5) {
                        let j = rng.random_range(0..records.len());
                        records[j].outcome.payload.clone()
                    } else {
                        format!("lit{}", rng.random_range(0..3))
                    };
                    parameters.insert(name.to_string(), value);
                }
            }
            let payload = PAYLOADS[rng.random_range(0..PAYLOADS.len())];
            let outcome = match rng.random_range(0..10) {
                0 => Outcome::parse_error(payload),
                1 | 2 => Outcome::tool_error(payload),
                _ => Outcome::success(payload),
            };
            let verdict = match rng.random_range(0..4) {
                0 => Verdict::Partial,
                1 => Verdict::Violated,
                _ => Verdict::Fulfilled,
            };
            let step = StepRef::new(task_id.clone(), i);
            if rng.random_bool(0.95) {
                verdicts.insert(
                    step.clone(),
                    AlignmentVerdict {
                        step_ref: step,
                        verdict,
                        rationale: String::new(),
                    },
                );
            }
            records.push(ActionRecord {
                step_index: i,
                intention: "step".into(),
                kind: kind(&mut rng),
                parameters,
                outcome,
                start_tick: i as u64,
                end_tick: i as u64 + 1,
            });
        }
        corpus.push(Trajectory {
            task: TaskSpec::new(task_id, "random task"),
            records,
            final_status: FinalStatus::CapHit,
            final_answer: None,
            config_snapshot: RunConfig::default(),
            cognition_version: 0,
            usage: Usage::default(),
        });
    }
    Case {
        corpus,
        verdicts,
        min_support: rng.random_range(2..=4),
        min_success: [0.0, 0.5, 0.75, 1.0][rng.random_range(0..4)],
        max_len: rng.random_range(2..=6),
    }
}
