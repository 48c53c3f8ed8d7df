//! The offline evolution step between run batches.

use std::path::Path;

use serde::{Deserialize, Serialize};

use cogloop_core::backend::{CompletionBackend, GenerationLimits, HttpBackend, ScriptedBackend};
use cogloop_core::cognition::{CognitionStore, Revision, RevisionEdit, RevisionTarget, Validation};
use cogloop_core::emo::MemoryPool;
use cogloop_core::evolution::{align_corpus, distill_skill, evolution_cycle, tune_fold_threshold, CycleReport};
use cogloop_core::model::Trajectory;

use crate::report::Report;
use crate::suite::{file_stem, read_logs, Suite, POOL_DIR, REPORT_FILE, STORE_FILE};
use crate::{read, write, BackendKind, ConfigError, HarnessError};

pub const REVISIONS_FILE: &str = "revisions.jsonl";
pub const EVOLUTION_REPORT_FILE: &str = "evolution.txt";
pub const EVOLUTION_JSON_FILE: &str = "evolution.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOutcome {
    pub cycle: CycleReport,
    pub skills_committed: usize,
    pub fold_threshold_before: usize,
    pub fold_threshold_after: usize,
}

impl EvolutionOutcome {
    pub fn render(&self) -> String {
        let mut text = self.cycle.render();
        text.push_str(&format!("\nskills distilled: {}", self.skills_committed));
        text.push_str(&format!(
            "\nfold threshold: {} -> {}",
            self.fold_threshold_before, self.fold_threshold_after
        ));
        text
    }
}

/// Commits one distilled skill per folded episode whose steps were all
/// judged positively. Episodes that do not qualify are skipped.
pub fn distill_from_pools(
    corpus: &[Trajectory],
    pools: &[MemoryPool],
    store: &mut CognitionStore,
    analyzer: Option<&dyn CompletionBackend>,
    limits: GenerationLimits,
) -> usize {
    let verdicts = align_corpus(corpus, analyzer, limits);
    let mut committed = 0;
    for (trajectory, pool) in corpus.iter().zip(pools) {
        for episode in pool.episodes() {
            let Ok(skill) = distill_skill(trajectory, episode, &verdicts, analyzer, limits) else {
                continue;
            };
            let provenance = trajectory
                .records
                .iter()
                .filter(|r| episode.covers(r.step_index))
                .map(|r| cogloop_core::model::StepRef::new(trajectory.task.task_id.clone(), r.step_index))
                .collect();
            let revision = Revision::propose(
                RevisionTarget::Skill(skill.skill_id.clone()),
                RevisionEdit::AddSkill { skill },
                provenance,
            );
            if store.validate(&revision) == Validation::Accepted && store.commit(revision).is_ok() {
                committed += 1;
            }
        }
    }
    committed
}

/// Evolves the store a run executed against from that run's logs and
/// writes the new snapshot, the committed revisions and a report to
/// `out_dir`.
pub fn evolve(run_dir: &Path, out_dir: &Path, distill: bool) -> Result<(CognitionStore, EvolutionOutcome), HarnessError> {
    let suite = Suite::from_dir(run_dir)?;
    let mut store = CognitionStore::import_snapshot(&read(&run_dir.join(STORE_FILE))?)?;
    let corpus = read_logs(run_dir)?;
    let report_path = run_dir.join(REPORT_FILE);
    let report: Report =
        serde_json::from_slice(&read(&report_path)?).map_err(|e| ConfigError::parse(&report_path, e))?;

    let scripted;
    let http;
    let analyzer: &dyn CompletionBackend = match suite.config.backend {
        BackendKind::Scripted => {
            scripted = ScriptedBackend::new(suite.scenario.script.clone());
            &scripted
        }
        BackendKind::Http => {
            let settings = suite
                .config
                .http
                .clone()
                .ok_or_else(|| ConfigError::MissingKey("http.endpoint".into()))?
                .resolve_api_key();
            http = HttpBackend::new(settings)?;
            &http
        }
    };
    let limits = GenerationLimits {
        max_tokens: suite.config.max_generation_tokens,
        temperature: suite.config.temperature,
    };
    let first_new = store.revisions().len();
    let cycle = evolution_cycle(&corpus, &mut store, Some(analyzer), &suite.config.evolution, limits)?;
    let skills_committed = if distill {
        let mut pools = Vec::new();
        for t in &corpus {
            let path = run_dir.join(POOL_DIR).join(format!("{}.jsonl", file_stem(&t.task.task_id)));
            pools.push(MemoryPool::from_snapshot(&read(&path)?)?);
        }
        distill_from_pools(&corpus, &pools, &mut store, Some(analyzer), limits)
    } else {
        0
    };
    let outcome = EvolutionOutcome {
        cycle,
        skills_committed,
        fold_threshold_before: suite.config.fold_threshold,
        fold_threshold_after: tune_fold_threshold(suite.config.fold_threshold, &report.memory, &suite.config.evolution),
    };

    let mut revisions = Vec::new();
    for r in &store.revisions()[first_new..] {
        serde_json::to_writer(&mut revisions, r).expect("revision serializes");
        revisions.push(b'\n');
    }
    write(&out_dir.join(STORE_FILE), &store.export_snapshot())?;
    write(&out_dir.join(REVISIONS_FILE), &revisions)?;
    write(&out_dir.join(EVOLUTION_REPORT_FILE), format!("{}\n", outcome.render()).as_bytes())?;
    let mut json = serde_json::to_vec_pretty(&outcome).expect("outcome serializes");
    json.push(b'\n');
    write(&out_dir.join(EVOLUTION_JSON_FILE), &json)?;
    let mut tuned = suite.config.clone();
    tuned.fold_threshold = outcome.fold_threshold_after;
    write(&out_dir.join(crate::suite::CONFIG_FILE), tuned.to_toml().as_bytes())?;
    Ok((store, outcome))
}
