//! Loading a suite (config, scenario, tasks), executing it and writing
//! the run directory.
//!
//! ```text
//! <run>/manifest.json   hashes of everything below
//! <run>/config.toml     effective config
//! <run>/scenario.json
//! <run>/tasks.jsonl
//! <run>/store.jsonl     cognition snapshot the run executed against
//! <run>/report.json
//! <run>/logs/<task>.jsonl
//! <run>/pools/<task>.jsonl
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cogloop_core::backend::{CompletionBackend, HttpBackend, ScriptedBackend};
use cogloop_core::cognition::CognitionStore;
use cogloop_core::decision::{Agent, TaskRun};
use cogloop_core::emo::OverflowStats;
use cogloop_core::model::{serialize_trajectory, TaskSpec, Trajectory};
use cogloop_core::world::{Scenario, World};

use crate::report::{aggregate, Report, TaskRow};
use crate::{read, sha256_hex, write, BackendKind, ConfigError, HarnessConfig, HarnessError};

pub const CONFIG_FILE: &str = "config.toml";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const TASKS_FILE: &str = "tasks.jsonl";
pub const STORE_FILE: &str = "store.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_DIR: &str = "logs";
pub const POOL_DIR: &str = "pools";

pub fn load_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    let scenario: Scenario =
        serde_json::from_slice(&read(path)?).map_err(|e| ConfigError::parse(path, e))?;
    scenario.validate()?;
    Ok(scenario)
}

/// One TaskSpec per line; blank lines are skipped. Ids must be unique.
pub fn parse_tasks(text: &str, path: &Path) -> Result<Vec<TaskSpec>, HarnessError> {
    let mut tasks = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| HarnessError::MalformedLine {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let task: TaskSpec = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        task.validate().map_err(|e| malformed(e.to_string()))?;
        if !seen.insert(task.task_id.clone()) {
            return Err(malformed(format!("duplicate task_id {}", task.task_id)));
        }
        tasks.push(task);
    }
    Ok(tasks)
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskSpec>, HarnessError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| ConfigError::parse(path, e))?;
    parse_tasks(&text, path)
}

pub fn tasks_jsonl(tasks: &[TaskSpec]) -> Vec<u8> {
    let mut out = Vec::new();
    for task in tasks {
        serde_json::to_writer(&mut out, task).expect("task serializes");
        out.push(b'\n');
    }
    out
}

/// File-name form of a task id.
pub fn file_stem(task_id: &str) -> String {
    task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub config: HarnessConfig,
    pub scenario: Scenario,
    pub tasks: Vec<TaskSpec>,
}

impl Suite {
    pub fn load(config: &Path, scenario: &Path, tasks: &Path) -> Result<Self, HarnessError> {
        Ok(Suite {
            config: HarnessConfig::load(config)?,
            scenario: load_scenario(scenario)?,
            tasks: load_tasks(tasks)?,
        })
    }

    /// A directory holding `config.toml`, `scenario.json` and `tasks.jsonl`,
    /// such as a bundled fixture or a finished run.
    pub fn from_dir(dir: &Path) -> Result<Self, HarnessError> {
        Self::load(&dir.join(CONFIG_FILE), &dir.join(SCENARIO_FILE), &dir.join(TASKS_FILE))
    }

    pub fn seed_store(&self) -> CognitionStore {
        CognitionStore::new(self.scenario.seed_cognition())
    }

    pub fn scenario_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.scenario).expect("scenario serializes");
        out.push(b'\n');
        out
    }

    pub fn inputs_hash(&self) -> String {
        let mut bytes = self.scenario_json();
        bytes.extend(tasks_jsonl(&self.tasks));
        bytes.extend(self.config.seed.to_le_bytes());
        sha256_hex(&bytes)
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.config.to_toml().as_bytes())
    }
}

/// Result of executing a suite; runs are sorted by task id.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub runs: Vec<TaskRun>,
    pub report: Report,
}

impl SuiteRun {
    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.runs.iter().map(|r| r.trajectory.clone()).collect()
    }
}

fn http_backend(config: &HarnessConfig) -> Result<Arc<HttpBackend>, HarnessError> {
    let settings = config
        .http
        .clone()
        .ok_or_else(|| ConfigError::MissingKey("http.endpoint".into()))?
        .resolve_api_key();
    Ok(Arc::new(HttpBackend::new(settings)?))
}

/// Runs one task in a fresh world. Scripted suites get a fresh backend per
/// task, so runs are independent of scheduling.
pub fn run_task(
    suite: &Suite,
    store: &CognitionStore,
    task: &TaskSpec,
    shared: Option<&dyn CompletionBackend>,
) -> Result<TaskRun, HarnessError> {
    let world = World::from_scenario(&suite.scenario, suite.config.seed, &task.task_id)?;
    let config = suite.config.run_config(task);
    let run = match shared {
        Some(backend) => Agent::new(config, store, backend).run_task(task, world),
        None => {
            let backend = ScriptedBackend::new(suite.scenario.script_for(&task.task_id));
            let mut agent = Agent::new(config, store, &backend);
            agent.run_task(task, world)
        }
    };
    Ok(run)
}

pub fn execute_suite(suite: &Suite, store: &CognitionStore) -> Result<SuiteRun, HarnessError> {
    let http = match suite.config.backend {
        BackendKind::Http => Some(http_backend(&suite.config)?),
        BackendKind::Scripted => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(suite.config.parallel_workers)
        .build()
        .map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let results: Vec<Result<TaskRun, HarnessError>> = pool.install(|| {
        suite
            .tasks
            .par_iter()
            .map(|task| run_task(suite, store, task, http.as_deref().map(|b| b as &dyn CompletionBackend)))
            .collect()
    });
    let mut runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| a.trajectory.task.task_id.cmp(&b.trajectory.task.task_id));

    let rows: Vec<TaskRow> = runs.iter().map(|r| TaskRow::new(&r.trajectory, r.env_goal_reached)).collect();
    let mut memory = OverflowStats::default();
    for r in &runs {
        memory.add(r.memory_stats);
    }
    let report = Report {
        scenario: suite.scenario.name.clone(),
        config: suite.config.clone(),
        inputs_hash: suite.inputs_hash(),
        config_hash: suite.config_hash(),
        store_version: store.version(),
        metrics: aggregate(&rows),
        rows,
        memory,
    };
    Ok(SuiteRun { runs, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub scenario: String,
    pub inputs_hash: String,
    pub config_hash: String,
    pub store_version: u64,
    /// Relative path to sha256 of every file in the run directory.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self, HarnessError> {
        let path = run_dir.join(MANIFEST_FILE);
        serde_json::from_slice(&read(&path)?).map_err(|e| ConfigError::parse(&path, e).into())
    }
}

/// Writes every artifact of a finished suite under `dir`.
pub fn write_run(dir: &Path, suite: &Suite, store: &CognitionStore, run: &SuiteRun) -> Result<Manifest, HarnessError> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (CONFIG_FILE.into(), suite.config.to_toml().into_bytes()),
        (SCENARIO_FILE.into(), suite.scenario_json()),
        (TASKS_FILE.into(), tasks_jsonl(&suite.tasks)),
        (STORE_FILE.into(), store.export_snapshot()),
        (REPORT_FILE.into(), run.report.to_json()),
    ];
    let mut stems = BTreeSet::new();
    for r in &run.runs {
        let stem = file_stem(&r.trajectory.task.task_id);
        if !stems.insert(stem.clone()) {
            return Err(HarnessError::Invalid(format!("task ids collide on file name {stem}")));
        }
        files.push((Path::new(LOG_DIR).join(format!("{stem}.jsonl")), serialize_trajectory(&r.trajectory)));
        files.push((Path::new(POOL_DIR).join(format!("{stem}.jsonl")), r.pool.snapshot()));
    }
    let mut hashes = BTreeMap::new();
    for (rel, bytes) in &files {
        write(&dir.join(rel), bytes)?;
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        hashes.insert(key, sha256_hex(bytes));
    }
    let manifest = Manifest {
        format_version: 1,
        scenario: suite.scenario.name.clone(),
        inputs_hash: run.report.inputs_hash.clone(),
        config_hash: run.report.config_hash.clone(),
        store_version: store.version(),
        files: hashes,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write(&dir.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

/// Loads a store snapshot, or the scenario seed when no snapshot is given.
pub fn load_store(path: Option<&Path>, suite: &Suite) -> Result<CognitionStore, HarnessError> {
    match path {
        Some(p) => Ok(CognitionStore::import_snapshot(&read(p)?)?),
        None => Ok(suite.seed_store()),
    }
}

/// Execute and persist in one go.
pub fn run(dir: &Path, suite: &Suite, store: &CognitionStore) -> Result<SuiteRun, HarnessError> {
    let run = execute_suite(suite, store)?;
    write_run(dir, suite, store, &run)?;
    Ok(run)
}

/// Sorted trajectory logs of a run directory.
pub fn read_logs(run_dir: &Path) -> Result<Vec<Trajectory>, HarnessError> {
    let dir = run_dir.join(LOG_DIR);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| HarnessError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| cogloop_core::model::deserialize_trajectory(&read(p)?).map_err(HarnessError::from))
        .collect()
}
