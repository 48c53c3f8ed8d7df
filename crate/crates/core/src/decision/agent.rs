use std::fmt;

use crate::backend::{
    CallSite, CompletionBackend, CompletionRequest, GenerationLimits, MeteredBackend, Message, ScriptedBackend,
};
use crate::cognition::CognitionStore;
use crate::emo::{EmoConfig, MemoryPool, Orchestrator, OverflowStats};
use crate::model::{
    ActionKind, ActionRecord, FinalStatus, Outcome, Parameters, RunConfig, TaskSpec, Trajectory,
};
use crate::world::{normalize_key, NestedRunner, Scenario, World};

use super::execute::{execute, ExecContext};
use super::parse::{parse_selection, Selection};
use super::prompt::render_select_prompt;
use super::space::{build_action_space, ActionDescriptor};

pub const RAW_OUTPUT_PARAM: &str = "raw_output";
const PARSE_FAILURE_INTENTION: &str = "select the next action";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Select,
    Execute,
    Update,
}

/// One line of the live trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub phase: Phase,
    pub task_id: String,
    pub step_index: usize,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let phase = match self.phase {
            Phase::Select => "SELECT",
            Phase::Execute => "EXECUTE",
            Phase::Update => "UPDATE",
        };
        write!(f, "{phase} {}#{} {}", self.task_id, self.step_index, self.detail)
    }
}

/// Result of one task run.
#[derive(Debug, Clone)]
pub struct TaskRun {
    pub trajectory: Trajectory,
    pub pool: MemoryPool,
    pub memory_stats: OverflowStats,
    /// Goal predicate of the mini environment after the run, if one is loaded.
    pub env_goal_reached: Option<bool>,
}

pub fn answers_match(answer: &str, gold: &str) -> bool {
    normalize_key(answer) == normalize_key(gold)
}

type Observer<'a> = Box<dyn FnMut(&TraceEvent) + 'a>;

/// Runs SEU loops over one cognition store and backend.
pub struct Agent<'a> {
    config: RunConfig,
    store: &'a CognitionStore,
    backend: &'a dyn CompletionBackend,
    depth: usize,
    observer: Option<Observer<'a>>,
}

impl<'a> Agent<'a> {
    pub fn new(config: RunConfig, store: &'a CognitionStore, backend: &'a dyn CompletionBackend) -> Self {
        Agent {
            config,
            store,
            backend,
            depth: 0,
            observer: None,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_observer(mut self, observer: impl FnMut(&TraceEvent) + 'a) -> Self {
        self.observer = Some(Box::new(observer));
        self
    }

    fn emit(&mut self, phase: Phase, task: &TaskSpec, step_index: usize, detail: String) {
        if let Some(observer) = self.observer.as_mut() {
            observer(&TraceEvent {
                phase,
                task_id: task.task_id.clone(),
                step_index,
                detail,
            });
        }
    }

    fn limits(&self) -> GenerationLimits {
        GenerationLimits {
            max_tokens: self.config.max_generation_tokens,
            temperature: self.config.temperature,
        }
    }

    /// Select with one repair round. `Err` carries the last raw output and
    /// the reason it was rejected.
    fn select(
        &self,
        backend: &dyn CompletionBackend,
        prompt: &str,
        space: &[ActionDescriptor],
    ) -> Result<Selection, (String, String)> {
        let limits = self.limits();
        let first = CompletionRequest::new(CallSite::Select, prompt, limits);
        let (raw, reason) = match backend.complete(&first) {
            Ok(c) => match parse_selection(&c.text, space) {
                Ok(s) => return Ok(s),
                Err(e) => (c.text, e.to_string()),
            },
            Err(e) => (String::new(), e.to_string()),
        };
        let mut repair = first;
        repair.messages.push(Message::assistant(raw.clone()));
        repair.messages.push(Message::user(format!(
            "Your answer could not be used: {reason}. Reply again with exactly one line in the required format."
        )));
        match backend.complete(&repair) {
            Ok(c) => parse_selection(&c.text, space).map_err(|e| (c.text, e.to_string())),
            Err(e) => Err((raw, e.to_string())),
        }
    }

    /// Runs the Select-Execute-Update loop until FinalAnswer or
    /// `config.max_steps` steps.
    pub fn run_task(&mut self, task: &TaskSpec, mut world: World) -> TaskRun {
        let metered = MeteredBackend::new(self.backend);
        let mut emo = Orchestrator::new(EmoConfig::from_run_config(&self.config));
        let mut trajectory = Trajectory::begin(task.clone(), self.config.clone(), self.store.version());
        let tags = task.reliability_tags();
        let mut nested = NestedAgentRunner {
            config: self.config.clone(),
        };
        let mut clock = 0u64;
        let mut final_answer = None;

        for step_index in 0..self.config.max_steps {
            let pinned = self.store.pin();
            let space = build_action_space(&pinned, &world, &tags);
            let memory = emo.working_memory(&task.instruction, &metered);
            let prompt = render_select_prompt(task, &memory, &space);
            let start_tick = clock;

            let selection = self.select(&metered, &prompt, &space);
            let (kind, parameters, intention, execution) = match selection {
                Ok(selection) => {
                    self.emit(Phase::Select, task, step_index, format!("{} v{}", selection.kind, pinned.version));
                    let mut ctx = ExecContext {
                        world: &mut world,
                        backend: &metered,
                        cognition: &pinned.state,
                        limits: self.limits(),
                        task,
                        step_index,
                        depth: self.depth,
                        depth_cap: self.config.delegation_depth_cap,
                        runner: &mut nested,
                    };
                    let execution = execute(&selection, &mut ctx);
                    (selection.kind, selection.parameters, selection.intention, Ok(execution))
                }
                Err((raw, reason)) => {
                    self.emit(Phase::Select, task, step_index, format!("parse error: {reason}"));
                    let params = Parameters::from([(RAW_OUTPUT_PARAM.to_string(), raw)]);
                    let failure = Outcome::parse_error(format!("selection unparsable after repair: {reason}"));
                    (ActionKind::EmicGenerate, params, PARSE_FAILURE_INTENTION.to_string(), Err(failure))
                }
            };
            let (outcome, ticks, terminate) = match execution {
                Ok(e) => (e.outcome, e.ticks, e.terminate),
                Err(failure) => (failure, 1, false),
            };
            self.emit(Phase::Execute, task, step_index, format!("{} {}", kind, outcome.status));
            clock += ticks.max(1);
            let record = ActionRecord {
                step_index,
                intention,
                kind,
                parameters,
                outcome,
                start_tick,
                end_tick: clock,
            };
            if terminate {
                final_answer = Some(record.outcome.payload.clone());
            }
            trajectory
                .append_record(record.clone())
                .expect("the loop produces contiguous, well-formed records");
            let _ = emo.ingest(&record, &metered);
            self.emit(Phase::Update, task, step_index, format!("records={} pool={}", trajectory.len(), emo.pool().len()));
            if terminate {
                break;
            }
        }

        let env_goal_reached = world.env().map(|env| env.goal_reached());
        let status = match &final_answer {
            None => FinalStatus::CapHit,
            Some(answer) => {
                let gold_ok = task.gold_answer.as_deref().is_none_or(|g| answers_match(answer, g));
                let env_ok = !task.embodied || env_goal_reached.unwrap_or(true);
                if gold_ok && env_ok {
                    FinalStatus::Solved
                } else {
                    FinalStatus::Failed
                }
            }
        };
        trajectory.finish(status, final_answer);
        trajectory.usage = metered.total_usage();
        let memory_stats = emo.stats();
        TaskRun {
            trajectory,
            pool: emo.into_pool(),
            memory_stats,
            env_goal_reached,
        }
    }
}

/// Runs peers that are agents: each gets a fresh world, a cognition store
/// seeded from its scenario and a scripted backend over its script.
struct NestedAgentRunner {
    config: RunConfig,
}

impl NestedRunner for NestedAgentRunner {
    fn run_nested(&mut self, scenario: &Scenario, max_steps: Option<usize>, task: TaskSpec, depth: usize) -> Option<String> {
        let world = World::from_scenario(scenario, self.config.seed, &task.task_id).ok()?;
        let store = CognitionStore::new(scenario.seed_cognition());
        let backend = ScriptedBackend::new(scenario.script_for(&task.task_id));
        let mut config = self.config.clone();
        if let Some(cap) = max_steps {
            config.max_steps = cap;
        }
        let run = Agent::new(config, &store, &backend).with_depth(depth).run_task(&task, world);
        run.trajectory.final_answer
    }
}
