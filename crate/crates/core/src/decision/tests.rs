use std::collections::BTreeMap;

use crate::backend::{CallSite, ScriptedBackend, ScriptedScenario};
use crate::cognition::{
    Binding, CognitionStore, CompositeAction, CompositeStep, Revision, RevisionEdit, RevisionTarget,
};
use crate::emo::{assemble_working_memory, ingest_step, MemoryPool, SelectorDecision, StepRecord, WorkingMemory};
use crate::model::{
    serialize_trajectory, ActionKind, FinalStatus, Outcome, OutcomeStatus, Parameters, RunConfig, StepRef,
    TaskSpec, TokenCount,
};
use crate::world::{NestedRunner, PeerResponder, PeerSpec, Scenario, ToolHandler, ToolSpec, World};

use super::*;

fn search_tools() -> Vec<ToolSpec> {
    vec![
        ToolSpec::new(
            "search",
            "search a small encyclopedia",
            ToolHandler::Lookup {
                table: BTreeMap::from([(
                    "alan turing".to_string(),
                    "Alan Turing was born in 1912. He founded computer science.".to_string(),
                )]),
                fallback: None,
            },
        ),
        ToolSpec::new("extract", "return the first sentence of a text", ToolHandler::Extract),
        ToolSpec::new("broken", "always fails", ToolHandler::Fail { message: "backend down".into() }),
    ]
}

fn scenario() -> Scenario {
    Scenario {
        name: "decision".into(),
        tools: search_tools(),
        ..Scenario::default()
    }
}

struct NoNesting;
impl NestedRunner for NoNesting {
    fn run_nested(&mut self, _: &Scenario, _: Option<usize>, _: TaskSpec, _: usize) -> Option<String> {
        None
    }
}

fn composite(id: &str, steps: Vec<(&str, Vec<(&str, Binding)>)>) -> Revision {
    Revision::propose(
        RevisionTarget::Composite(id.into()),
        RevisionEdit::AddComposite {
            composite: CompositeAction {
                composite_id: id.into(),
                goal: "chain".into(),
                preconditions: vec![],
                steps: steps
                    .into_iter()
                    .map(|(tool, bindings)| CompositeStep {
                        kind: ActionKind::EmicToolCall(tool.into()),
                        bindings: bindings.into_iter().map(|(k, b)| (k.to_string(), b)).collect(),
                    })
                    .collect(),
                expected_output_pattern: "text".into(),
                inputs: vec!["s0_query".into()],
                reliability: Default::default(),
                revision_log: vec![],
            },
        },
        vec![StepRef::new("t", 0)],
    )
}

fn run_selection(store: &CognitionStore, world: &mut World, selection: &Selection) -> Execution {
    let backend = ScriptedBackend::new(ScriptedScenario::new());
    let task = TaskSpec::new("t", "who is alan turing");
    let pinned = store.pin();
    let mut runner = NoNesting;
    let mut ctx = ExecContext {
        world,
        backend: &backend,
        cognition: &pinned.state,
        limits: Default::default(),
        task: &task,
        step_index: 0,
        depth: 0,
        depth_cap: 2,
        runner: &mut runner,
    };
    execute(selection, &mut ctx)
}

#[test]
fn minimum_action_space() {
    let world = World::from_scenario(&Scenario::default(), 0, "t").unwrap();
    let store = CognitionStore::new(Default::default());
    let names: Vec<String> = build_action_space(&store.pin(), &world, &[]).into_iter().map(|d| d.name).collect();
    assert_eq!(names, vec!["Generate", "FinalAnswer"]);
}

#[test]
fn space_counts_and_order() {
    let s = Scenario {
        name: "s".into(),
        tools: search_tools()[..2].to_vec(),
        peers: vec![PeerSpec {
            peer_id: "oracle".into(),
            expertise: BTreeMap::new(),
            responder: PeerResponder::Table {
                table: BTreeMap::new(),
                default: None,
            },
        }],
        ..Scenario::default()
    };
    let world = World::from_scenario(&s, 0, "t").unwrap();
    let mut store = CognitionStore::new(s.seed_cognition());
    let names = |store: &CognitionStore| -> Vec<String> {
        build_action_space(&store.pin(), &world, &[]).into_iter().map(|d| d.name).collect()
    };
    assert_eq!(
        names(&store),
        vec!["Generate", "extract", "search", "ask:oracle", "delegate:oracle", "FinalAnswer"]
    );
    store
        .commit(composite(
            "search+extract",
            vec![
                ("search", vec![("query", Binding::Input("s0_query".into()))]),
                ("extract", vec![("text", Binding::Output(0))]),
            ],
        ))
        .unwrap();
    let after = names(&store);
    assert_eq!(after.len(), 7);
    assert_eq!(after[3], "composite:search+extract");
}

#[test]
fn descriptors_share_one_version() {
    let world = World::from_scenario(&scenario(), 0, "t").unwrap();
    let mut store = CognitionStore::new(scenario().seed_cognition());
    store
        .commit(Revision::propose(
            RevisionTarget::Tool("search".into()),
            RevisionEdit::AddPrecondition { text: "name a person".into() },
            vec![StepRef::new("t", 0)],
        ))
        .unwrap();
    let space = build_action_space(&store.pin(), &world, &["qa".into()]);
    assert!(space.iter().all(|d| d.cognition_version == 1));
    let search = space.iter().find(|d| d.name == "search").unwrap();
    assert!(search.rendered_knowledge.contains("precondition: name a person"));
}

fn memory(n: usize) -> WorkingMemory {
    let mut pool = MemoryPool::new();
    for i in 0..n {
        let record = StepRecord::new(i, "probe", ActionKind::EmicGenerate, Parameters::new(), Outcome::success("x"));
        ingest_step(&mut pool, record, None, Default::default()).unwrap();
    }
    let decision = SelectorDecision::uniform(&pool, crate::emo::Representation::Summary);
    assemble_working_memory(&pool, &decision, TokenCount(10_000)).unwrap()
}

#[test]
fn prompt_layout() {
    let world = World::from_scenario(&scenario(), 0, "t").unwrap();
    let store = CognitionStore::new(scenario().seed_cognition());
    let space = build_action_space(&store.pin(), &world, &[]);
    let task = TaskSpec::new("t", "who is alan turing");

    let empty = render_select_prompt(&task, &WorkingMemory::default(), &space);
    assert!(empty.contains("## Working memory\nno prior steps\n"));
    assert_eq!(empty, render_select_prompt(&task, &WorkingMemory::default(), &space));
    let order: Vec<usize> = ["## Task", "## Working memory", "## Available actions", "## Output format"]
        .iter()
        .map(|h| empty.find(h).unwrap())
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));

    let full = render_select_prompt(&task, &memory(3), &space);
    let labels: Vec<usize> = (0..3).map(|i| full.find(&format!("[step {i} | summary]")).unwrap()).collect();
    assert!(labels.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn final_answer_terminates() {
    let store = CognitionStore::new(Default::default());
    let mut world = World::from_scenario(&Scenario::default(), 0, "t").unwrap();
    let selection = Selection {
        kind: ActionKind::FinalAnswer,
        parameters: Parameters::from([("answer".to_string(), "42".to_string())]),
        intention: "finish".into(),
    };
    let e = run_selection(&store, &mut world, &selection);
    assert_eq!(e.outcome, Outcome::success("42"));
    assert!(e.terminate);
}

#[test]
fn composite_aborts_at_failed_sub_step() {
    let mut s = scenario();
    s.tools.push(ToolSpec::new("tail", "flaky tail", ToolHandler::Echo).with_failure(0.5, 1));
    let mut store = CognitionStore::new(s.seed_cognition());
    store
        .commit(composite(
            "c3",
            vec![
                ("search", vec![("query", Binding::Input("s0_query".into()))]),
                ("broken", vec![]),
                ("tail", vec![("text", Binding::Output(0))]),
            ],
        ))
        .unwrap();
    let mut world = World::from_scenario(&s, 0, "t").unwrap();
    let selection = Selection {
        kind: ActionKind::EmicCompositeInvoke("c3".into()),
        parameters: Parameters::from([("s0_query".to_string(), "alan turing".to_string())]),
        intention: "run it".into(),
    };
    let e = run_selection(&store, &mut world, &selection);
    assert_eq!(e.outcome.status, OutcomeStatus::ToolError);
    assert!(e.outcome.payload.contains("sub-step 1 (broken)"), "{}", e.outcome.payload);
    assert!(world.injector("tail").unwrap().draw_log().is_empty());
}

#[test]
fn composite_forwards_payload_verbatim() {
    let mut store = CognitionStore::new(scenario().seed_cognition());
    store
        .commit(composite(
            "search+echo",
            vec![
                ("search", vec![("query", Binding::Input("s0_query".into()))]),
                ("extract", vec![("text", Binding::Output(0))]),
            ],
        ))
        .unwrap();
    let mut world = World::from_scenario(&scenario(), 0, "t").unwrap();
    let selection = Selection {
        kind: ActionKind::EmicCompositeInvoke("search+echo".into()),
        parameters: Parameters::from([("s0_query".to_string(), "alan turing".to_string())]),
        intention: "run it".into(),
    };
    let e = run_selection(&store, &mut world, &selection);
    // search payload: "Alan Turing was born in 1912. He founded computer science."
    assert_eq!(e.outcome, Outcome::success("Alan Turing was born in 1912."));
}

fn run(script: ScriptedScenario, scenario: &Scenario, task: &TaskSpec, config: RunConfig) -> TaskRun {
    let store = CognitionStore::new(scenario.seed_cognition());
    let backend = ScriptedBackend::new(script);
    let world = World::from_scenario(scenario, config.seed, &task.task_id).unwrap();
    let mut agent = Agent::new(config, &store, &backend);
    agent.run_task(task, world)
}

#[test]
fn immediate_final_answer() {
    let script = ScriptedScenario::new().with_entry(
        CallSite::Select,
        0,
        "ACTION: FinalAnswer; PARAMS: answer=1912; INTENTION: answer directly",
    );
    let r = run(script, &scenario(), &TaskSpec::new("t", "when was turing born"), RunConfig::default());
    assert_eq!(r.trajectory.len(), 1);
    assert_eq!(r.trajectory.final_status, FinalStatus::Solved);
    assert_eq!(r.trajectory.final_answer.as_deref(), Some("1912"));
}

#[test]
fn cap_hit_after_five() {
    let script = ScriptedScenario::new().with_site_default(
        CallSite::Select,
        "ACTION: search; PARAMS: query=alan turing; INTENTION: keep searching",
    );
    let r = run(script, &scenario(), &TaskSpec::new("t", "loop forever"), RunConfig::default());
    assert_eq!(r.trajectory.len(), 5);
    assert_eq!(r.trajectory.final_status, FinalStatus::CapHit);
    assert_eq!(r.pool.len(), 5);
}

#[test]
fn deterministic_logs() {
    let script = ScriptedScenario::new()
        .with_entry(CallSite::Select, 0, "ACTION: search; PARAMS: query=alan turing; INTENTION: look up")
        .with_entry(CallSite::Select, 1, "ACTION: FinalAnswer; PARAMS: answer=1912; INTENTION: done");
    let task = TaskSpec::new("t", "when was turing born");
    let a = run(script.clone(), &scenario(), &task, RunConfig::default());
    let b = run(script, &scenario(), &task, RunConfig::default());
    assert_eq!(serialize_trajectory(&a.trajectory), serialize_trajectory(&b.trajectory));
}

#[test]
fn parse_error_after_repair_is_recorded() {
    let script = ScriptedScenario::new()
        .with_sequence(CallSite::Select, ["garbage", "still garbage", "ACTION: FinalAnswer; PARAMS: answer=x; INTENTION: stop"]);
    let r = run(script, &scenario(), &TaskSpec::new("t", "q"), RunConfig::default());
    let first = &r.trajectory.records[0];
    assert_eq!(first.outcome.status, OutcomeStatus::ParseError);
    assert_eq!(first.kind, ActionKind::EmicGenerate);
    assert_eq!(first.parameters[RAW_OUTPUT_PARAM], "still garbage");
    assert_eq!(r.trajectory.len(), 2);
    assert_eq!(r.trajectory.final_status, FinalStatus::Solved);
}

#[test]
fn repair_can_succeed() {
    let script = ScriptedScenario::new()
        .with_sequence(CallSite::Select, ["ACTION: teleport; PARAMS: none; INTENTION: go", "ACTION: FinalAnswer; PARAMS: answer=x; INTENTION: stop"]);
    let r = run(script, &scenario(), &TaskSpec::new("t", "q"), RunConfig::default());
    assert_eq!(r.trajectory.len(), 1);
    assert_eq!(r.trajectory.records[0].kind, ActionKind::FinalAnswer);
}

fn nested_peer() -> Scenario {
    let helper = Scenario {
        name: "helper".into(),
        tools: search_tools(),
        script: ScriptedScenario::new()
            .with_entry(CallSite::Select, 0, "ACTION: search; PARAMS: query=alan turing; INTENTION: look up")
            .with_entry(CallSite::Select, 1, "ACTION: FinalAnswer; PARAMS: answer=born 1912; INTENTION: report"),
        ..Scenario::default()
    };
    Scenario {
        name: "parent".into(),
        peers: vec![PeerSpec {
            peer_id: "helper".into(),
            expertise: BTreeMap::from([("history".to_string(), "biographies".to_string())]),
            responder: PeerResponder::Agent {
                scenario: Box::new(helper),
                max_steps: None,
            },
        }],
        ..Scenario::default()
    }
}

#[test]
fn delegate_returns_nested_final_answer() {
    let parent = nested_peer();
    // standalone run of the nested scenario is the oracle
    let PeerResponder::Agent { scenario: helper, .. } = &parent.peers[0].responder else { unreachable!() };
    let standalone = run(helper.script.clone(), helper, &TaskSpec::new("n", "when was turing born"), RunConfig::default());
    assert_eq!(standalone.trajectory.len(), 2);

    let script = ScriptedScenario::new()
        .with_entry(CallSite::Select, 0, "ACTION: delegate:helper; PARAMS: task=when was turing born; INTENTION: hand off")
        .with_entry(CallSite::Select, 1, "ACTION: FinalAnswer; PARAMS: answer=1912; INTENTION: done");
    let r = run(script, &parent, &TaskSpec::new("t", "when was turing born"), RunConfig::default());
    let delegated = &r.trajectory.records[0].outcome;
    assert_eq!(delegated.status, OutcomeStatus::PeerResponse);
    assert_eq!(Some(delegated.payload.clone()), standalone.trajectory.final_answer);
}

#[test]
fn delegation_at_cap_is_cap_exceeded() {
    let script = ScriptedScenario::new()
        .with_entry(CallSite::Select, 0, "ACTION: delegate:helper; PARAMS: task=x; INTENTION: hand off")
        .with_entry(CallSite::Select, 1, "ACTION: FinalAnswer; PARAMS: answer=none; INTENTION: done");
    let parent = nested_peer();
    let store = CognitionStore::new(parent.seed_cognition());
    let backend = ScriptedBackend::new(script);
    let world = World::from_scenario(&parent, 0, "t").unwrap();
    let r = Agent::new(RunConfig::default(), &store, &backend)
        .with_depth(2)
        .run_task(&TaskSpec::new("t", "x"), world);
    assert_eq!(r.trajectory.records[0].outcome.status, OutcomeStatus::CapExceeded);
}

#[test]
fn trace_has_three_phases_per_step() {
    let script = ScriptedScenario::new()
        .with_entry(CallSite::Select, 0, "ACTION: search; PARAMS: query=alan turing; INTENTION: look up")
        .with_entry(CallSite::Select, 1, "ACTION: FinalAnswer; PARAMS: answer=1912; INTENTION: done");
    let mut lines = Vec::new();
    let s = scenario();
    let store = CognitionStore::new(s.seed_cognition());
    let backend = ScriptedBackend::new(script);
    {
        let world = World::from_scenario(&s, 0, "t").unwrap();
        let mut agent = Agent::new(RunConfig::default(), &store, &backend).with_observer(|e: &TraceEvent| lines.push(e.to_string()));
        agent.run_task(&TaskSpec::new("t", "q"), world);
    }
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("SELECT t#0 search"));
    assert!(lines[2].starts_with("UPDATE t#0"));
}

#[test]
fn gold_mismatch_fails() {
    let script = ScriptedScenario::new().with_entry(CallSite::Select, 0, "ACTION: FinalAnswer; PARAMS: answer=1913; INTENTION: guess");
    let mut task = TaskSpec::new("t", "when was turing born");
    task.gold_answer = Some("1912".into());
    let r = run(script, &scenario(), &task, RunConfig::default());
    assert_eq!(r.trajectory.final_status, FinalStatus::Failed);
}
