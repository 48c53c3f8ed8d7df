use crate::backend::{CallSite, CompletionBackend, CompletionRequest, GenerationLimits};
use crate::cognition::{fill_placeholders, Binding, CognitionState, SkillBody};
use crate::model::{ActionKind, Outcome, OutcomeStatus, Parameters, TaskSpec};
use crate::world::{EticKind, EticRequest, NestedRunner, World, WorldError};

use super::parse::Selection;
use super::space::{ANSWER_PARAM, ASK_PARAM, DELEGATE_PARAM, GENERATE_PARAM};

/// What one executed action produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub outcome: Outcome,
    pub ticks: u64,
    /// Set by FinalAnswer.
    pub terminate: bool,
}

impl Execution {
    fn new(outcome: Outcome, ticks: u64) -> Self {
        Execution {
            outcome,
            ticks,
            terminate: false,
        }
    }
}

/// Everything an action may touch while it runs.
pub struct ExecContext<'a> {
    pub world: &'a mut World,
    pub backend: &'a dyn CompletionBackend,
    pub cognition: &'a CognitionState,
    pub limits: GenerationLimits,
    pub task: &'a TaskSpec,
    pub step_index: usize,
    pub depth: usize,
    pub depth_cap: usize,
    pub runner: &'a mut dyn NestedRunner,
}

fn failed(outcome: &Outcome) -> bool {
    outcome.is_error() || outcome.status == OutcomeStatus::CapExceeded
}

fn generate(ctx: &mut ExecContext<'_>, prompt: &str) -> Execution {
    let request = CompletionRequest::new(CallSite::Generate, prompt, ctx.limits);
    let outcome = match ctx.backend.complete(&request) {
        Ok(c) => Outcome::success(c.text.trim()),
        Err(e) => Outcome::tool_error(format!("generation failed: {e}")),
    };
    Execution::new(outcome, 1)
}

fn etic(ctx: &mut ExecContext<'_>, kind: EticKind, peer: &str, payload: &str) -> Execution {
    let nested_task = {
        let mut t = TaskSpec::new(format!("{}/{peer}@{}", ctx.task.task_id, ctx.step_index), payload);
        t.domain_tags = ctx.task.domain_tags.clone();
        t
    };
    let request = EticRequest {
        kind,
        peer_id: peer.to_string(),
        payload: payload.to_string(),
        depth: ctx.depth,
        depth_cap: ctx.depth_cap,
        nested_task,
    };
    let outcome = match ctx.world.route_etic(request, ctx.runner) {
        Ok(o) => o,
        Err(e @ WorldError::DepthExceeded { .. }) => Outcome::cap_exceeded(e.to_string()),
        Err(e) => Outcome::tool_error(e.to_string()),
    };
    Execution::new(outcome, 1)
}

/// Runs a chain of sub-steps, stopping at the first failure. Returns the
/// last payload, or a ToolError naming the failed sub-step.
fn run_chain(ctx: &mut ExecContext<'_>, owner: &str, steps: &[(ActionKind, Parameters)]) -> Execution {
    let mut ticks = 0;
    let mut last = Outcome::success("");
    for (i, (kind, params)) in steps.iter().enumerate() {
        let sub = dispatch(ctx, kind, params);
        ticks += sub.ticks;
        if failed(&sub.outcome) {
            let detail = sub.outcome.error_detail.unwrap_or(sub.outcome.payload);
            return Execution::new(
                Outcome::tool_error(format!("{owner} failed at sub-step {i} ({}): {detail}", kind.name())),
                ticks,
            );
        }
        last = sub.outcome;
    }
    Execution::new(last, ticks)
}

fn composite(ctx: &mut ExecContext<'_>, id: &str, params: &Parameters) -> Execution {
    let Some(composite) = ctx.cognition.composites.get(id).cloned() else {
        return Execution::new(Outcome::tool_error(format!("unknown composite {id}")), 1);
    };
    if let Some((step, reference)) = composite.non_forward_reference() {
        return Execution::new(
            Outcome::tool_error(format!("composite {id} step {step} reads output[{reference}]")),
            1,
        );
    }
    let owner = format!("composite {id}");
    let mut payloads: Vec<String> = Vec::new();
    let mut ticks = 0;
    let mut last = Outcome::success("");
    for (i, step) in composite.steps.iter().enumerate() {
        let mut bound = Parameters::new();
        for (name, binding) in &step.bindings {
            let value = match binding {
                Binding::Literal(v) => v.clone(),
                Binding::Output(j) => payloads[*j].clone(),
                Binding::Input(input) => params.get(input).cloned().unwrap_or_default(),
            };
            bound.insert(name.clone(), value);
        }
        let sub = dispatch(ctx, &step.kind, &bound);
        ticks += sub.ticks;
        if failed(&sub.outcome) {
            let detail = sub.outcome.error_detail.unwrap_or(sub.outcome.payload);
            return Execution::new(
                Outcome::tool_error(format!("{owner} failed at sub-step {i} ({}): {detail}", step.kind.name())),
                ticks,
            );
        }
        payloads.push(sub.outcome.payload.clone());
        last = sub.outcome;
    }
    Execution::new(last, ticks)
}

fn skill(ctx: &mut ExecContext<'_>, id: &str, params: &Parameters) -> Execution {
    let Some(skill) = ctx.cognition.skills.get(id).cloned() else {
        return Execution::new(Outcome::tool_error(format!("unknown skill {id}")), 1);
    };
    match &skill.body {
        SkillBody::Prompt { template } => generate(ctx, &fill_placeholders(template, params)),
        SkillBody::Actions { steps } => {
            let expanded: Vec<(ActionKind, Parameters)> = steps
                .iter()
                .map(|s| {
                    let filled = s
                        .parameters
                        .iter()
                        .map(|(k, v)| (k.clone(), fill_placeholders(v, params)))
                        .collect();
                    (s.kind.clone(), filled)
                })
                .collect();
            run_chain(ctx, &format!("skill {id}"), &expanded)
        }
    }
}

fn dispatch(ctx: &mut ExecContext<'_>, kind: &ActionKind, params: &Parameters) -> Execution {
    let arg = |name: &str| params.get(name).cloned().unwrap_or_default();
    match kind {
        ActionKind::EmicGenerate => generate(ctx, &arg(GENERATE_PARAM)),
        ActionKind::EmicToolCall(tool) => match ctx.world.invoke_tool(tool, params) {
            Ok(inv) => Execution::new(inv.outcome, inv.ticks.max(1)),
            Err(e) => Execution::new(Outcome::tool_error(e.to_string()), 1),
        },
        ActionKind::EmicSkillInvoke(id) => skill(ctx, id, params),
        ActionKind::EmicCompositeInvoke(id) => composite(ctx, id, params),
        ActionKind::EticAsk(peer) => etic(ctx, EticKind::Ask, peer, &arg(ASK_PARAM)),
        ActionKind::EticDelegate(peer) => etic(ctx, EticKind::Delegate, peer, &arg(DELEGATE_PARAM)),
        ActionKind::FinalAnswer => Execution {
            outcome: Outcome::success(arg(ANSWER_PARAM)),
            ticks: 1,
            terminate: true,
        },
    }
}

/// Carries out a selection. FinalAnswer sets `terminate`.
pub fn execute(selection: &Selection, ctx: &mut ExecContext<'_>) -> Execution {
    dispatch(ctx, &selection.kind, &selection.parameters)
}
