use super::space::ActionDescriptor;
use crate::emo::WorkingMemory;
use crate::model::TaskSpec;

pub const TASK_HEADER: &str = "## Task";
pub const MEMORY_HEADER: &str = "## Working memory";
pub const ACTIONS_HEADER: &str = "## Available actions";
pub const OUTPUT_HEADER: &str = "## Output format";

const OUTPUT_INSTRUCTIONS: &str = r"Choose exactly one action. Answer with a single line:
ACTION: <name>; PARAMS: <name=value; ...>; INTENTION: <one line>
Write PARAMS: none for an action without parameters. Inside values write \; for a semicolon and \\ for a backslash.";

pub fn render_select_prompt(task: &TaskSpec, memory: &WorkingMemory, space: &[ActionDescriptor]) -> String {
    let mut out = String::new();
    out.push_str(TASK_HEADER);
    out.push('\n');
    out.push_str(task.instruction.trim());
    out.push_str("\n\n");
    out.push_str(MEMORY_HEADER);
    out.push('\n');
    out.push_str(&memory.render());
    out.push_str("\n\n");
    out.push_str(ACTIONS_HEADER);
    out.push('\n');
    for action in space {
        out.push_str(&format!("### {} [{}]\n", action.name, action.kind_label()));
        if !action.parameter_schema.is_empty() {
            let params = action
                .parameter_schema
                .iter()
                .map(|p| {
                    let need = if p.required { "required" } else { "optional" };
                    format!("{} ({need})", p.name)
                })
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&format!("params: {params}\n"));
        }
        if !action.rendered_knowledge.is_empty() {
            out.push_str(&action.rendered_knowledge);
            out.push('\n');
        }
    }
    out.push('\n');
    out.push_str(OUTPUT_HEADER);
    out.push('\n');
    out.push_str(OUTPUT_INSTRUCTIONS);
    out.push('\n');
    out
}
