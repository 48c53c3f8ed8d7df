//! The decision engine: the unified action space, the select prompt and
//! its grammar, action execution and the Select-Execute-Update loop.

mod agent;
mod execute;
mod parse;
pub mod prompt;
mod space;

pub use agent::{answers_match, Agent, Phase, TaskRun, TraceEvent, RAW_OUTPUT_PARAM};
pub use execute::{execute, ExecContext, Execution};
pub use parse::{escape_param_value, parse_selection, unescape_param_value, Selection, SelectionError};
pub use prompt::render_select_prompt;
pub use space::{build_action_space, ActionDescriptor, ANSWER_PARAM, ASK_PARAM, DELEGATE_PARAM, GENERATE_PARAM};

#[cfg(test)]
mod tests;
