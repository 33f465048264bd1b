//! ReAct runtime: tool registry, directive parsing and the
//! reason/act/observe loop.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::chart::ChartSpec;
use crate::jsonscan::{first_json_object, ScanError};
use crate::provider::{ChatMessage, ChatProvider, DecodingParams, ProviderError};

pub const DEFAULT_MAX_STEPS: usize = 8;
pub const MAX_OBSERVATION_CHARS: usize = 4_000;
pub const TRUNCATION_MARKER: &str = "…[truncated]";
/// A (tool, args) pair issued this many times in a row is not executed again.
pub const LOOP_GUARD_REPEATS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgType {
    String,
    Integer,
    Number,
    Boolean,
}

impl ArgType {
    fn as_str(self) -> &'static str {
        match self {
            ArgType::String => "string",
            ArgType::Integer => "integer",
            ArgType::Number => "number",
            ArgType::Boolean => "boolean",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            ArgType::String => v.is_string(),
            ArgType::Integer => v.is_i64() || v.is_u64(),
            ArgType::Number => v.is_number(),
            ArgType::Boolean => v.is_boolean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub arg_type: ArgType,
    pub required: bool,
}

impl ArgSpec {
    pub fn required(name: &str, arg_type: ArgType) -> Self {
        Self { name: name.into(), arg_type, required: true }
    }

    pub fn optional(name: &str, arg_type: ArgType) -> Self {
        Self { name: name.into(), arg_type, required: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub arg_schema: Vec<ArgSpec>,
}

/// What a tool hands back to the loop: text for the model plus charts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToolOutput {
    pub observation: String,
    pub charts: Vec<ChartSpec>,
}

impl ToolOutput {
    pub fn text(observation: impl Into<String>) -> Self {
        Self { observation: observation.into(), charts: Vec::new() }
    }

    pub fn error(message: impl fmt::Display) -> Self {
        Self::text(format!("error: {message}"))
    }
}

pub trait ToolHandler: Send + Sync {
    fn call(&self, args: &Map<String, Value>) -> ToolOutput;
}

impl<F> ToolHandler for F
where
    F: Fn(&Map<String, Value>) -> ToolOutput + Send + Sync,
{
    fn call(&self, args: &Map<String, Value>) -> ToolOutput {
        self(args)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("tool '{0}' is already registered")]
    DuplicateTool(String),
    #[error("tool name '{0}' must match [a-z][a-z0-9_]*")]
    InvalidName(String),
    #[error("tool '{tool}' declares argument '{arg}' twice")]
    DuplicateArg { tool: String, arg: String },
    #[error("registry has no tools")]
    EmptyRegistry,
}

/// Tools available to the agent, in registration order.
#[derive(Default)]
pub struct ToolRegistry {
    tools: Vec<(ToolDescriptor, Box<dyn ToolHandler>)>,
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.tools.iter().map(|(d, _)| &d.name)).finish()
    }
}

fn valid_tool_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        descriptor: ToolDescriptor,
        handler: impl ToolHandler + 'static,
    ) -> Result<(), RegistryError> {
        if !valid_tool_name(&descriptor.name) {
            return Err(RegistryError::InvalidName(descriptor.name));
        }
        if self.get(&descriptor.name).is_some() {
            return Err(RegistryError::DuplicateTool(descriptor.name));
        }
        let mut seen = HashSet::new();
        for arg in &descriptor.arg_schema {
            if !seen.insert(arg.name.as_str()) {
                return Err(RegistryError::DuplicateArg {
                    tool: descriptor.name.clone(),
                    arg: arg.name.clone(),
                });
            }
        }
        self.tools.push((descriptor, Box::new(handler)));
        Ok(())
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ToolDescriptor> {
        self.tools.iter().map(|(d, _)| d)
    }

    pub fn names(&self) -> Vec<&str> {
        self.descriptors().map(|d| d.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    fn get(&self, name: &str) -> Option<&(ToolDescriptor, Box<dyn ToolHandler>)> {
        self.tools.iter().find(|(d, _)| d.name == name)
    }

    /// Checks `args` against the tool's schema and runs it. Unknown tools
    /// and bad arguments come back as `error:` observations.
    pub fn dispatch(&self, tool: &str, args: &Map<String, Value>) -> ToolOutput {
        let Some((descriptor, handler)) = self.get(tool) else {
            return ToolOutput::error(format!(
                "unknown tool '{tool}'; available tools: {}",
                self.names().join(", ")
            ));
        };
        if let Err(message) = check_args(descriptor, args) {
            return ToolOutput::error(format!("bad arguments for {tool}: {message}"));
        }
        handler.call(args)
    }
}

fn check_args(descriptor: &ToolDescriptor, args: &Map<String, Value>) -> Result<(), String> {
    for key in args.keys() {
        if !descriptor.arg_schema.iter().any(|a| &a.name == key) {
            return Err(format!("unexpected argument '{key}'"));
        }
    }
    for spec in &descriptor.arg_schema {
        match args.get(&spec.name) {
            None | Some(Value::Null) if spec.required => {
                return Err(format!("missing required argument '{}'", spec.name))
            }
            None | Some(Value::Null) => {}
            Some(v) if !spec.arg_type.accepts(v) => {
                return Err(format!("argument '{}' must be {}", spec.name, spec.arg_type.as_str()))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Builds the system prompt: tool catalogue, output contract and the
/// tool-use policy.
pub fn render_system_prompt(registry: &ToolRegistry) -> Result<String, RegistryError> {
    if registry.is_empty() {
        return Err(RegistryError::EmptyRegistry);
    }
    let mut out = String::from(
        "You are a job-market analyst. You answer questions about the job postings database \
         by reasoning step by step and calling tools.\n\n## Tools\n",
    );
    for d in registry.descriptors() {
        let args = d
            .arg_schema
            .iter()
            .map(|a| {
                let opt = if a.required { "" } else { ", optional" };
                format!("{}: {}{opt}", a.name, a.arg_type.as_str())
            })
            .collect::<Vec<_>>()
            .join("; ");
        out.push_str(&format!("- {}({args}): {}\n", d.name, d.description));
    }
    out.push_str(
        r#"
## Output format
Reply with exactly one JSON object inside a ```json code fence and nothing that contradicts it.
To call a tool:
```json
{"type": "action", "thought": "<why this tool>", "tool": "<tool name>", "args": {"<arg>": <value>}}
```
To answer the user:
```json
{"type": "final", "thought": "<how the observations answer the question>", "answer": "<answer for the user>"}
```
After each action you receive the tool's observation in a message starting with "tool: <name>".

## Policy
Every number, ranking, count or other quantitative claim in your answer must come from a tool observation in this conversation. Never estimate or recall statistics yourself; call a tool first. If a tool returns an error, read it and adjust your next action.
"#,
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentDirective {
    Action { thought: String, tool: String, args: Map<String, Value> },
    Final { thought: String, answer: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DirectiveErrorReason {
    NoJson,
    BadDiscriminator { found: Option<String> },
    MissingFields { fields: Vec<String> },
    WrongType { field: String, expected: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message}")]
pub struct DirectiveParseError {
    pub reason: DirectiveErrorReason,
    pub message: String,
}

impl DirectiveParseError {
    fn new(reason: DirectiveErrorReason) -> Self {
        let message = match &reason {
            DirectiveErrorReason::NoJson => "no JSON object found in the reply".to_string(),
            DirectiveErrorReason::BadDiscriminator { found: Some(t) } => {
                format!("\"type\" must be \"action\" or \"final\", found \"{t}\"")
            }
            DirectiveErrorReason::BadDiscriminator { found: None } => {
                "missing string field \"type\" (\"action\" or \"final\")".to_string()
            }
            DirectiveErrorReason::MissingFields { fields } => {
                format!("missing fields: {}", fields.join(", "))
            }
            DirectiveErrorReason::WrongType { field, expected } => format!("field \"{field}\" must be {expected}"),
        };
        Self { reason, message }
    }
}

/// Decodes the first JSON object in the model's reply into a directive.
pub fn parse_agent_output(text: &str) -> Result<AgentDirective, DirectiveParseError> {
    let obj = first_json_object(text).map_err(|e| match e {
        ScanError::NoObject | ScanError::Undecodable { .. } => DirectiveParseError::new(DirectiveErrorReason::NoJson),
    })?;
    let kind = match obj.get("type") {
        Some(Value::String(t)) => t.as_str(),
        _ => return Err(DirectiveParseError::new(DirectiveErrorReason::BadDiscriminator { found: None })),
    };
    let required: &[&str] = match kind {
        "action" => &["thought", "tool", "args"],
        "final" => &["thought", "answer"],
        other => {
            return Err(DirectiveParseError::new(DirectiveErrorReason::BadDiscriminator {
                found: Some(other.to_string()),
            }))
        }
    };
    let missing: Vec<String> = required
        .iter()
        .filter(|k| !obj.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(DirectiveParseError::new(DirectiveErrorReason::MissingFields { fields: missing }));
    }
    let string = |field: &str| match &obj[field] {
        Value::String(s) => Ok(s.clone()),
        _ => Err(DirectiveParseError::new(DirectiveErrorReason::WrongType {
            field: field.into(),
            expected: "a string".into(),
        })),
    };
    let thought = string("thought")?;
    if kind == "final" {
        let answer = string("answer")?;
        if answer.trim().is_empty() {
            return Err(DirectiveParseError::new(DirectiveErrorReason::WrongType {
                field: "answer".into(),
                expected: "a non-empty string".into(),
            }));
        }
        return Ok(AgentDirective::Final { thought, answer });
    }
    let tool = string("tool")?;
    let args = match &obj["args"] {
        Value::Object(m) => m.clone(),
        _ => {
            return Err(DirectiveParseError::new(DirectiveErrorReason::WrongType {
                field: "args".into(),
                expected: "an object".into(),
            }))
        }
    };
    Ok(AgentDirective::Action { thought, tool, args })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: u32,
    pub thought: String,
    pub tool: String,
    pub args: Value,
    pub observation: String,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    Ok,
    StepLimit,
    ProviderError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub session_id: String,
    pub user_message: String,
    pub steps: Vec<TraceStep>,
    pub final_answer: String,
    pub charts: Vec<ChartSpec>,
    pub status: TurnStatus,
}

/// Conversation state carried between turns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub turns: Vec<AgentTurn>,
}

impl Session {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self { session_id: session_id.into(), turns: Vec::new() }
    }

    /// Prior user messages and final answers; traces are not replayed.
    pub fn history(&self) -> Vec<ChatMessage> {
        let mut out = Vec::new();
        for turn in &self.turns {
            out.push(ChatMessage::user(turn.user_message.clone()));
            if !turn.final_answer.is_empty() {
                out.push(ChatMessage::assistant(turn.final_answer.clone()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentConfig {
    pub max_steps: usize,
    pub max_observation_chars: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            max_observation_chars: MAX_OBSERVATION_CHARS,
        }
    }
}

/// A finished turn plus run details that are not part of the trace format.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnReport {
    pub turn: AgentTurn,
    pub provider_error: Option<ProviderError>,
    pub repair_prompts: usize,
    pub chat_calls: usize,
}

pub fn truncate_observation(text: &str, limit: usize) -> String {
    if text.chars().count() <= limit {
        return text.to_string();
    }
    let keep = limit.saturating_sub(TRUNCATION_MARKER.chars().count());
    let cut = text.char_indices().nth(keep).map_or(text.len(), |(i, _)| i);
    format!("{}{TRUNCATION_MARKER}", &text[..cut])
}

fn repair_prompt(error: &DirectiveParseError) -> String {
    format!(
        "Your reply could not be parsed ({}). Reply again with exactly one fenced JSON object of type \"action\" or \"final\".",
        error.message
    )
}

/// Runs one user turn to a final answer, the step limit or a provider
/// failure.
pub fn run_react(
    session: &Session,
    user_message: &str,
    registry: &ToolRegistry,
    chat: &dyn ChatProvider,
    config: &AgentConfig,
) -> Result<TurnReport, RegistryError> {
    let system = render_system_prompt(registry)?;
    let params = DecodingParams::default();
    let mut messages = vec![ChatMessage::system(system)];
    messages.extend(session.history());
    messages.push(ChatMessage::user(user_message));

    let mut turn = AgentTurn {
        session_id: session.session_id.clone(),
        user_message: user_message.to_string(),
        steps: Vec::new(),
        final_answer: String::new(),
        charts: Vec::new(),
        status: TurnStatus::StepLimit,
    };
    let mut report = TurnReport {
        turn: turn.clone(),
        provider_error: None,
        repair_prompts: 0,
        chat_calls: 0,
    };
    let mut last_call: Option<(String, Map<String, Value>)> = None;
    let mut repeats = 0usize;

    while turn.steps.len() < config.max_steps {
        let index = turn.steps.len() as u32 + 1;
        let mut repaired = false;
        let directive = loop {
            report.chat_calls += 1;
            let reply = match chat.chat(&messages, &params) {
                Ok(r) => r,
                Err(e) => {
                    tracing::warn!(provider = chat.name(), error = %e, "provider failed mid-turn");
                    turn.status = TurnStatus::ProviderError;
                    report.turn = turn;
                    report.provider_error = Some(e);
                    return Ok(report);
                }
            };
            messages.push(ChatMessage::assistant(reply.clone()));
            match parse_agent_output(&reply) {
                Ok(d) => break Ok(d),
                Err(e) if repaired => break Err(e),
                Err(e) => {
                    repaired = true;
                    report.repair_prompts += 1;
                    messages.push(ChatMessage::user(repair_prompt(&e)));
                }
            }
        };
        match directive {
            Err(e) => {
                let observation = format!("error: {}", e.message);
                messages.push(ChatMessage::user(observation.clone()));
                turn.steps.push(TraceStep {
                    index,
                    thought: String::new(),
                    tool: String::new(),
                    args: Value::Object(Map::new()),
                    observation,
                    artifacts: Vec::new(),
                });
                last_call = None;
                repeats = 0;
            }
            Ok(AgentDirective::Final { answer, .. }) => {
                turn.final_answer = answer;
                turn.status = TurnStatus::Ok;
                report.turn = turn;
                return Ok(report);
            }
            Ok(AgentDirective::Action { thought, tool, args }) => {
                let call = (tool.clone(), args.clone());
                if last_call.as_ref() == Some(&call) {
                    repeats += 1;
                } else {
                    repeats = 1;
                    last_call = Some(call);
                }
                let output = if repeats >= LOOP_GUARD_REPEATS {
                    ToolOutput::error(format!(
                        "{tool} was called with the same arguments {repeats} times in a row and was not run again; \
                         change strategy: use a different tool or different arguments, or give a final answer"
                    ))
                } else {
                    registry.dispatch(&tool, &args)
                };
                let observation = truncate_observation(&output.observation, config.max_observation_chars);
                messages.push(ChatMessage::tool(&tool, &observation));
                turn.steps.push(TraceStep {
                    index,
                    thought,
                    tool,
                    args: Value::Object(args),
                    observation,
                    artifacts: output.charts.iter().map(|c| c.chart_id.clone()).collect(),
                });
                turn.charts.extend(output.charts);
            }
        }
    }
    turn.status = TurnStatus::StepLimit;
    report.turn = turn;
    Ok(report)
}
