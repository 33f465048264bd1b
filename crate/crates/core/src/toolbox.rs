//! The agent's six tools over the store, the embedder and a chat provider
//! for the nested career advisor.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::agent::{ArgSpec, ArgType, RegistryError, ToolDescriptor, ToolOutput, ToolRegistry};
use crate::chart::{ChartKind, ChartSpec, Provenance, Series};
use crate::enrichment::embed_text;
use crate::provider::{ChatMessage, ChatProvider, DecodingParams, EmbeddingProvider};
use crate::store::{normalize_name, validate_readonly, ResultTable, SearchError, Store, VectorHit};

pub const QUERY_DATABASE: &str = "query_database";
pub const GET_TOP_SKILLS: &str = "get_top_skills";
pub const GET_TOP_JOBS: &str = "get_top_jobs";
pub const CREATE_TOP_SKILLS_BAR_CHART: &str = "create_top_skills_bar_chart";
pub const CREATE_TREND_LINE_CHART: &str = "create_trend_line_chart";
pub const GET_CAREER_ADVICE: &str = "get_career_advice";

pub const DEFAULT_TOP_N: i64 = 10;
pub const MAX_TOP_N: i64 = 100;
pub const MAX_CHART_N: i64 = 50;
pub const MAX_TREND_DAYS: i64 = 366;
pub const ADVICE_MATCHES: usize = 20;
pub const ADVICE_SKILLS: usize = 10;
pub const MAX_RENDERED_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendedRole {
    pub role: String,
    pub posting_count: u64,
    pub salary_min_median: Option<f64>,
    pub salary_max_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestedSkill {
    pub skill_name: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvicePayload {
    pub matched_jobs: Vec<VectorHit>,
    pub recommended_roles: Vec<RecommendedRole>,
    pub suggested_skills: Vec<SuggestedSkill>,
    pub advice_text: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdviceError {
    #[error("user_context must be non-empty")]
    EmptyContext,
    #[error("could not embed user_context: {0}")]
    Embed(String),
    #[error("no jobs are indexed yet")]
    EmptyIndex,
    #[error("{0}")]
    Search(String),
}

/// Career advice plus a warning when the nested advisor call failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Advice {
    pub payload: AdvicePayload,
    pub warning: Option<String>,
}

/// Dependencies shared by every tool handler.
pub struct Toolbox {
    store: Arc<Store>,
    embedder: Arc<dyn EmbeddingProvider>,
    advisor: Arc<dyn ChatProvider>,
}

impl std::fmt::Debug for Toolbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Toolbox")
            .field("embedder", &self.embedder.name())
            .field("advisor", &self.advisor.name())
            .finish_non_exhaustive()
    }
}

fn int_arg(args: &Map<String, Value>, name: &str, default: i64) -> i64 {
    args.get(name).and_then(Value::as_i64).unwrap_or(default)
}

fn str_arg<'a>(args: &'a Map<String, Value>, name: &str) -> &'a str {
    args.get(name).and_then(Value::as_str).unwrap_or("")
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Plain-text table with a header row, at most `max_rows` rows.
pub fn render_table(table: &ResultTable, max_rows: usize) -> String {
    let mut out = table
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join(" | ");
    for row in table.rows.iter().take(max_rows) {
        out.push('\n');
        out.push_str(&row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" | "));
    }
    let shown = table.rows.len().min(max_rows);
    if table.truncated || shown < table.rows.len() {
        let total = if table.truncated {
            format!("at least {}", table.row_count + 1)
        } else {
            table.row_count.to_string()
        };
        out.push_str(&format!("\n({shown} of {total} rows shown; add LIMIT or aggregate to narrow the result)"));
    } else {
        out.push_str(&format!("\n({} rows)", table.row_count));
    }
    out
}

impl Toolbox {
    pub fn new(store: Arc<Store>, embedder: Arc<dyn EmbeddingProvider>, advisor: Arc<dyn ChatProvider>) -> Self {
        Self { store, embedder, advisor }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn query_database(&self, args: &Map<String, Value>) -> ToolOutput {
        let query = match validate_readonly(str_arg(args, "sql")) {
            Ok(q) => q,
            Err(e) => return ToolOutput::error(e),
        };
        match self.store.execute_query(&query) {
            Ok(table) => ToolOutput::text(render_table(&table, MAX_RENDERED_ROWS)),
            Err(e) => ToolOutput::error(e),
        }
    }

    pub fn get_top_skills(&self, args: &Map<String, Value>) -> ToolOutput {
        let n = int_arg(args, "n", DEFAULT_TOP_N);
        if !(1..=MAX_TOP_N).contains(&n) {
            return ToolOutput::error(format!("n out of range (1..={MAX_TOP_N}), got {n}"));
        }
        match self.store.top_skills(n as usize) {
            Ok(rows) if rows.is_empty() => ToolOutput::text("no skills labeled yet"),
            Ok(rows) => ToolOutput::text(ranked_lines(&rows)),
            Err(e) => ToolOutput::error(e),
        }
    }

    pub fn get_top_jobs(&self, args: &Map<String, Value>) -> ToolOutput {
        let n = int_arg(args, "n", DEFAULT_TOP_N);
        if !(1..=MAX_TOP_N).contains(&n) {
            return ToolOutput::error(format!("n out of range (1..={MAX_TOP_N}), got {n}"));
        }
        match self.store.top_jobs(n as usize) {
            Ok(rows) if rows.is_empty() => ToolOutput::text("no jobs stored yet"),
            Ok(rows) => ToolOutput::text(ranked_lines(&rows)),
            Err(e) => ToolOutput::error(e),
        }
    }

    pub fn create_top_skills_bar_chart(&self, args: &Map<String, Value>) -> ToolOutput {
        let n = int_arg(args, "n", DEFAULT_TOP_N);
        if !(1..=MAX_CHART_N).contains(&n) {
            return ToolOutput::error(format!("n out of range (1..={MAX_CHART_N}), got {n}"));
        }
        let rows = match self.store.top_skills(n as usize) {
            Ok(rows) if rows.is_empty() => return ToolOutput::error("no data to chart"),
            Ok(rows) => rows,
            Err(e) => return ToolOutput::error(e),
        };
        let mut params = Map::new();
        params.insert("n".into(), json!(n));
        let spec = ChartSpec::new(
            ChartKind::Bar,
            format!("Top {n} In-Demand Skills"),
            "skill",
            "postings",
            rows.iter().map(|(name, _)| name.clone()).collect(),
            vec![Series {
                name: "postings".into(),
                values: rows.iter().map(|(_, c)| *c as f64).collect(),
            }],
            Provenance { tool: CREATE_TOP_SKILLS_BAR_CHART.into(), params, sql: None },
        );
        let summary = json!({
            "chart_id": spec.chart_id,
            "top_category": rows[0].0,
            "top_value": rows[0].1,
            "n": rows.len(),
            "data": rows.iter().map(|(s, c)| json!({"skill": s, "postings": c})).collect::<Vec<_>>(),
        });
        ToolOutput { observation: summary.to_string(), charts: vec![spec] }
    }

    pub fn create_trend_line_chart(&self, args: &Map<String, Value>) -> ToolOutput {
        let parse = |name: &str| NaiveDate::parse_from_str(str_arg(args, name).trim(), "%Y-%m-%d");
        let (from, to) = match (parse("from"), parse("to")) {
            (Ok(f), Ok(t)) => (f, t),
            _ => return ToolOutput::error("invalid range: from and to must be YYYY-MM-DD dates"),
        };
        if from > to {
            return ToolOutput::error(format!("invalid range: {from} is after {to}"));
        }
        let days = (to - from).num_days() + 1;
        if days > MAX_TREND_DAYS {
            return ToolOutput::error(format!("invalid range: {days} days exceeds {MAX_TREND_DAYS}"));
        }
        let rows = match self.store.postings_per_day(from, to) {
            Ok(rows) => rows,
            Err(e) => return ToolOutput::error(e),
        };
        let mut params = Map::new();
        params.insert("from".into(), json!(from.to_string()));
        params.insert("to".into(), json!(to.to_string()));
        let values: Vec<f64> = rows.iter().map(|(_, c)| *c as f64).collect();
        let total: u64 = rows.iter().map(|(_, c)| c).sum();
        let (peak_day, peak) = rows
            .iter()
            .fold((from, 0u64), |best, (d, c)| if *c > best.1 { (*d, *c) } else { best });
        let spec = ChartSpec::new(
            ChartKind::Line,
            format!("Job postings per day, {from} to {to}"),
            "date",
            "postings",
            rows.iter().map(|(d, _)| d.to_string()).collect(),
            vec![Series { name: "postings per day".into(), values }],
            Provenance { tool: CREATE_TREND_LINE_CHART.into(), params, sql: None },
        );
        let summary = json!({
            "chart_id": spec.chart_id,
            "days": rows.len(),
            "total_postings": total,
            "peak_day": peak_day.to_string(),
            "peak_value": peak,
        });
        ToolOutput { observation: summary.to_string(), charts: vec![spec] }
    }

    /// Vector search over the user's context, aggregated into roles and
    /// skills, plus one advisor call that writes the advice text.
    pub fn career_advice(&self, user_context: &str) -> Result<Advice, AdviceError> {
        if user_context.trim().is_empty() {
            return Err(AdviceError::EmptyContext);
        }
        let query = embed_text(self.embedder.as_ref(), user_context).map_err(|e| AdviceError::Embed(e.to_string()))?;
        let hits = match self.store.vector_search(&query, ADVICE_MATCHES) {
            Ok(h) => h,
            Err(SearchError::EmptyIndex) => return Err(AdviceError::EmptyIndex),
            Err(e) => return Err(AdviceError::Search(e.to_string())),
        };

        struct Group {
            role: String,
            count: u64,
            best_rank: usize,
            mins: Vec<f64>,
            maxs: Vec<f64>,
        }
        let mut groups: BTreeMap<String, Group> = BTreeMap::new();
        let mut skill_freq: BTreeMap<String, u64> = BTreeMap::new();
        for (rank, hit) in hits.iter().enumerate().filter(|(_, h)| h.score > 0.0) {
            let role = hit
                .expertise_category
                .clone()
                .filter(|c| !c.trim().is_empty())
                .unwrap_or_else(|| normalize_name(&hit.job_title));
            let job = self.store.job(&hit.job_id).map_err(|e| AdviceError::Search(e.to_string()))?;
            let group = groups.entry(normalize_name(&role)).or_insert_with(|| Group {
                role: role.trim().to_string(),
                count: 0,
                best_rank: rank,
                mins: Vec::new(),
                maxs: Vec::new(),
            });
            group.count += 1;
            if let Some(job) = job {
                group.mins.extend(job.salary_min);
                group.maxs.extend(job.salary_max);
            }
            let labels = self.store.labels_for(&hit.job_id).map_err(|e| AdviceError::Search(e.to_string()))?;
            for label in labels {
                *skill_freq.entry(label.skill_name).or_default() += 1;
            }
        }
        let mut groups: Vec<Group> = groups.into_values().collect();
        groups.sort_by(|a, b| b.count.cmp(&a.count).then(a.best_rank.cmp(&b.best_rank)));
        let recommended_roles = groups
            .into_iter()
            .map(|g| RecommendedRole {
                role: g.role,
                posting_count: g.count,
                salary_min_median: median(g.mins),
                salary_max_median: median(g.maxs),
            })
            .collect();
        let mut suggested_skills: Vec<SuggestedSkill> = skill_freq
            .into_iter()
            .map(|(skill_name, frequency)| SuggestedSkill { skill_name, frequency })
            .collect();
        suggested_skills.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.skill_name.cmp(&b.skill_name)));
        suggested_skills.truncate(ADVICE_SKILLS);

        let mut payload = AdvicePayload {
            matched_jobs: hits,
            recommended_roles,
            suggested_skills,
            advice_text: String::new(),
        };
        let mut warning = None;
        match self.advisor.chat(&advisor_messages(user_context, &payload), &DecodingParams::default()) {
            Ok(text) => payload.advice_text = text.trim().to_string(),
            Err(e) => {
                tracing::warn!(error = %e, "career advisor call failed");
                warning = Some(format!("advisor unavailable ({e}); advice_text is empty"));
            }
        }
        Ok(Advice { payload, warning })
    }

    pub fn get_career_advice(&self, args: &Map<String, Value>) -> ToolOutput {
        let advice = match self.career_advice(str_arg(args, "user_context")) {
            Ok(a) => a,
            Err(e) => return ToolOutput::error(e),
        };
        let mut data = serde_json::to_value(&advice.payload).expect("payload serializes");
        if let Value::Object(m) = &mut data {
            m.remove("advice_text");
        }
        let mut observation = data.to_string();
        if let Some(w) = advice.warning {
            observation.push_str(&format!("\nwarning: {w}"));
        }
        observation.push_str(&format!("\nadvice: {}", advice.payload.advice_text));
        ToolOutput::text(observation)
    }

    /// Registers all six tools, each holding a reference to `self`.
    pub fn registry(self: &Arc<Self>) -> Result<ToolRegistry, RegistryError> {
        let mut r = ToolRegistry::new();
        let n_arg = || vec![ArgSpec::optional("n", ArgType::Integer)];
        let tools: [(&str, &str, Vec<ArgSpec>, fn(&Toolbox, &Map<String, Value>) -> ToolOutput); 6] = [
            (
                QUERY_DATABASE,
                "Run one read-only SQL SELECT (or WITH ... SELECT) against the job database. Tables: \
                 companies(company_id, company_name, company_information); jobs(job_id, company_id, job_title, \
                 job_description, job_requirements, expertise_category, location, salary_min, salary_max, \
                 salary_currency, posted_date); skills(skill_name, aliases); job_skills(job_id, skill_name, score, rank).",
                vec![ArgSpec::required("sql", ArgType::String)],
                Toolbox::query_database,
            ),
            (
                GET_TOP_SKILLS,
                "List the n skills linked to the most job postings (default 10, max 100).",
                n_arg(),
                Toolbox::get_top_skills,
            ),
            (
                GET_TOP_JOBS,
                "List the n most frequent job titles (default 10, max 100).",
                n_arg(),
                Toolbox::get_top_jobs,
            ),
            (
                CREATE_TOP_SKILLS_BAR_CHART,
                "Create a bar chart of the n most in-demand skills (default 10, max 50). Returns the chart id and a data summary.",
                n_arg(),
                Toolbox::create_top_skills_bar_chart,
            ),
            (
                CREATE_TREND_LINE_CHART,
                "Create a line chart of job postings per day between two dates (YYYY-MM-DD, at most 366 days).",
                vec![ArgSpec::required("from", ArgType::String), ArgSpec::required("to", ArgType::String)],
                Toolbox::create_trend_line_chart,
            ),
            (
                GET_CAREER_ADVICE,
                "Find the postings most similar to the user's background and interests and return recommended roles, \
                 salary medians, skills to learn and written advice.",
                vec![ArgSpec::required("user_context", ArgType::String)],
                Toolbox::get_career_advice,
            ),
        ];
        for (name, description, arg_schema, f) in tools {
            let tb = Arc::clone(self);
            r.register(
                ToolDescriptor { name: name.into(), description: description.into(), arg_schema },
                move |args: &Map<String, Value>| f(&tb, args),
            )?;
        }
        Ok(r)
    }
}

fn ranked_lines(rows: &[(String, u64)]) -> String {
    rows.iter()
        .enumerate()
        .map(|(i, (name, count))| format!("{}. {name} — {count}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn advisor_messages(user_context: &str, payload: &AdvicePayload) -> Vec<ChatMessage> {
    let data = json!({
        "recommended_roles": payload.recommended_roles,
        "suggested_skills": payload.suggested_skills,
        "matched_jobs": payload.matched_jobs.iter().map(|h| json!({
            "job_title": h.job_title,
            "expertise_category": h.expertise_category,
            "score": h.score,
        })).collect::<Vec<_>>(),
    });
    vec![
        ChatMessage::system(
            "You are a career advisor. Using only the market data provided, recommend roles, summarize salary \
             insights and give a skills roadmap. Do not state any figure that is not in the data.",
        ),
        ChatMessage::user(format!("User background: {user_context}\n\nMarket data:\n{data}")),
    ]
}
