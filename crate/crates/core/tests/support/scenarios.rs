//! Scripted replays shared by the toolbox tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use marketlens_core::agent::{run_react, AgentConfig, Session, TurnStatus, DEFAULT_MAX_STEPS};
use marketlens_core::fixtures::{
    seed_career, seed_table3, table3_skill_entries, library_embedder, BACKEND_CATEGORY, CAREER_QUERY,
    DESIGN_CATEGORY,
};
use marketlens_core::provider::{FixedChat, ScriptedChat};
use marketlens_core::store::Store;
use marketlens_core::toolbox::{
    AdvicePayload, Toolbox, CREATE_TOP_SKILLS_BAR_CHART, CREATE_TREND_LINE_CHART, GET_CAREER_ADVICE,
    GET_TOP_JOBS, GET_TOP_SKILLS, QUERY_DATABASE,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const CASE1_QUERY: &str = "What are the top 10 most in-demand skills, and can you show me the numbers";
pub const CASE2_QUERY: &str = "I enjoy creative work and design. What career path should I consider?";

pub fn action(tool: &str, args: Value) -> String {
    format!(
        "```json\n{}\n```",
        json!({"type": "action", "thought": format!("I should call {tool}."), "tool": tool, "args": args})
    )
}

pub fn final_answer(answer: &str) -> String {
    json!({"type": "final", "thought": "I can answer now.", "answer": answer}).to_string()
}

pub fn case1_script() -> Vec<String> {
    vec![
        action(CREATE_TOP_SKILLS_BAR_CHART, json!({"n": 10})),
        final_answer("Requirements Analysis leads with 1583 postings, followed by Business Analysis (1571) and English (1538)."),
    ]
}

fn table3_toolbox() -> Arc<Toolbox> {
    let store = Store::open_in_memory().expect("store");
    seed_table3(&store).expect("seed");
    let embedder = library_embedder(&table3_skill_entries());
    Arc::new(Toolbox::new(Arc::new(store), Arc::new(embedder), Arc::new(FixedChat::new("advice"))))
}

/// Runs the top-skills replay against the seeded store and checks the
/// trace and chart.
pub fn check_case1() -> Result<(), String> {
    let toolbox = table3_toolbox();
    let registry = toolbox.registry().map_err(|e| e.to_string())?;
    let chat = ScriptedChat::new(case1_script());
    let report = run_react(&Session::new("case-1"), CASE1_QUERY, &registry, &chat, &AgentConfig::default())
        .map_err(|e| e.to_string())?;
    let turn = report.turn;
    if turn.status != TurnStatus::Ok {
        return Err(format!("status {:?}", turn.status));
    }
    let steps: Vec<_> = turn.steps.iter().filter(|s| s.tool == CREATE_TOP_SKILLS_BAR_CHART).collect();
    if turn.steps.len() != 1 || steps.len() != 1 || steps[0].args != json!({"n": 10}) {
        return Err(format!("unexpected steps: {:?}", turn.steps));
    }
    let [chart] = turn.charts.as_slice() else {
        return Err(format!("expected one chart, got {}", turn.charts.len()));
    };
    let values = &chart.series[0].values;
    if chart.categories.len() != 10 || values.len() != 10 {
        return Err(format!("chart has {} categories", chart.categories.len()));
    }
    if values.windows(2).any(|w| w[0] < w[1]) {
        return Err(format!("values increase: {values:?}"));
    }
    if values[..3] != [1583.0, 1571.0, 1538.0] {
        return Err(format!("first values {:?}", &values[..3]));
    }
    if chart.categories[..3] != ["Requirements Analysis", "Business Analysis", "English"] {
        return Err(format!("first categories {:?}", &chart.categories[..3]));
    }
    let obs: Value = serde_json::from_str(&steps[0].observation).map_err(|e| e.to_string())?;
    if obs["chart_id"] != json!(chart.chart_id) || steps[0].artifacts != [chart.chart_id.clone()] {
        return Err("observation and artifacts do not reference the chart".into());
    }
    if obs["top_category"] != json!("Requirements Analysis") || obs["top_value"] != json!(1583) {
        return Err(format!("observation summary disagrees with chart: {obs}"));
    }
    Ok(())
}

fn career_toolbox() -> Arc<Toolbox> {
    let store = Store::open_in_memory().expect("store");
    let embedder = seed_career(&store).expect("seed");
    Arc::new(Toolbox::new(
        Arc::new(store),
        Arc::new(embedder),
        Arc::new(FixedChat::new("Consider UI/UX design roles.")),
    ))
}

/// Career advice for the design query over the ten-job fixture.
pub fn case2_payload() -> Result<AdvicePayload, String> {
    let toolbox = career_toolbox();
    let advice = toolbox.career_advice(CAREER_QUERY).map_err(|e| e.to_string())?;
    if let Some(w) = advice.warning {
        return Err(w);
    }
    Ok(advice.payload)
}

pub fn check_case2() -> Result<(), String> {
    let payload = case2_payload()?;
    let categories: Vec<&str> = payload
        .matched_jobs
        .iter()
        .map(|h| h.expertise_category.as_deref().unwrap_or(""))
        .collect();
    let design = categories.iter().filter(|c| **c == DESIGN_CATEGORY).count();
    let backend = categories.iter().filter(|c| **c == BACKEND_CATEGORY).count();
    if design != 5 || backend != 5 {
        return Err(format!("matched {design} design and {backend} backend jobs"));
    }
    let last_design = categories.iter().rposition(|c| *c == DESIGN_CATEGORY).unwrap();
    let first_backend = categories.iter().position(|c| *c == BACKEND_CATEGORY).unwrap();
    if last_design > first_backend {
        return Err(format!("ranking interleaves categories: {categories:?}"));
    }
    let worst_design = payload.matched_jobs[last_design].score;
    let best_backend = payload.matched_jobs[first_backend].score;
    if worst_design <= best_backend {
        return Err(format!("design score {worst_design} does not beat backend score {best_backend}"));
    }
    match payload.recommended_roles.first() {
        Some(r) if r.role == DESIGN_CATEGORY => {}
        other => return Err(format!("top role {other:?}")),
    }
    if case2_payload()? != payload {
        return Err("second run differs".into());
    }

    // the same request through the agent and the tool wrapper
    let toolbox = career_toolbox();
    let registry = toolbox.registry().map_err(|e| e.to_string())?;
    let chat = ScriptedChat::new([
        action(GET_CAREER_ADVICE, json!({"user_context": CAREER_QUERY})),
        final_answer("Design roles fit you best."),
    ]);
    let report = run_react(&Session::new("case-2"), CASE2_QUERY, &registry, &chat, &AgentConfig::default())
        .map_err(|e| e.to_string())?;
    let obs = &report.turn.steps[0].observation;
    let data: Value = serde_json::from_str(obs.lines().next().unwrap_or("")).map_err(|e| e.to_string())?;
    if data["recommended_roles"][0]["role"] != json!(DESIGN_CATEGORY) {
        return Err(format!("tool observation disagrees: {obs}"));
    }
    Ok(())
}

const FUZZ_SQL: [&str; 16] = [
    "SELECT COUNT(*) FROM jobs",
    "SELECT job_title, salary_min FROM jobs ORDER BY salary_min DESC LIMIT 3",
    "WITH t AS (SELECT skill_name FROM job_skills) SELECT skill_name, COUNT(*) FROM t GROUP BY 1",
    "SELECT * FROM raw_documents",
    "SELECT nope FROM jobs",
    "DELETE FROM jobs",
    "UPDATE jobs SET job_title = 'x'",
    "DROP TABLE skills",
    "SELECT 1; DELETE FROM jobs",
    "PRAGMA query_only = OFF",
    "INSERT INTO skills VALUES ('x', '[]')",
    "WITH x AS (SELECT 1) DELETE FROM jobs",
    "SELECT * INTO t FROM jobs",
    "ATTACH DATABASE ':memory:' AS m",
    "VACUUM",
    "/* DELETE */ SELECT 'DROP TABLE jobs' AS s",
];

const FUZZ_WORDS: [&str; 10] =
    ["design", "creative", "backend", "Go", "SQL", "Figma", "research", "Docker", "", "  "];

fn random_args(rng: &mut ChaCha8Rng, tool: &str) -> Value {
    let n = match rng.gen_range(0..6) {
        0 => json!("ten"),
        1 => json!(-3),
        2 => json!(500),
        _ => json!(rng.gen_range(0..60)),
    };
    match tool {
        QUERY_DATABASE => json!({"sql": FUZZ_SQL.choose(rng).unwrap()}),
        GET_TOP_SKILLS | GET_TOP_JOBS | CREATE_TOP_SKILLS_BAR_CHART => {
            if rng.gen_bool(0.2) {
                json!({})
            } else {
                json!({"n": n})
            }
        }
        CREATE_TREND_LINE_CHART => {
            let day = |rng: &mut ChaCha8Rng| format!("2025-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28));
            let (a, b) = (day(rng), day(rng));
            if rng.gen_bool(0.1) {
                json!({"from": "yesterday", "to": b})
            } else {
                json!({"from": a, "to": b})
            }
        }
        _ => {
            let k = rng.gen_range(1..4);
            let words: Vec<&str> = (0..k).map(|_| *FUZZ_WORDS.choose(rng).unwrap()).collect();
            json!({"user_context": words.join(" ")})
        }
    }
}

/// Replays `turns` random turns through all six tools and compares the
/// store checksum before and after each turn. Returns the number of tool
/// calls dispatched.
pub fn fuzz_readonly(seed: u64, turns: usize) -> Result<usize, String> {
    let tools = [
        QUERY_DATABASE,
        GET_TOP_SKILLS,
        GET_TOP_JOBS,
        CREATE_TOP_SKILLS_BAR_CHART,
        CREATE_TREND_LINE_CHART,
        GET_CAREER_ADVICE,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let toolbox = career_toolbox();
    let registry = toolbox.registry().map_err(|e| e.to_string())?;
    let store = Arc::clone(toolbox.store());
    let mut session = Session::new("fuzz");
    let mut used = BTreeSet::new();
    let mut calls = 0;
    for t in 0..turns {
        let mut script = Vec::new();
        for _ in 0..rng.gen_range(1..=4) {
            let tool = *tools.choose(&mut rng).unwrap();
            used.insert(tool);
            script.push(action(tool, random_args(&mut rng, tool)));
        }
        calls += script.len();
        script.push(final_answer(&format!("turn {t} done")));
        let chat = ScriptedChat::new(script);
        let before = store.checksum().map_err(|e| e.to_string())?;
        let report = run_react(&session, &format!("question {t}"), &registry, &chat, &AgentConfig::default())
            .map_err(|e| e.to_string())?;
        let after = store.checksum().map_err(|e| e.to_string())?;
        if before != after {
            return Err(format!("turn {t} changed the store: {:?}", report.turn.steps));
        }
        if report.turn.status != TurnStatus::Ok {
            return Err(format!("turn {t} ended with {:?}", report.turn.status));
        }
        session.turns.push(report.turn);
    }
    if used.len() != tools.len() {
        return Err(format!("only exercised {used:?}"));
    }
    Ok(calls)
}

/// Never-finalizing and malformed-directive replays against the real
/// toolbox. Returns (turns checked, repair prompts counted).
pub fn check_loop_bounds(seed: u64, turns: usize) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let toolbox = career_toolbox();
    let registry = toolbox.registry().map_err(|e| e.to_string())?;
    let config = AgentConfig::default();
    let mut repairs = 0;
    for t in 0..turns {
        let script: Vec<String> = (0..DEFAULT_MAX_STEPS + 4)
            .map(|i| action(GET_TOP_SKILLS, json!({"n": i + 1})))
            .collect();
        let chat = ScriptedChat::new(script);
        let report = run_react(&Session::new("loop"), "never ends", &registry, &chat, &config)
            .map_err(|e| e.to_string())?;
        if report.turn.status != TurnStatus::StepLimit || report.turn.steps.len() != DEFAULT_MAX_STEPS {
            return Err(format!(
                "turn {t}: {:?} after {} steps",
                report.turn.status,
                report.turn.steps.len()
            ));
        }

        // k malformed replies, each followed by a valid action, then final
        let k = rng.gen_range(1..DEFAULT_MAX_STEPS);
        let mut script = Vec::new();
        for i in 0..k {
            script.push(format!("malformed reply {i}: no JSON here"));
            script.push(action(GET_TOP_JOBS, json!({"n": i + 1})));
        }
        script.push(final_answer("done"));
        let chat = ScriptedChat::new(script);
        let report = run_react(&Session::new("repair"), "repairs", &registry, &chat, &config)
            .map_err(|e| e.to_string())?;
        if report.repair_prompts != k || report.turn.steps.len() != k || report.turn.status != TurnStatus::Ok {
            return Err(format!(
                "turn {t}: {k} malformed replies gave {} repairs, {} steps, {:?}",
                report.repair_prompts,
                report.turn.steps.len(),
                report.turn.status
            ));
        }
        repairs += report.repair_prompts;
    }
    Ok((turns * 2, repairs))
}
