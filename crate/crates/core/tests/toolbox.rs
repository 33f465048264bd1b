mod support {
    pub mod scenarios;
}

use std::sync::Arc;

use marketlens_core::chart::ChartKind;
use marketlens_core::fixtures::{seed_career, seed_table3, table3_skill_entries, library_embedder, CAREER_QUERY};
use marketlens_core::provider::{FixedChat, ScriptedChat};
use marketlens_core::store::Store;
use marketlens_core::toolbox::{Toolbox, GET_CAREER_ADVICE};
use serde_json::{json, Map, Value};
use support::scenarios::{check_case1, check_case2, check_loop_bounds, fuzz_readonly};

fn args(v: Value) -> Map<String, Value> {
    v.as_object().unwrap().clone()
}

fn table3() -> Toolbox {
    let store = Store::open_in_memory().unwrap();
    seed_table3(&store).unwrap();
    Toolbox::new(
        Arc::new(store),
        Arc::new(library_embedder(&table3_skill_entries())),
        Arc::new(FixedChat::new("x")),
    )
}

fn empty() -> Toolbox {
    Toolbox::new(
        Arc::new(Store::open_in_memory().unwrap()),
        Arc::new(library_embedder(&table3_skill_entries())),
        Arc::new(FixedChat::new("x")),
    )
}

#[test]
fn top_skills_bar_chart_replay() {
    check_case1().unwrap();
}

#[test]
fn career_advice_replay() {
    check_case2().unwrap();
}

#[test]
fn tools_never_change_the_store() {
    let calls = fuzz_readonly(0xC0FFEE, 100).unwrap();
    assert!(calls >= 100);
}

#[test]
fn loop_bounds_with_real_tools() {
    let (turns, repairs) = check_loop_bounds(7, 10).unwrap();
    assert_eq!(turns, 20);
    assert!(repairs >= 10);
}

#[test]
fn top_skills_text_matches_chart() {
    let tb = table3();
    let text = tb.get_top_skills(&args(json!({"n": 3}))).observation;
    assert_eq!(
        text.lines().collect::<Vec<_>>(),
        ["1. Requirements Analysis — 1583", "2. Business Analysis — 1571", "3. English — 1538"]
    );
    let out = tb.create_top_skills_bar_chart(&args(json!({"n": 3})));
    let chart = &out.charts[0];
    assert_eq!(chart.kind, ChartKind::Bar);
    assert_eq!(chart.series[0].values, [1583.0, 1571.0, 1538.0]);
    assert_eq!(chart.provenance.params["n"], json!(3));
    chart.check().unwrap();
    // identical requests give identical ids
    let again = tb.create_top_skills_bar_chart(&args(json!({"n": 3})));
    assert_eq!(again.charts[0].chart_id, chart.chart_id);
    assert_ne!(tb.create_top_skills_bar_chart(&args(json!({"n": 4}))).charts[0].chart_id, chart.chart_id);
}

#[test]
fn n_is_range_checked() {
    let tb = table3();
    for n in [0, -1, 101] {
        assert!(tb.get_top_skills(&args(json!({"n": n}))).observation.starts_with("error: n out of range"));
    }
    assert!(tb.create_top_skills_bar_chart(&args(json!({"n": 51}))).observation.starts_with("error:"));
    assert_eq!(tb.get_top_skills(&Map::new()).observation.lines().count(), 10);
}

#[test]
fn empty_store_responses() {
    let tb = empty();
    assert_eq!(tb.get_top_skills(&Map::new()).observation, "no skills labeled yet");
    assert_eq!(tb.get_top_jobs(&Map::new()).observation, "no jobs stored yet");
    let out = tb.create_top_skills_bar_chart(&Map::new());
    assert!(out.observation.starts_with("error:") && out.charts.is_empty());
    assert!(tb.get_career_advice(&args(json!({"user_context": "SQL"}))).observation.starts_with("error: no jobs"));
}

#[test]
fn trend_chart_covers_every_day() {
    let tb = table3();
    let out = tb.create_trend_line_chart(&args(json!({"from": "2025-06-30", "to": "2025-08-09"})));
    let chart = &out.charts[0];
    assert_eq!(chart.kind, ChartKind::Line);
    assert_eq!(chart.categories.len(), 41);
    assert_eq!(chart.categories[0], "2025-06-30");
    assert_eq!(chart.series[0].values[0], 0.0);
    assert_eq!(chart.series[0].values.iter().sum::<f64>(), 3745.0);
    let summary: Value = serde_json::from_str(&out.observation).unwrap();
    assert_eq!(summary["total_postings"], json!(3745));
    assert_eq!(summary["days"], json!(41));

    for bad in [
        json!({"from": "2025-08-01", "to": "2025-07-01"}),
        json!({"from": "2024-01-01", "to": "2025-01-01"}),
        json!({"from": "July", "to": "2025-07-01"}),
    ] {
        let out = tb.create_trend_line_chart(&args(bad));
        assert!(out.observation.starts_with("error: invalid range"), "{}", out.observation);
    }
    let year = tb.create_trend_line_chart(&args(json!({"from": "2024-01-01", "to": "2024-12-31"})));
    assert_eq!(year.charts[0].categories.len(), 366);
}

#[test]
fn query_tool_renders_and_rejects() {
    let tb = table3();
    let out = tb.query_database(&args(json!({"sql": "SELECT COUNT(*) AS n FROM jobs"})));
    assert_eq!(out.observation, "n\n3745\n(1 rows)");
    let out = tb.query_database(&args(json!({"sql": "SELECT job_id FROM jobs"})));
    assert!(out.observation.contains("(50 of at least 501 rows shown"), "{}", out.observation.lines().last().unwrap());
    let out = tb.query_database(&args(json!({"sql": "DELETE FROM jobs"})));
    assert!(out.observation.starts_with("error:"));
}

#[test]
fn career_advice_survives_advisor_failure() {
    let store = Store::open_in_memory().unwrap();
    let embedder = seed_career(&store).unwrap();
    let tb = Arc::new(Toolbox::new(Arc::new(store), Arc::new(embedder), Arc::new(ScriptedChat::new(Vec::<String>::new()))));
    let advice = tb.career_advice(CAREER_QUERY).unwrap();
    assert!(advice.payload.advice_text.is_empty());
    assert!(advice.warning.is_some());
    assert!(advice.payload.suggested_skills.len() <= 10);
    let obs = tb.get_career_advice(&args(json!({"user_context": CAREER_QUERY}))).observation;
    assert!(obs.contains("\nwarning: advisor unavailable"));

    let registry = tb.registry().unwrap();
    assert_eq!(registry.len(), 6);
    assert!(registry.names().contains(&GET_CAREER_ADVICE));
    assert!(tb.career_advice("   ").is_err());
}
