//! Pipeline counts derived from the fixture files alone, without running
//! the pipeline.

use std::collections::{HashMap, HashSet};

use marketlens_core::fixtures;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// A reply counts as usable when the span from its first `{` to its last
/// `}` decodes to an object with the five required strings.
fn usable_reply(reply: &str) -> bool {
    let (Some(start), Some(end)) = (reply.find('{'), reply.rfind('}')) else {
        return false;
    };
    let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(&reply[start..=end]) else {
        return false;
    };
    ["job_title", "company_name", "company_information", "job_description", "job_requirements"]
        .iter()
        .all(|k| obj.get(*k).is_some_and(Value::is_string))
}

/// (fetched, stored, quarantined) derived from the fixture files alone.
pub fn corpus_oracle() -> (usize, usize, usize) {
    let corpus = std::fs::read_to_string(fixtures::corpus_path()).unwrap();
    let lines: Vec<Value> = corpus.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).unwrap()).collect();
    let distinct: HashSet<(String, String)> = lines
        .iter()
        .map(|d| (d["source_url"].as_str().unwrap().trim().to_string(), d["content"].as_str().unwrap().to_string()))
        .collect();
    let script: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(fixtures::extraction_script_path(true)).unwrap()).unwrap();
    let by_digest: HashMap<&str, Vec<&str>> = script
        .iter()
        .map(|e| {
            let replies = e["responses"].as_array().unwrap().iter().map(|r| r.as_str().unwrap()).collect();
            (e["document_sha256"].as_str().unwrap(), replies)
        })
        .collect();
    let quarantined = distinct
        .iter()
        .filter(|(_, content)| {
            let digest = hex::encode(Sha256::digest(content.as_bytes()));
            let replies = &by_digest[digest.as_str()];
            !replies.iter().take(2).any(|r| usable_reply(r))
        })
        .count();
    (lines.len(), distinct.len(), quarantined)
}
