//! Job-market intelligence core: ingestion, LLM structuring, skill
//! labeling, a read-only analytics store and a ReAct agent over it.

pub mod agent;
pub mod chart;
pub mod domain;
pub mod enrichment;
pub mod extraction;
pub mod fixtures;
pub mod ingestion;
mod jsonscan;
pub mod par;
pub mod pipeline;
pub mod provider;
pub mod store;
pub mod toolbox;
