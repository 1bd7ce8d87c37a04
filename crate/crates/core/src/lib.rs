//! Road-accident news harvesting, LLM-based record extraction and
//! gold-standard evaluation.

pub mod chains;
pub mod cli;
pub mod evalkit;
pub mod harvest;
pub mod llmgate;
pub mod markup;
pub mod netfetch;
pub mod pool;
pub mod records;
