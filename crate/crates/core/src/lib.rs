pub mod bug;
pub mod config;
pub mod eval;
pub mod ingest;
pub mod kg;
pub mod llm;
pub mod prompt;
pub mod pysrc;
pub mod retrieval;
