pub mod classifier;
pub mod corpus;
pub mod eval;
pub mod labeler;
pub mod llm;
pub mod retriever;
pub mod strategies;
