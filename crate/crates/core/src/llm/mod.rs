//! Generator client: prompt construction, backends and answer extraction.

mod answer;
mod backend;
pub mod mock;
pub mod prompt;
pub mod remote;

pub use answer::{escape_cue, extract_answer, ANSWER_CUE};
pub use backend::{
    generate, truncate_at_stop, GenerationRequest, GenerationResponse, GeneratorBackend, LlmError,
};
pub use mock::{MockRule, ScriptedMock};
pub use prompt::{PromptError, PromptTemplates, NO_DOCUMENTS_MARKER};
pub use remote::{RemoteBackend, RemoteConfig};
