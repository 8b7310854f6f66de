//! API knowledge retrieval: lexical call extraction with import-alias
//! resolution, graph lookup and verbalization, plus the plain-text baseline.

mod extract;
mod plain_text;
mod verbalize;

pub use extract::{extract_invocations, ApiInvocation, ImportMap};
pub use plain_text::{retrieve_plain_text, PlainTextCorpus, WINDOW_TOKENS};
pub use verbalize::{
    order_by_failure, retrieve, retrieve_all, ApiKnowledge, KnowledgeBlock, RetrievalScope, Retrieved,
    RichnessLevel,
};

/// Plain-text counterpart of [`retrieve_all`]: one block per invocation with
/// at least one matching window.
pub fn retrieve_all_plain_text(corpus: &PlainTextCorpus, invocations: &[ApiInvocation]) -> ApiKnowledge {
    let mut out = ApiKnowledge::default();
    for inv in invocations {
        let windows = retrieve_plain_text(corpus, &inv.qualified_name);
        if windows.is_empty() {
            out.unresolved.push(inv.qualified_name.clone());
        } else {
            out.blocks.push(KnowledgeBlock { qualified_name: inv.qualified_name.clone(), sentences: windows });
        }
    }
    out
}
