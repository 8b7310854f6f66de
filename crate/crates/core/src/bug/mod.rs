//! Bug knowledge: example-test extraction, the sandbox runner protocol and
//! its process/replay clients, and mapping runner traces to bug reports.

mod enrich;
mod protocol;
mod runner;
mod tests_extract;

pub use enrich::{
    enrich, localize_request, map_response, run_tests_request, BugKind, BugReport, NOTHING_EXECUTED,
    STATEMENT_UNKNOWN,
};
pub use protocol::{
    truncate_repr, FailureKind, RunMode, RunRequest, RunResponse, RunStatus, CAPTURED_REPR_LIMIT, MAX_TIMEOUT_S,
};
pub use runner::{ProcessRunner, RecordingRunner, ReplayRunner, Runner, RunnerError, RunnerExchange};
pub use tests_extract::{expected_from_assertion, extract_tests, extract_tests_from_record, TestSpec};
