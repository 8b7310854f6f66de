//! C ABI over the dsrepair library.
//!
//! Conventions:
//! - Every function returns a [`DsrStatus`]; results go through out-pointers.
//! - Strings in are NUL-terminated UTF-8. Strings out are owned by the
//!   caller and released with [`dsr_string_free`].
//! - A graph is an opaque [`DsrKg`] handle from [`dsr_kg_new`] or
//!   [`dsr_kg_load`], released with [`dsr_kg_free`]. A handle may be shared
//!   across threads for reads; mutation (`dsr_kg_ingest_jsonl`) needs
//!   exclusive access.
//! - After a non-`Ok` status, [`dsr_last_error_message`] describes the
//!   failure on the calling thread.
//! - Panics never cross the boundary; they surface as `DSR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dsrepair::eval::format_fix_rate;
use dsrepair::ingest::ingest_str;
use dsrepair::kg::{load_dump, parse_select, save_dump, KnowledgeGraph};
use dsrepair::llm::{cost, CostModel, Usage};
use dsrepair::prompt::clean_stderr;
use dsrepair::retrieval::{extract_invocations, retrieve, Retrieved, RichnessLevel};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An input string was not valid UTF-8, or held an interior NUL.
    InvalidUtf8 = 2,
    /// Malformed input: a dump, a query, or a richness name.
    Parse = 3,
    /// Input parsed but was rejected (e.g. documentation records).
    Validation = 4,
    /// The requested API is not in the graph.
    NotFound = 5,
    Panic = 6,
}

/// Opaque knowledge graph handle.
pub struct DsrKg {
    graph: KnowledgeGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(DsrStatus, String);

type Outcome = Result<(), Failure>;

/// Runs `f`, recording errors and containing panics.
fn guard(f: impl FnOnce() -> Outcome) -> DsrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DsrStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(DsrStatus::NullArgument, format!("`{name}` is null"))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn input<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(DsrStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

/// # Safety
/// `out` is null or valid for writes.
unsafe fn write_string(out: *mut *mut c_char, text: String) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(text).map_err(|_| Failure(DsrStatus::InvalidUtf8, "result holds a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// # Safety
/// `kg` is null or a live handle.
unsafe fn handle<'a>(kg: *const DsrKg) -> Result<&'a DsrKg, Failure> {
    kg.as_ref().ok_or_else(|| null("kg"))
}

/// Copy of the last error message on this thread, or null if the last call
/// succeeded. Free with `dsr_string_free`.
#[no_mangle]
pub extern "C" fn dsr_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or came from this library and was not freed before.
#[no_mangle]
pub unsafe extern "C" fn dsr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates an empty graph.
///
/// # Safety
/// `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_kg_new(out: *mut *mut DsrKg) -> DsrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(DsrKg { graph: KnowledgeGraph::new() }));
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `kg` is null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dsr_kg_free(kg: *mut DsrKg) {
    if !kg.is_null() {
        drop(Box::from_raw(kg));
    }
}

/// Adds line-delimited documentation records to the graph. Bad lines are
/// skipped and counted in `out_rejected`; the status is still `Ok`.
///
/// # Safety
/// `kg` is a live handle with no concurrent users; `jsonl` is a valid
/// string; `out_rejected` is null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_kg_ingest_jsonl(kg: *mut DsrKg, jsonl: *const c_char, out_rejected: *mut usize) -> DsrStatus {
    guard(|| {
        let kg = kg.as_mut().ok_or_else(|| null("kg"))?;
        let text = input(jsonl, "jsonl")?;
        let (added, report) = ingest_str(text);
        kg.graph
            .extend(added.triples().cloned())
            .map_err(|e| Failure(DsrStatus::Validation, e.to_string()))?;
        for (lib, version) in added.metadata() {
            kg.graph.set_library_version(lib.clone(), version.clone());
        }
        if let Some(e) = report.errors.first() {
            set_error(e.to_string());
        }
        if !out_rejected.is_null() {
            *out_rejected = report.errors.len();
        }
        Ok(())
    })
}

/// Number of triples in the graph.
///
/// # Safety
/// `kg` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_kg_len(kg: *const DsrKg, out: *mut usize) -> DsrStatus {
    guard(|| {
        let kg = handle(kg)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = kg.graph.len();
        Ok(())
    })
}

/// Parses a canonical dump into a new graph.
///
/// # Safety
/// `dump` is a valid string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_kg_load(dump: *const c_char, out: *mut *mut DsrKg) -> DsrStatus {
    guard(|| {
        let text = input(dump, "dump")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = load_dump(text).map_err(|e| Failure(DsrStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(DsrKg { graph }));
        Ok(())
    })
}

/// Writes the canonical dump of the graph.
///
/// # Safety
/// `kg` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_kg_save(kg: *const DsrKg, out: *mut *mut c_char) -> DsrStatus {
    guard(|| {
        let kg = handle(kg)?;
        write_string(out, save_dump(&kg.graph))
    })
}

/// Runs a SELECT query. The result is a JSON array with one object per
/// solution, mapping each projected variable to its value.
///
/// # Safety
/// `kg` is a live handle; `query` is a valid string; `out_json` is valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_kg_query(kg: *const DsrKg, query: *const c_char, out_json: *mut *mut c_char) -> DsrStatus {
    guard(|| {
        let kg = handle(kg)?;
        let q = parse_select(input(query, "query")?).map_err(|e| Failure(DsrStatus::Parse, e.to_string()))?;
        let vars = q.projection();
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = q
            .execute(&kg.graph)
            .iter()
            .map(|s| {
                vars.iter()
                    .filter_map(|v| s.get(v).map(|t| (v.clone(), serde_json::Value::from(t.value()))))
                    .collect()
            })
            .collect();
        write_string(out_json, serde_json::to_string(&rows).expect("serializable rows"))
    })
}

/// Extracts API invocations from Python source. The result is a JSON array
/// of `{raw_chain, qualified_name, source_line, resolved}` objects.
///
/// # Safety
/// `code` is a valid string; `out_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_extract_invocations(code: *const c_char, out_json: *mut *mut c_char) -> DsrStatus {
    guard(|| {
        let (_, invocations) = extract_invocations(input(code, "code")?);
        write_string(out_json, serde_json::to_string(&invocations).expect("serializable invocations"))
    })
}

/// Verbalized knowledge about one API, one sentence per line. `richness`
/// is one of `expression_only`, `plus_explanation`, `plus_params_returns`,
/// `plus_both`. Returns `NotFound` for APIs absent from the graph.
///
/// # Safety
/// `kg` is a live handle; the strings are valid; `out_text` is valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_retrieve_knowledge(
    kg: *const DsrKg,
    qualified_name: *const c_char,
    richness: *const c_char,
    out_text: *mut *mut c_char,
) -> DsrStatus {
    guard(|| {
        let kg = handle(kg)?;
        let name = input(qualified_name, "qualified_name")?;
        let level: RichnessLevel = input(richness, "richness")?.parse().map_err(|e| Failure(DsrStatus::Parse, e))?;
        match retrieve(&kg.graph, name, level) {
            Retrieved::Knowledge(block) => write_string(out_text, block.sentences.join("\n")),
            Retrieved::Unresolved(n) => Err(Failure(DsrStatus::NotFound, format!("no documentation for `{n}`"))),
        }
    })
}

/// Cleans runner stderr for a prompt: paths shortened, warnings dropped,
/// library frames collapsed.
///
/// # Safety
/// `stderr_text` is a valid string; `out_text` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_clean_stderr(stderr_text: *const c_char, out_text: *mut *mut c_char) -> DsrStatus {
    guard(|| write_string(out_text, clean_stderr(input(stderr_text, "stderr_text")?)))
}

/// Spend in USD for `n` exchanges, prices in USD per million tokens.
///
/// # Safety
/// `input_tokens` and `output_tokens` point to `n` values each (or may be
/// null when `n` is 0); `out_usd` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_cost(
    input_tokens: *const u64,
    output_tokens: *const u64,
    n: usize,
    price_in_per_million: f64,
    price_out_per_million: f64,
    out_usd: *mut f64,
) -> DsrStatus {
    guard(|| {
        let out = out_usd.as_mut().ok_or_else(|| null("out_usd"))?;
        let usages: Vec<Usage> = if n == 0 {
            Vec::new()
        } else {
            if input_tokens.is_null() || output_tokens.is_null() {
                return Err(null("input_tokens/output_tokens"));
            }
            let ins = std::slice::from_raw_parts(input_tokens, n);
            let outs = std::slice::from_raw_parts(output_tokens, n);
            ins.iter().zip(outs).map(|(&i, &o)| Usage { input_tokens: i, output_tokens: o }).collect()
        };
        *out = cost(&usages, &CostModel::per_million(price_in_per_million, price_out_per_million));
        Ok(())
    })
}

/// `anf / n` as a percentage string with two decimals, e.g. `18.51%`.
///
/// # Safety
/// `out_text` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dsr_format_fix_rate(anf: u64, n: u64, out_text: *mut *mut c_char) -> DsrStatus {
    guard(|| write_string(out_text, format_fix_rate(anf, n)))
}
