#ifndef DSREPAIR_H
#define DSREPAIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum DsrStatus {
  DSR_STATUS_OK = 0,
  // A required pointer argument was null.
  DSR_STATUS_NULL_ARGUMENT = 1,
  // An input string was not valid UTF-8, or held an interior NUL.
  DSR_STATUS_INVALID_UTF8 = 2,
  // Malformed input: a dump, a query, or a richness name.
  DSR_STATUS_PARSE = 3,
  // Input parsed but was rejected (e.g. documentation records).
  DSR_STATUS_VALIDATION = 4,
  // The requested API is not in the graph.
  DSR_STATUS_NOT_FOUND = 5,
  DSR_STATUS_PANIC = 6,
} DsrStatus;

// Opaque knowledge graph handle.
typedef struct DsrKg DsrKg;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy of the last error message on this thread, or null if the last call
// succeeded. Free with `dsr_string_free`.
char *dsr_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or came from this library and was not freed before.
void dsr_string_free(char *s);

// Creates an empty graph.
//
// # Safety
// `out` is valid for writes.
enum DsrStatus dsr_kg_new(struct DsrKg **out);

// Releases a graph. Null is ignored.
//
// # Safety
// `kg` is null or a live handle not used afterwards.
void dsr_kg_free(struct DsrKg *kg);

// Adds line-delimited documentation records to the graph. Bad lines are
// skipped and counted in `out_rejected`; the status is still `Ok`.
//
// # Safety
// `kg` is a live handle with no concurrent users; `jsonl` is a valid
// string; `out_rejected` is null or valid for writes.
enum DsrStatus dsr_kg_ingest_jsonl(struct DsrKg *kg, const char *jsonl, size_t *out_rejected);

// Number of triples in the graph.
//
// # Safety
// `kg` is a live handle; `out` is valid for writes.
enum DsrStatus dsr_kg_len(const struct DsrKg *kg, size_t *out);

// Parses a canonical dump into a new graph.
//
// # Safety
// `dump` is a valid string; `out` is valid for writes.
enum DsrStatus dsr_kg_load(const char *dump, struct DsrKg **out);

// Writes the canonical dump of the graph.
//
// # Safety
// `kg` is a live handle; `out` is valid for writes.
enum DsrStatus dsr_kg_save(const struct DsrKg *kg, char **out);

// Runs a SELECT query. The result is a JSON array with one object per
// solution, mapping each projected variable to its value.
//
// # Safety
// `kg` is a live handle; `query` is a valid string; `out_json` is valid
// for writes.
enum DsrStatus dsr_kg_query(const struct DsrKg *kg, const char *query, char **out_json);

// Extracts API invocations from Python source. The result is a JSON array
// of `{raw_chain, qualified_name, source_line, resolved}` objects.
//
// # Safety
// `code` is a valid string; `out_json` is valid for writes.
enum DsrStatus dsr_extract_invocations(const char *code, char **out_json);

// Verbalized knowledge about one API, one sentence per line. `richness`
// is one of `expression_only`, `plus_explanation`, `plus_params_returns`,
// `plus_both`. Returns `NotFound` for APIs absent from the graph.
//
// # Safety
// `kg` is a live handle; the strings are valid; `out_text` is valid for
// writes.
enum DsrStatus dsr_retrieve_knowledge(const struct DsrKg *kg,
                                      const char *qualified_name,
                                      const char *richness,
                                      char **out_text);

// Cleans runner stderr for a prompt: paths shortened, warnings dropped,
// library frames collapsed.
//
// # Safety
// `stderr_text` is a valid string; `out_text` is valid for writes.
enum DsrStatus dsr_clean_stderr(const char *stderr_text, char **out_text);

// Spend in USD for `n` exchanges, prices in USD per million tokens.
//
// # Safety
// `input_tokens` and `output_tokens` point to `n` values each (or may be
// null when `n` is 0); `out_usd` is valid for writes.
enum DsrStatus dsr_cost(const uint64_t *input_tokens,
                        const uint64_t *output_tokens,
                        size_t n,
                        double price_in_per_million,
                        double price_out_per_million,
                        double *out_usd);

// `anf / n` as a percentage string with two decimals, e.g. `18.51%`.
//
// # Safety
// `out_text` is valid for writes.
enum DsrStatus dsr_format_fix_rate(uint64_t anf, uint64_t n, char **out_text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSREPAIR_H */
