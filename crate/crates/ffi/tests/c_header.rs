//! Compiles and runs a C program against the generated header and the
//! shared library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "dsrepair.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s\n", #cond); return 1; } } while (0)

int main(void) {
    DsrKg *kg = NULL;
    CHECK(dsr_kg_new(&kg) == DSR_STATUS_OK);
    const char *doc =
        "{\"qualified_name\": \"numpy.flipud\", \"expression\": \"numpy.flipud(m)\", "
        "\"explanation\": \"Reverse the order of elements along axis 0.\", \"library\": \"numpy\", "
        "\"module\": \"numpy\", \"parameters\": [{\"name\": \"m\", \"position\": 0, \"dtype\": \"array_like\"}], "
        "\"returns\": [{\"index\": 0, \"dtype\": \"ndarray\"}]}\n";
    size_t rejected = 99;
    CHECK(dsr_kg_ingest_jsonl(kg, doc, &rejected) == DSR_STATUS_OK);
    CHECK(rejected == 0);

    char *rows = NULL;
    CHECK(dsr_kg_query(kg, "SELECT ?e WHERE { ds:numpy.flipud has_expression ?e }", &rows) == DSR_STATUS_OK);
    CHECK(strcmp(rows, "[{\"e\":\"numpy.flipud(m)\"}]") == 0);
    dsr_string_free(rows);

    char *text = NULL;
    CHECK(dsr_retrieve_knowledge(kg, "numpy.fliplr", "plus_both", &text) == DSR_STATUS_NOT_FOUND);
    char *msg = dsr_last_error_message();
    CHECK(msg != NULL && strstr(msg, "numpy.fliplr") != NULL);
    dsr_string_free(msg);

    uint64_t in[2] = {600, 400}, out[2] = {300, 200};
    double usd = 0;
    CHECK(dsr_cost(in, out, 2, 0.50, 1.50, &usd) == DSR_STATUS_OK);
    CHECK(usd > 0.00124999 && usd < 0.00125001);

    char *fr = NULL;
    CHECK(dsr_format_fix_rate(104, 562, &fr) == DSR_STATUS_OK);
    CHECK(strcmp(fr, "18.51%") == 0);
    dsr_string_free(fr);

    dsr_kg_free(kg);
    puts("ok");
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests/<exe> lives in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/dsrepair.h");
    assert!(header.exists(), "header not generated");
    let lib_dir = target_dir();
    assert!(lib_dir.join("libdsrepair_ffi.so").exists(), "no shared library in {}", lib_dir.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg(format!("-I{}", manifest.join("include").display()))
        .arg(format!("-L{}", lib_dir.display()))
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-ldsrepair_ffi")
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
