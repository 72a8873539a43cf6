//! Compile and run a small C program against the generated header and the
//! static library that cargo built alongside this test.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "nodal_lab.h"

int main(void) {
    const char *json =
        "{\"manifold\":{\"kind\":\"torus\",\"side_lengths\":[1.0,1.0,1.0]},"
        "\"modes\":[[1,0,0]],\"coefficients\":[[0.0,1.0]],"
        "\"lambda\":39.47841760435743,\"seed\":null}";
    NlSpec *spec = NULL;
    if (nl_spec_from_json(json, &spec) != NL_OK) { fprintf(stderr, "%s\n", nl_last_error()); return 10; }
    NlField *field = NULL;
    if (nl_field_sample(spec, 32, &field) != NL_OK) return 11;
    NlDecomposition *d = NULL;
    if (nl_decompose(field, &d) != NL_OK) return 12;
    size_t n = 0;
    nl_decomposition_domain_count(d, &n);
    if (n != 2) return 13;
    NlDomainInfo info;
    nl_decomposition_domain(d, 0, &info);
    if (fabs(info.inradius - 0.25) > 1.0 / 32.0) return 14;
    if (nl_field_sample(spec, 1, &field) != NL_UNDER_RESOLVED) return 15;
    if (strstr(nl_last_error(), "Nyquist") == NULL) return 16;
    nl_decomposition_free(d);
    nl_field_free(field);
    nl_spec_free(spec);
    printf("ok %zu\n", n);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler ({cc}); skipping");
        return;
    }
    // the test binary sits next to the library artifacts in target/<profile>/deps
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("libnodal_lab_ffi.a");
    assert!(lib.is_file(), "{} missing", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout), "ok 2\n");
}
