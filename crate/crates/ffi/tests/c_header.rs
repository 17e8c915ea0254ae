//! Compiles and runs a small C program against the generated header and
//! the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "morse_entropy.h"

int main(void) {
    MeModel *m = NULL;
    if (me_model_builtin("uncoupled_double_well", 3, &m) != ME_OK) return 10;
    MeCatalog *c = NULL;
    if (me_find_critical_points(m, 0.1, 7, 0, 1, &c) != ME_OK) return 11;
    size_t len = 0;
    me_catalog_len(c, &len);
    int64_t chi = 0;
    me_catalog_euler(c, 0.05, &chi);
    double f = 0.0;
    int rc = me_eval_f(0.1, 0, 3, 1.0, &f);
    char msg[256];
    me_last_error_message(msg, sizeof msg, NULL);
    printf("%zu %lld %d %s\n", len, (long long)chi, rc, msg);
    me_catalog_free(c);
    me_model_free(m);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libmorse_entropy_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler ({cc}); header compile check not run");
        return;
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_header");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("27 1 4 EdgeIndex"), "{text}");
}
