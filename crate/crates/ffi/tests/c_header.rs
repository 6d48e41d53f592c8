//! Compiles and runs a small C program against the generated header and the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "rwre.h"

int main(void) {
    const char *spec = "{\"d\":1,\"increment_law\":{\"kind\":\"rademacher\"},"
                       "\"delta_law\":{\"kind\":\"zero\"},\"seed\":4}";
    RwreEnvironment *env = NULL;
    if (rwre_env_new(spec, &env) != RWRE_STATUS_OK) return 1;
    uint32_t d = 0;
    if (rwre_env_dim(env, &d) != RWRE_STATUS_OK || d != 1) return 2;
    int32_t x = 0;
    double v = -1.0;
    if (rwre_env_potential(env, &x, 1, &v) != RWRE_STATUS_OK || v != 0.0) return 3;
    uint64_t counts[32] = {0};
    size_t reached = 0;
    if (rwre_walk_shells(env, &x, 1, 1000, 1, counts, 32, &reached) != RWRE_STATUS_OK) return 4;
    uint64_t total = 0;
    for (size_t i = 0; i < 32; i++) total += counts[i];
    if (reached <= 32 && total != 1000) return 5;
    if (rwre_env_new("{", &env) != RWRE_STATUS_JSON) return 6;
    if (rwre_last_error() == NULL) return 7;
    rwre_env_free(env);
    printf("%s\n", rwre_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|deps| deps.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("rwre.h").exists(), "header not generated");
    let lib = target_dir().join("librwre_ffi.a");
    if !lib.exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let mut build = Command::new(cargo);
        build.args(["build", "-p", "rwre-ffi", "--lib"]);
        if target_dir().ends_with("release") {
            build.arg("--release");
        }
        let status = build.current_dir(&manifest).status().expect("run cargo build");
        assert!(status.success(), "building the static library failed");
    }
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let work = std::env::temp_dir().join(format!("rwre_ffi_c_{}", std::process::id()));
    std::fs::create_dir_all(&work).unwrap();
    let src = work.join("main.c");
    let bin = work.join("main");
    std::fs::write(&src, PROGRAM).unwrap();

    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("run C compiler");
    assert!(status.success(), "C compile failed");

    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
    let _ = std::fs::remove_dir_all(&work);
}
