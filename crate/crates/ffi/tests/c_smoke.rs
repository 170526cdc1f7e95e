//! Compiles a small C program against the generated header and the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "pdebc.h"

int main(void) {
    PdebcEnv *env = NULL;
    const char *cfg = "{\"problem\":\"parabolic\",\"nx\":21,\"episode\":{\"horizon\":0.01,\"dt_pde\":1e-4,\"dt_control\":1e-3}}";
    if (pdebc_env_new(cfg, &env) != PDEBC_STATUS_OK) return 10;
    size_t n = pdebc_env_observation_len(env);
    double obs[64];
    if (n > 64) return 11;
    if (pdebc_env_reset(env, 3, obs, n) != PDEBC_STATUS_OK) return 12;
    PdebcStepResult r;
    size_t steps = pdebc_env_episode_steps(env);
    for (size_t k = 0; k < steps; k++) {
        if (pdebc_env_step(env, 0.0, obs, n, &r) != PDEBC_STATUS_OK) return 13;
    }
    if (!r.terminated) return 14;
    PdebcEnv *bad = NULL;
    if (pdebc_env_new("{}", &bad) != PDEBC_STATUS_CONFIG) return 15;
    char msg[128];
    pdebc_last_error(msg, sizeof msg);
    printf("%zu %zu %.6f %s\n", n, steps, r.l2, msg);
    pdebc_env_free(env);
    return 0;
}
"#;

#[test]
fn c_program_runs_an_episode() {
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = target.join("libpdebc_ffi.a");
    // `cargo test` only links the rlib, so build the static library explicitly.
    let mut build = Command::new(env!("CARGO"));
    build.args(["build", "-p", "pdebc-ffi", "--lib"]);
    if target.ends_with("release") {
        build.arg("--release");
    }
    let built = build.status().expect("run cargo");
    assert!(built.success(), "building the static library failed");
    assert!(lib.exists(), "{} missing", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile_dir();
    let src = dir.join("smoke.c");
    let bin = dir.join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status();
    let status = status.unwrap_or_else(|e| panic!("C compiler `{cc}` unavailable: {e}"));
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let line = String::from_utf8(out.stdout).unwrap();
    let f: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(f[0], "21");
    assert_eq!(f[1], "10");
    assert!(line.contains("problem"), "{line}");
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("pdebc-ffi-smoke-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
