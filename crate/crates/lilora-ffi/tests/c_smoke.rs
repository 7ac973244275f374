//! Compiles and runs a small C program against the generated header and the
//! static library, proving the ABI from the consumer side.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <assert.h>
#include <stdio.h>
#include <string.h>
#include "lilora.h"

int main(void) {
    assert(strlen(lilora_version()) > 0);

    /* Isolation pattern: BWT must be exactly zero. */
    double flat[6] = {81.0, 81.0, 64.0, 81.0, 64.0, 92.0};
    double bwt = 1.0;
    LiloraStatus status = lilora_backward_transfer(flat, 6, 3, &bwt);
    assert(status == LILORA_OK);
    assert(bwt == 0.0);

    uint64_t total, per_task, shared;
    status = lilora_param_counts("dir-lora", 64, 64, 8, 4, 1, 1,
                                 &total, &per_task, &shared);
    assert(status == LILORA_OK);
    assert(per_task == 1024);

    LiloraSuite *suite = NULL;
    status = lilora_suite_generate(8, 2, 2, 4, 0.3, 1, &suite);
    assert(status == LILORA_OK);
    uint32_t tasks = 0;
    assert(lilora_suite_num_tasks(suite, &tasks) == LILORA_OK);
    assert(tasks == 2);
    lilora_suite_free(suite);

    printf("c smoke ok\n");
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests live in target/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let cc = ["cc", "gcc", "clang"]
        .iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .copied();
    let Some(cc) = cc else {
        eprintln!("no C compiler found; skipping C smoke test");
        return;
    };

    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    let lib_dir = target_dir();
    let staticlib = lib_dir.join("liblilora_ffi.a");
    assert!(
        staticlib.exists(),
        "static library missing at {}",
        staticlib.display()
    );

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("smoke");

    let compile = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(staticlib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .expect("compiler invocation failed");
    assert!(
        compile.status.success(),
        "compilation failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin).output().expect("smoke binary failed");
    assert!(
        run.status.success(),
        "smoke binary exited with {:?}:\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("c smoke ok"));
}
