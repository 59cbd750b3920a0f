//! The generated header declares every exported symbol, and a C program
//! compiled against it links and runs.

use std::path::{Path, PathBuf};
use std::process::Command;

const SYMBOLS: &[&str] = &[
    "urc_last_error_message",
    "urc_version",
    "urc_qfunc",
    "urc_qfunc_inv",
    "urc_capacity_per_cu",
    "urc_dispersion",
    "urc_max_info_bits",
    "urc_min_blocklength",
    "urc_achieved_error",
    "urc_min_snr",
    "urc_degrees_of_freedom",
    "urc_required_bandwidth",
    "urc_budget_plan",
    "urc_compare_encodings",
    "urc_trace_generate",
    "urc_trace_len",
    "urc_trace_copy_samples",
    "urc_trace_availability",
    "urc_trace_free",
    "urc_run_config",
    "urc_string_free",
];

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_all_symbols() {
    let header = std::fs::read_to_string(crate_dir().join("include/urc.h")).unwrap();
    assert!(header.contains("#ifndef URC_H"));
    assert!(header.contains("typedef struct UrcTrace UrcTrace;"));
    assert!(header.contains("URC_STATUS_NULL_POINTER = 8"));
    for sym in SYMBOLS {
        assert!(header.contains(&format!("{sym}(")), "missing {sym}");
    }
}

/// Directory holding the staticlib built alongside this test binary.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = artifact_dir().join("liburc_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());

    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .unwrap_or_else(|e| panic!("failed to launch {cc}: {e}"));
    assert!(out.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&out.stderr));

    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "smoke failed:\n{stdout}\n{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("n_min=119"), "{stdout}");
    assert!(stdout.contains("bandwidth=64000"), "{stdout}");
}
