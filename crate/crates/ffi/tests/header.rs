use std::path::Path;
use std::process::Command;

/// The generated header is valid C and C++ and declares the whole API.
#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/sgiga.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for sym in [
        "sgiga_experiment_new",
        "sgiga_robustness_new",
        "sgiga_experiment_free",
        "sgiga_dof_count",
        "sgiga_solve",
        "sgiga_last_error_message",
        "sgiga_default_options",
        "sgiga_version",
        "typedef struct SgigaExperiment SgigaExperiment",
        "SGIGA_STATUS_OK = 0",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
    let tmp = std::env::temp_dir().join(format!("sgiga_header_{}", std::process::id()));
    std::fs::create_dir_all(&tmp).unwrap();
    let src = tmp.join("use.c");
    std::fs::write(
        &src,
        "#include \"sgiga.h\"\nint main(void) { SgigaOptions o = sgiga_default_options(); return (int)o.gauss - 3; }\n",
    )
    .unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let out = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg("-I")
            .arg(dir.join("include"))
            .arg(&src)
            .output()
            .unwrap_or_else(|e| panic!("{compiler} not runnable: {e}"));
        assert!(
            out.status.success(),
            "{compiler}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    std::fs::remove_dir_all(&tmp).ok();
}
