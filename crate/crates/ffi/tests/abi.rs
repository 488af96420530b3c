use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cacm_ffi::*;

fn last_error() -> String {
    let p = cacm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn example_rates() {
    let (mut rate, mut reference) = (0.0, 0.0);
    assert_eq!(unsafe { cacm_example1(&mut rate, &mut reference) }, CacmStatus::Ok);
    assert_eq!((rate, reference), (1.0, 1.25));
}

#[test]
fn model_lifecycle() {
    let mut model = ptr::null_mut();
    let status = unsafe { cacm_model_new_uniform(4, 10, 0.2, 0.5, 3, &mut model) };
    assert_eq!(status, CacmStatus::Ok);
    let mut pairs = 0;
    assert_eq!(unsafe { cacm_model_pair_count(model, &mut pairs) }, CacmStatus::Ok);
    // 6 unordered file pairs, 5 packet pairs each
    assert_eq!(pairs, 30);
    let mut h = 0.0;
    assert_eq!(unsafe { cacm_model_conditional_entropy(model, 0, 0, 0, 0, &mut h) }, CacmStatus::Ok);
    assert_eq!(h, 0.0);
    let status = unsafe { cacm_model_conditional_entropy(model, 9, 0, 0, 0, &mut h) };
    assert_eq!(status, CacmStatus::InvalidArgument);
    assert!(last_error().contains("outside"));
    unsafe { cacm_model_free(model) };
    unsafe { cacm_model_free(ptr::null_mut()) };
}

#[test]
fn model_errors_map_to_status() {
    let mut model = ptr::null_mut();
    let status = unsafe { cacm_model_new_uniform(4, 2, 0.2, 3.0, 0, &mut model) };
    assert_eq!(status, CacmStatus::Library);
    assert!(model.is_null());
    assert_eq!(unsafe { cacm_model_pair_count(ptr::null(), &mut 0) }, CacmStatus::NullPointer);
    assert!(last_error().contains("model"));
}

#[test]
fn bound_and_optimizer() {
    let q = [0.5, 0.5];
    let p = [0.5, 0.5];
    let mut r = CacmBoundReport::default();
    let status = unsafe { cacm_rate_bound(2, 1.0, 2, q.as_ptr(), p.as_ptr(), 0.0, ptr::null(), &mut r) };
    assert_eq!(status, CacmStatus::Ok);
    assert_eq!(r.m_bar, 1.5);
    assert_eq!(r.delta_r, 0.0);
    assert!(r.bound <= r.m_bar);

    let mut out = [0.0; 2];
    let mut bound = 0.0;
    let g = [1.0, 0.5, 0.5, 1.0];
    let status =
        unsafe { cacm_optimize_p(2, 2.0, 2, q.as_ptr(), 0.2, g.as_ptr(), out.as_mut_ptr(), &mut bound) };
    assert_eq!(status, CacmStatus::Ok);
    assert_eq!(bound, 0.0);
    assert!((out[0] + out[1] - 1.0).abs() < 1e-12);

    let bad = [0.9, 0.9];
    let status = unsafe { cacm_rate_bound(2, 1.0, 2, q.as_ptr(), bad.as_ptr(), 0.0, ptr::null(), &mut r) };
    assert_eq!(status, CacmStatus::Bound);
}

const SCENARIO: &str = r#"
schema_version = 1
[library]
files = 6
packets = 4
delta = 0.2
matrix = { kind = "partners", per_packet = 1.0 }
[demand]
receivers = 3
zipf_alpha = 0.8
[sweep]
cache_sizes = [0, 2]
schemes = ["LC_U", "CA_RAP_CM"]
[sampling]
cache_draws = 2
demand_draws = 3
"#;

#[test]
fn scenario_run_and_json() {
    let text = CString::new(SCENARIO).unwrap();
    let mut scenario = ptr::null_mut();
    assert_eq!(unsafe { cacm_scenario_from_toml(text.as_ptr(), &mut scenario) }, CacmStatus::Ok);
    let mut record = ptr::null_mut();
    assert_eq!(unsafe { cacm_run(scenario, &mut record) }, CacmStatus::Ok);
    let mut count = 0;
    assert_eq!(unsafe { cacm_record_point_count(record, &mut count) }, CacmStatus::Ok);
    assert_eq!(count, 4);
    let (mut m, mut rate, mut se) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { cacm_record_point(record, 0, &mut m, &mut rate, &mut se) }, CacmStatus::Ok);
    assert_eq!(m, 0.0);
    assert!((rate - 3.0).abs() < 1e-12);
    let status = unsafe { cacm_record_point(record, 9, &mut m, &mut rate, &mut se) };
    assert_eq!(status, CacmStatus::InvalidArgument);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { cacm_record_to_json(record, &mut json) }, CacmStatus::Ok);
    let parsed: serde_json::Value =
        serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(parsed["points"].as_array().unwrap().len(), 4);
    unsafe {
        cacm_string_free(json);
        cacm_record_free(record);
        cacm_scenario_free(scenario);
    }
}

#[test]
fn scenario_errors() {
    let bad = CString::new("schema_version = 1\nbogus = 2\n").unwrap();
    let mut scenario = ptr::null_mut();
    assert_eq!(unsafe { cacm_scenario_from_toml(bad.as_ptr(), &mut scenario) }, CacmStatus::Scenario);
    assert!(scenario.is_null());
    let invalid = [0xffu8, 0];
    let status = unsafe { cacm_scenario_from_toml(invalid.as_ptr().cast(), &mut scenario) };
    assert_eq!(status, CacmStatus::InvalidUtf8);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(cacm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke test against the generated header and static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(|deps| deps.parent()).unwrap();
    let lib = target.join("libcacm_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
