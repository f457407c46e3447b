use std::ffi::{CStr, CString, c_char};
use std::path::Path;
use std::process::Command;
use std::ptr;

use qfred::io::{ModelFile, to_json};
use qfred::models::{ChainSpec, build_spin_chain};
use qfred_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qfred_last_error()) }.to_str().unwrap().to_owned()
}

fn chain_json(n: usize) -> CString {
    let model = build_spin_chain(&ChainSpec::uniform(n, 1.0, 0.7, 0.5, 0.5)).unwrap();
    CString::new(to_json(&ModelFile::from(&model))).unwrap()
}

fn load(json: &CString) -> *mut QfredModel {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { qfred_model_from_json(json.as_ptr(), &mut model) }, QfredStatus::Ok);
    assert!(!model.is_null());
    model
}

fn take_string(s: *mut c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { qfred_string_free(s) };
    out
}

#[test]
fn chain_reduction_round_trip() {
    let model = load(&chain_json(3));
    assert_eq!(unsafe { qfred_model_dim(model) }, 8);

    for (algebra, kappa) in [(QfredAlgebra::Auto, true), (QfredAlgebra::Chain, false)] {
        let mut red = ptr::null_mut();
        assert_eq!(unsafe { qfred_reduce(model, algebra, 0, &mut red) }, QfredStatus::Ok, "{}", last_error());
        let mut info = QfredReductionInfo::default();
        assert_eq!(unsafe { qfred_reduction_info(red, &mut info) }, QfredStatus::Ok);
        assert_eq!((info.alg_dim, info.reduced_dim, info.num_blocks), (32, 8, 2));
        assert!(info.invariant);
        assert_eq!(info.kappa >= 1, kappa);

        let (mut f, mut g) = ([0usize; 1], [0usize; 1]);
        assert_eq!(
            unsafe { qfred_reduction_blocks(red, f.as_mut_ptr(), g.as_mut_ptr(), 1) },
            QfredStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 2"));
        let (mut f, mut g) = ([0usize; 2], [0usize; 2]);
        assert_eq!(unsafe { qfred_reduction_blocks(red, f.as_mut_ptr(), g.as_mut_ptr(), 2) }, QfredStatus::Ok);
        assert_eq!((f, g), ([4, 4], [1, 1]));

        let mut json = ptr::null_mut();
        assert_eq!(unsafe { qfred_reduction_to_json(red, &mut json) }, QfredStatus::Ok);
        let value: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(value["m"], 8);
        unsafe { qfred_reduction_free(red) };
    }
    unsafe { qfred_model_free(model) };
}

#[test]
fn compare_report_through_the_abi() {
    let model = load(&chain_json(2));
    let params = QfredSimParams {
        t_final: 0.2,
        dt: 1e-3,
        seed: 7,
        scheme: QfredScheme::PositivityPreserving,
    };
    let mut report = ptr::null_mut();
    let mut dev = f64::NAN;
    let status = unsafe { qfred_compare(model, QfredAlgebra::Auto, &params, &mut report, &mut dev) };
    assert_eq!(status, QfredStatus::Ok, "{}", last_error());
    assert!(dev < 1e-8, "deviation {dev}");
    let value: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
    assert_eq!(value["pass"], true);
    assert!(value.get("runtimes_s").is_none_or(|v| v.is_null()));

    // Null optional output is fine.
    let mut report = ptr::null_mut();
    let status = unsafe { qfred_compare(model, QfredAlgebra::Chain, &params, &mut report, ptr::null_mut()) };
    assert_eq!(status, QfredStatus::Ok, "{}", last_error());
    take_string(report);
    unsafe { qfred_model_free(model) };
}

#[test]
fn error_codes_and_messages() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { qfred_model_from_json(ptr::null(), &mut model) }, QfredStatus::NullPointer);
    assert!(last_error().contains("null"));

    let bad = CString::new("{\"n\": 2").unwrap();
    assert_eq!(unsafe { qfred_model_from_json(bad.as_ptr(), &mut model) }, QfredStatus::Parse);
    assert!(!last_error().is_empty());
    assert!(model.is_null());

    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { qfred_model_from_json(invalid.as_ptr().cast(), &mut model) },
        QfredStatus::InvalidUtf8
    );

    // Chain algebra needs a 2^N-dimensional model of chain form; a 3-level model is rejected.
    let three = CString::new(r#"{"n":3,"H":[[[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[-1,0]]],"O":[[[[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]]}"#).unwrap();
    let model = load(&three);
    let mut red = ptr::null_mut();
    let status = unsafe { qfred_reduce(model, QfredAlgebra::Chain, 0, &mut red) };
    assert_ne!(status, QfredStatus::Ok);
    assert!(red.is_null());
    assert!(!last_error().is_empty());

    // Success clears the message.
    assert_eq!(unsafe { qfred_reduce(model, QfredAlgebra::Auto, 0, &mut red) }, QfredStatus::Ok);
    assert!(last_error().is_empty());
    unsafe {
        qfred_reduction_free(red);
        qfred_model_free(model);
    }

    let mut info = QfredReductionInfo::default();
    assert_eq!(unsafe { qfred_reduction_info(ptr::null(), &mut info) }, QfredStatus::NullPointer);
    assert_eq!(unsafe { qfred_model_dim(ptr::null()) }, 0);
    unsafe {
        qfred_model_free(ptr::null_mut());
        qfred_reduction_free(ptr::null_mut());
        qfred_string_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(qfred_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_abi() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qfred.h");
    let header = std::fs::read_to_string(&path).unwrap();
    for name in [
        "qfred_last_error",
        "qfred_model_from_json",
        "qfred_model_free",
        "qfred_model_dim",
        "qfred_reduce",
        "qfred_reduction_free",
        "qfred_reduction_info",
        "qfred_reduction_blocks",
        "qfred_reduction_to_json",
        "qfred_compare",
        "qfred_string_free",
        "qfred_version",
        "QFRED_STATUS_OK",
        "typedef struct QfredModel QfredModel",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }

    // When a C compiler is available, the header must compile as C.
    let Ok(cc) = Command::new("cc").arg("--version").output() else { return };
    if !cc.status.success() {
        return;
    }
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
}
