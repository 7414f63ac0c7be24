use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hgp_core::bank::{BankMode, KernelBank, ModelPair, Provenance};
use hgp_core::gp::{GpHyperparams, GpModel, SeriesKind};
use hgp_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { hgp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn state(t: f64, x: f64) -> HgpState {
    HgpState { t, x, y: 0.0, speed: 10.0, heading: 0.0, accel: 0.0 }
}

#[test]
fn predictor_lifecycle() {
    unsafe {
        let mut p = ptr::null_mut();
        let name = CString::new("cs").unwrap();
        assert_eq!(hgp_predictor_new(name.as_ptr(), ptr::null(), &mut p), HgpStatus::Ok);
        let mut out = [HgpForecastPoint {
            t: 0.0,
            x: 0.0,
            y: 0.0,
            speed_mean: 0.0,
            speed_var: 0.0,
            heading_mean: 0.0,
            heading_var: 0.0,
        }; 4];
        let mut n = 7;
        assert_eq!(hgp_predictor_forecast(p, 4, out.as_mut_ptr(), 4, &mut n), HgpStatus::Ok);
        assert_eq!(n, 0);
        assert_eq!(hgp_predictor_observe(p, &state(0.0, 0.0)), HgpStatus::Ok);
        assert_eq!(hgp_predictor_observe(p, &state(0.0, 0.0)), HgpStatus::InvalidArgument);
        assert!(last_error().contains("newer"));
        assert_eq!(hgp_predictor_forecast(p, 4, out.as_mut_ptr(), 4, &mut n), HgpStatus::Ok);
        assert_eq!(n, 4);
        assert!((out[3].x - 4.0).abs() < 1e-12);
        assert_eq!(hgp_predictor_forecast(p, 5, out.as_mut_ptr(), 4, &mut n), HgpStatus::BufferTooSmall);
        assert!(!last_error().is_empty());
        hgp_predictor_free(p);
        hgp_predictor_free(ptr::null_mut());
    }
}

#[test]
fn null_and_bad_input_are_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(hgp_predictor_new(ptr::null(), ptr::null(), &mut p), HgpStatus::NullPointer);
        assert!(last_error().contains("name"));
        let hgp = CString::new("hgp").unwrap();
        assert_eq!(hgp_predictor_new(hgp.as_ptr(), ptr::null(), &mut p), HgpStatus::Config);
        let bad = [0xffu8, 0];
        assert_eq!(hgp_predictor_new(bad.as_ptr().cast(), ptr::null(), &mut p), HgpStatus::InvalidUtf8);
        let mut b = ptr::null_mut();
        let missing = CString::new("/nonexistent/x.bank.json").unwrap();
        assert_eq!(hgp_bank_load(missing.as_ptr(), &mut b), HgpStatus::Io);
        assert!(b.is_null());
        assert_eq!(hgp_bank_len(ptr::null()), 0);
        // Success clears the message.
        let ca = CString::new("ca").unwrap();
        assert_eq!(hgp_predictor_new(ca.as_ptr(), ptr::null(), &mut p), HgpStatus::Ok);
        assert_eq!(hgp_last_error_message(ptr::null_mut(), 0), 0);
        hgp_predictor_free(p);
    }
}

#[test]
fn bank_backed_hgp_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.bank.json");
    let mut bank = KernelBank::new(30, 0.5, BankMode::Indirect).unwrap();
    let th = GpHyperparams::new(1.0, 0.5, 0.1).unwrap();
    bank.push(ModelPair {
        id: 0,
        speed_model: GpModel::with_hyperparams(SeriesKind::Speed, th),
        heading_model: GpModel::with_hyperparams(SeriesKind::Heading, th),
        created_at: Provenance { trip: "t".into(), t: 0.0 },
        usage_count: 0,
    })
    .unwrap();
    bank.save(&path).unwrap();
    unsafe {
        let mut b = ptr::null_mut();
        let c = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(hgp_bank_load(c.as_ptr(), &mut b), HgpStatus::Ok, "{}", last_error());
        assert_eq!(hgp_bank_len(b), 1);
        let mut p = ptr::null_mut();
        let name = CString::new("hgp").unwrap();
        assert_eq!(hgp_predictor_new(name.as_ptr(), b, &mut p), HgpStatus::Ok);
        hgp_bank_free(b);
        for k in 0..10 {
            assert_eq!(hgp_predictor_observe(p, &state(0.1 * k as f64, k as f64)), HgpStatus::Ok);
        }
        let mut out = vec![
            HgpForecastPoint {
                t: 0.0,
                x: 0.0,
                y: 0.0,
                speed_mean: 0.0,
                speed_var: 0.0,
                heading_mean: 0.0,
                heading_var: 0.0
            };
            10
        ];
        let mut n = 0;
        assert_eq!(hgp_predictor_forecast(p, 10, out.as_mut_ptr(), 10, &mut n), HgpStatus::Ok);
        assert_eq!(n, 10);
        assert!((out[9].x - 19.0).abs() < 0.1, "{}", out[9].x);
        hgp_predictor_free(p);
    }
}

#[test]
fn classify_and_fcw() {
    unsafe {
        let mut c = std::mem::zeroed::<HgpClassification>();
        let hv = state(0.0, 0.0);
        let rv = HgpState { y: 2.0, ..state(0.0, 10.0) };
        assert_eq!(hgp_classify(&hv, &rv, 3.5, &mut c), HgpStatus::Ok);
        assert_eq!((c.ahead, c.lateral, c.direction), (1, HgpLateral::Left, HgpDirection::Ongoing));
        assert_eq!(hgp_classify(&hv, &rv, -1.0, &mut c), HgpStatus::Config);
        let mut r = std::mem::zeroed::<HgpFcwResult>();
        assert_eq!(hgp_fcw_evaluate(20.0, 0.0, 0.0, 0.0, 100.0, 1.5, -5.0, &mut r), HgpStatus::Ok);
        assert_eq!((r.r_w, r.warn, r.bor_case), (70.0, 0, HgpBorCase::Stationary));
        assert_eq!(hgp_fcw_evaluate(20.0, 0.0, 0.0, 0.0, 100.0, 1.5, 5.0, &mut r), HgpStatus::Config);
        assert!((hgp_expected_cos(0.0, 4f64.ln()) - 0.5).abs() < 1e-15);
    }
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

fn include_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = include_dir().join("hgp.h");
    assert!(header.exists());
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(cc).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang]).arg(&header).output()
        else {
            eprintln!("{cc} not available, skipping");
            continue;
        };
        assert!(out.status.success(), "{cc}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libhgp_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("static library or C compiler missing, skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(include_dir())
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
