use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use tidewatch_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = tw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn sentiment_through_the_c_abi() {
    let mut lex = ptr::null_mut();
    assert_eq!(unsafe { tw_lexicon_default(&mut lex) }, TwStatus::Ok);
    let score = |text: &str| {
        let mut out = f64::NAN;
        assert_eq!(unsafe { tw_sentiment_score(lex, c(text).as_ptr(), &mut out) }, TwStatus::Ok);
        out
    };
    assert_eq!(score("good"), 0.75);
    assert_eq!(score("bad"), -0.75);
    assert_eq!(score("disgusting"), -1.0);
    assert_eq!(score("good?"), 0.75 * 0.25);
    unsafe { tw_lexicon_free(lex) };
    unsafe { tw_lexicon_free(ptr::null_mut()) };
}

#[test]
fn custom_lexicon_and_patch() {
    let mut lex = ptr::null_mut();
    let csv = c("phrase,class,weight\nbloom,polarized,-0.5\nvery,amplifier,\n");
    let patch = c("op,phrase,class,weight\nadd,bloom,polarized,-0.9\n");
    assert_eq!(unsafe { tw_lexicon_from_csv(csv.as_ptr(), patch.as_ptr(), &mut lex) }, TwStatus::Ok);
    let mut out = 0.0;
    assert_eq!(unsafe { tw_sentiment_score_ex(lex, c("bloom").as_ptr(), 0.25, 0.15, &mut out) }, TwStatus::Ok);
    assert_eq!(out, -0.9);
    unsafe { tw_lexicon_free(lex) };

    let bad = c("not,a,lexicon\n");
    assert_eq!(unsafe { tw_lexicon_from_csv(bad.as_ptr(), ptr::null(), &mut lex) }, TwStatus::Parse);
    assert!(!last_error().is_empty());
}

#[test]
fn null_and_invalid_arguments() {
    let mut out = 0.0;
    assert_eq!(unsafe { tw_sentiment_score(ptr::null(), c("x").as_ptr(), &mut out) }, TwStatus::NullPointer);
    assert!(last_error().contains("lexicon"));
    assert_eq!(unsafe { tw_geodesic_miles(0.0, 0.0, 0.0, 200.0, &mut out) }, TwStatus::InvalidArgument);
    assert_eq!(unsafe { tw_geodesic_miles(0.0, 0.0, 0.0, 1.0, ptr::null_mut()) }, TwStatus::NullPointer);
    let x = [1.0, 1.0, 1.0];
    assert_eq!(unsafe { tw_pearson(x.as_ptr(), x.as_ptr(), 3, &mut out) }, TwStatus::Domain);
    // a successful call clears the message
    assert_eq!(unsafe { tw_geodesic_miles(0.0, 0.0, 0.0, 1.0, &mut out) }, TwStatus::Ok);
    assert!(tw_last_error().is_null());
    let v = unsafe { CStr::from_ptr(tw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn synth_registry_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = c(r#"{"seed": 5, "counties": 2, "window_days": 28}"#);
    let out_dir = c(dir.path().to_str().unwrap());
    assert_eq!(unsafe { tw_synth_generate(spec.as_ptr(), out_dir.as_ptr()) }, TwStatus::Ok);
    let bad = c(r#"{"coupling_rho": 2.0}"#);
    assert_ne!(unsafe { tw_synth_generate(bad.as_ptr(), out_dir.as_ptr()) }, TwStatus::Ok);

    let csv = c(&std::fs::read_to_string(dir.path().join("geo_registry.csv")).unwrap());
    let polys = c(&std::fs::read_to_string(dir.path().join("county_polygons.geojson")).unwrap());
    let mut reg = ptr::null_mut();
    assert_eq!(unsafe { tw_registry_from_csv(csv.as_ptr(), polys.as_ptr(), &mut reg) }, TwStatus::Ok);

    let mut v = 0.0;
    assert_eq!(unsafe { tw_credit_share(reg, c("city_00_0").as_ptr(), c("city_00_0").as_ptr(), &mut v) }, TwStatus::Ok);
    assert_eq!(v, 1.0);
    let members = c("county_00,county_01");
    assert_eq!(
        unsafe { tw_registry_add_shared_unit(reg, c("both").as_ptr(), c("Both").as_ptr(), members.as_ptr()) },
        TwStatus::Ok
    );
    let mut a = 0.0;
    let mut b = 0.0;
    unsafe {
        assert_eq!(tw_credit_share(reg, c("both").as_ptr(), c("county_00").as_ptr(), &mut a), TwStatus::Ok);
        assert_eq!(tw_credit_share(reg, c("both").as_ptr(), c("county_01").as_ptr(), &mut b), TwStatus::Ok);
    }
    assert!((a + b - 1.0).abs() < 1e-12 && a > 0.0 && b > 0.0);

    let mut pc = 0.0;
    assert_eq!(unsafe { tw_per_capita(reg, 0.0, c("county_00").as_ptr(), &mut pc) }, TwStatus::Ok);
    assert_eq!(pc, 0.0);
    assert_eq!(unsafe { tw_per_capita(reg, 1.0, c("nowhere").as_ptr(), &mut pc) }, TwStatus::Domain);
    unsafe { tw_registry_free(reg) };
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libtidewatch_ffi.a");
    assert!(lib.is_file(), "static library not built at {}", lib.display());
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "smoke exited with {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
