//! Exercises the C ABI through its Rust symbols, and checks that the
//! generated header is valid C.

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use uncertal::data::Dataset;
use uncertal::experiment::{run_trial, Budget, ExperimentConfig, NamedStrategy};
use uncertal::model::Label;
use uncertal_ffi::*;

fn last_error() -> Option<String> {
    let p = uncertal_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn toy() -> (Vec<f64>, Vec<i32>) {
    // Two interleaved 1-D clusters, 8 points.
    let x = vec![-2.0, -1.5, -1.0, -0.2, 0.3, 1.0, 1.4, 2.2];
    let y = vec![-1, -1, -1, 1, -1, 1, 1, 1];
    (x, y)
}

unsafe fn toy_handle() -> *mut UncertalDataset {
    let (x, y) = toy();
    let mut ds = ptr::null_mut();
    let name = CString::new("toy").unwrap();
    let st = uncertal_dataset_from_arrays(name.as_ptr(), x.as_ptr(), y.as_ptr(), 8, 1, &mut ds);
    assert_eq!(st, UncertalStatus::Ok, "{:?}", last_error());
    ds
}

#[test]
fn dataset_from_arrays_and_accessors() {
    unsafe {
        let ds = toy_handle();
        assert_eq!(uncertal_dataset_len(ds), 8);
        assert_eq!(uncertal_dataset_dim(ds), 1);
        assert!(last_error().is_none());
        uncertal_dataset_free(ds);
        assert_eq!(uncertal_dataset_len(ptr::null()), 0);
        uncertal_dataset_free(ptr::null_mut());
    }
}

#[test]
fn bad_labels_and_nulls_are_reported() {
    unsafe {
        let x = [0.0, 1.0];
        let y = [1, 0];
        let mut ds = ptr::null_mut();
        let st = uncertal_dataset_from_arrays(ptr::null(), x.as_ptr(), y.as_ptr(), 2, 1, &mut ds);
        assert_eq!(st, UncertalStatus::InvalidArgument);
        assert!(last_error().unwrap().contains("not -1 or +1"));
        assert!(ds.is_null());

        let st = uncertal_dataset_from_arrays(ptr::null(), ptr::null(), y.as_ptr(), 2, 1, &mut ds);
        assert_eq!(st, UncertalStatus::NullPointer);

        let y = [1, 1];
        let st = uncertal_dataset_from_arrays(ptr::null(), x.as_ptr(), y.as_ptr(), 2, 1, &mut ds);
        assert_eq!(st, UncertalStatus::Data);
        assert!(last_error().unwrap().contains("single class"));
    }
}

#[test]
fn load_reports_missing_files_as_data_errors() {
    unsafe {
        let path = CString::new("/nonexistent/file.libsvm").unwrap();
        let mut ds = ptr::null_mut();
        assert_eq!(
            uncertal_dataset_load(path.as_ptr(), ptr::null(), &mut ds),
            UncertalStatus::Data
        );
        let fmt = CString::new("xml").unwrap();
        assert_eq!(
            uncertal_dataset_load(path.as_ptr(), fmt.as_ptr(), &mut ds),
            UncertalStatus::InvalidArgument
        );
    }
}

#[test]
fn load_bundled_file() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/wine.libsvm");
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            uncertal_dataset_load(c.as_ptr(), ptr::null(), &mut ds),
            UncertalStatus::Ok
        );
        assert_eq!(uncertal_dataset_dim(ds), 13);
        uncertal_dataset_free(ds);
    }
}

#[test]
fn train_posterior_and_weights() {
    unsafe {
        let ds = toy_handle();
        let mut model = ptr::null_mut();
        assert_eq!(
            uncertal_model_train(ds, ptr::null(), 0, 100.0, &mut model),
            UncertalStatus::Ok
        );
        assert_eq!(uncertal_model_dim(model), 1);

        let mut w = [0.0; 2];
        assert_eq!(
            uncertal_model_weights(model, w.as_mut_ptr(), 1),
            UncertalStatus::BufferTooSmall
        );
        assert_eq!(
            uncertal_model_weights(model, w.as_mut_ptr(), 2),
            UncertalStatus::Ok
        );
        assert!(w[0] > 0.0, "slope should be positive: {w:?}");

        // The posterior agrees with the sigmoid of the exported weights.
        for x in [-3.0, 0.0, 0.7] {
            let mut p = f64::NAN;
            assert_eq!(
                uncertal_model_posterior(model, &x, 1, &mut p),
                UncertalStatus::Ok
            );
            let expected = 1.0 / (1.0 + (-(w[0] * x + w[1])).exp());
            assert!((p - expected).abs() < 1e-15, "{p} vs {expected}");
        }
        let two = [0.0, 0.0];
        let mut p = 0.0;
        assert_eq!(
            uncertal_model_posterior(model, two.as_ptr(), 2, &mut p),
            UncertalStatus::InvalidArgument
        );

        let rows = [0usize, 99];
        let mut m2 = ptr::null_mut();
        assert_eq!(
            uncertal_model_train(ds, rows.as_ptr(), 2, 100.0, &mut m2),
            UncertalStatus::InvalidArgument
        );
        assert_eq!(
            uncertal_model_train(ds, ptr::null(), 0, -1.0, &mut m2),
            UncertalStatus::InvalidArgument
        );

        uncertal_model_free(model);
        uncertal_dataset_free(ds);
    }
}

#[test]
fn run_trial_matches_the_library() {
    let (x, y) = toy();
    let labels = y
        .iter()
        .map(|&v| Label::from_sign(f64::from(v)).unwrap())
        .collect();
    let native = Dataset::new("toy", x, 1, labels).unwrap();
    let cfg = ExperimentConfig {
        trials: 2,
        budget: Budget::Fixed(2),
        base_seed: 5,
        ..ExperimentConfig::default()
    };
    let expected = run_trial(&native, &NamedStrategy::from_name("ueer").unwrap(), &cfg, 1).unwrap();

    unsafe {
        let ds = toy_handle();
        let strategy = CString::new("ueer").unwrap();
        let mut curve = [0.0; 8];
        let mut len = 0usize;
        let mut alc = 0.0;
        let st = uncertal_run_trial(
            ds,
            strategy.as_ptr(),
            1,
            2,
            100.0,
            5,
            curve.as_mut_ptr(),
            1,
            &mut len,
            &mut alc,
        );
        assert_eq!(st, UncertalStatus::BufferTooSmall);
        assert_eq!(len, 3);
        let st = uncertal_run_trial(
            ds,
            strategy.as_ptr(),
            1,
            2,
            100.0,
            5,
            curve.as_mut_ptr(),
            8,
            &mut len,
            &mut alc,
        );
        assert_eq!(st, UncertalStatus::Ok, "{:?}", last_error());
        assert_eq!(&curve[..len], expected.curve.accuracies.as_slice());
        assert_eq!(alc, expected.alc);

        let unknown = CString::new("nope").unwrap();
        let st = uncertal_run_trial(
            ds,
            unknown.as_ptr(),
            0,
            2,
            100.0,
            5,
            curve.as_mut_ptr(),
            8,
            &mut len,
            &mut alc,
        );
        assert_eq!(st, UncertalStatus::InvalidArgument);
        uncertal_dataset_free(ds);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(uncertal_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_is_valid_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/uncertal.h");
    let text = std::fs::read_to_string(&header).expect("build script writes the header");
    for symbol in [
        "typedef struct UncertalDataset UncertalDataset;",
        "typedef struct UncertalModel UncertalModel;",
        "UNCERTAL_STATUS_OK = 0",
        "uncertal_last_error(void)",
        "uncertal_dataset_load(",
        "uncertal_dataset_from_arrays(",
        "uncertal_dataset_free(",
        "uncertal_model_train(",
        "uncertal_model_posterior(",
        "uncertal_model_free(",
        "uncertal_run_trial(",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
    // Compile a translation unit against the header when a C compiler is
    // available.
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"uncertal.h\"\nint main(void) { UncertalDataset *d = 0; return (int)uncertal_dataset_len(d); }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        ),
        Err(e) => eprintln!("skipping C compile check: {e}"),
    }
}
