use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use optnet_ffi::*;

fn last_error() -> String {
    let p = optnet_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn ols_round_trip_through_handles() {
    // y = 1 + 2 a - b, exactly
    let x = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 2.0, 3.0, -1.0, 4.0];
    let y: Vec<f64> = x.chunks(2).map(|r| 1.0 + 2.0 * r[0] - r[1]).collect();
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(optnet_dataset_from_arrays(x.as_ptr(), y.as_ptr(), 5, 2, &mut data), OptnetStatus::Ok);
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(optnet_dataset_shape(data, &mut rows, &mut cols), OptnetStatus::Ok);
        assert_eq!((rows, cols), (5, 2));

        let mut model = ptr::null_mut();
        assert_eq!(optnet_ols_fit(data, &mut model), OptnetStatus::Ok);
        let mut w = [0.0; 2];
        let (mut count, mut intercept) = (0, 0.0);
        assert_eq!(
            optnet_model_coefficients(model, w.as_mut_ptr(), 2, &mut count, &mut intercept),
            OptnetStatus::Ok
        );
        assert_eq!(count, 2);
        assert!((w[0] - 2.0).abs() < 1e-10 && (w[1] + 1.0).abs() < 1e-10);
        assert!((intercept - 1.0).abs() < 1e-10);

        let mut pred = [0.0; 5];
        assert_eq!(optnet_model_predict(model, x.as_ptr(), 5, 2, pred.as_mut_ptr()), OptnetStatus::Ok);
        let mut err = 1.0;
        assert_eq!(optnet_mae(pred.as_ptr(), y.as_ptr(), 5, &mut err), OptnetStatus::Ok);
        assert!(err < 1e-10);

        assert_eq!(
            optnet_model_predict(model, x.as_ptr(), 10, 1, pred.as_mut_ptr()),
            OptnetStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());

        optnet_model_free(model);
        optnet_dataset_free(data);
    }
}

#[test]
fn feature_selection_over_the_c_abi() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(optnet_benchmark_generate(300, 12, 3, 0.2, 5, &mut data), OptnetStatus::Ok);
        let mut truth = [0usize; 3];
        let mut n_true = 0;
        assert_eq!(
            optnet_dataset_true_features(data, truth.as_mut_ptr(), 3, &mut n_true),
            OptnetStatus::Ok
        );
        assert_eq!(n_true, 3);

        let mut part = ptr::null_mut();
        assert_eq!(optnet_partition(data, 0.5, 0.25, 0.25, 5, &mut part), OptnetStatus::Ok);
        let settings = CString::new("[osga]\npopulation_size = 12\nmax_evaluations = 300\n").unwrap();
        let mut sel = ptr::null_mut();
        assert_eq!(
            optnet_feature_selection_run(part, settings.as_ptr(), 1, 1, &mut sel),
            OptnetStatus::Ok
        );
        let mut idx = [0usize; 12];
        let (mut count, mut mae, mut evals) = (0, 0.0, 0);
        assert_eq!(
            optnet_selection_summary(sel, idx.as_mut_ptr(), 12, &mut count, &mut mae, &mut evals),
            OptnetStatus::Ok
        );
        assert!(count > 0 && mae.is_finite() && evals <= 300);

        let mut json = ptr::null_mut();
        assert_eq!(optnet_selection_to_json(sel, &mut json), OptnetStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap();
        let value: serde_json::Value = serde_json::from_str(text).unwrap();
        assert_eq!(value["evaluations"].as_u64().unwrap() as usize, evals);
        optnet_string_free(json);

        optnet_selection_free(sel);
        optnet_partition_free(part);
        optnet_dataset_free(data);
    }
}

#[test]
fn errors_are_reported_not_thrown() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(
            optnet_benchmark_generate(100, 5, 9, 0.2, 0, &mut data),
            OptnetStatus::InvalidArgument
        );
        assert!(data.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(optnet_dataset_shape(ptr::null(), ptr::null_mut(), ptr::null_mut()), OptnetStatus::NullPointer);
        let path = CString::new("/nonexistent.csv").unwrap();
        let target = CString::new("y").unwrap();
        assert_eq!(optnet_dataset_load_csv(path.as_ptr(), target.as_ptr(), &mut data), OptnetStatus::DataError);

        assert_eq!(optnet_benchmark_generate(100, 5, 2, 0.2, 0, &mut data), OptnetStatus::Ok);
        let mut part = ptr::null_mut();
        assert_eq!(optnet_partition(data, 0.5, 0.25, 0.25, 0, &mut part), OptnetStatus::Ok);
        let bad = CString::new("osga = 3").unwrap();
        let mut sel = ptr::null_mut();
        assert_eq!(
            optnet_feature_selection_run(part, bad.as_ptr(), 0, 1, &mut sel),
            OptnetStatus::ConfigError
        );
        assert!(!optnet_last_error().is_null());

        // a successful call clears the error
        let mut n = (0, 0);
        assert_eq!(optnet_dataset_shape(data, &mut n.0, &mut n.1), OptnetStatus::Ok);
        assert!(optnet_last_error().is_null());

        optnet_partition_free(part);
        optnet_dataset_free(data);
        optnet_dataset_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/optnet.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "OPTNET_STATUS_PANIC",
        "typedef struct OptnetDataset OptnetDataset;",
        "optnet_feature_selection_run",
        "optnet_string_free",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler found, skipping syntax check");
        return;
    };
    assert!(status.success());
}
