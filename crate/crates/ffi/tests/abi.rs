use std::ffi::{c_char, CStr, CString};
use std::ptr;

use otddf_ffi::*;

const LINEAR: &str = r#"{"kind":"linear","alpha":0.9,"sigma":0.31622776601683794,"observation_kind":"linear"}"#;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { otddf_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn simulate(trajectories: usize, horizon: usize) -> *mut OtddfDataset {
    let mut ds = ptr::null_mut();
    let status = unsafe { otddf_dataset_simulate(c(LINEAR).as_ptr(), trajectories, horizon, 7, &mut ds) };
    assert_eq!(status, OtddfStatus::Ok, "{}", last_error());
    ds
}

fn small_map(ds: *const OtddfDataset) -> *mut OtddfMap {
    let cfg =
        c(r#"{"window":2,"burn_in":3,"k_outer":30,"k_inner":2,"batch_size":32,"f_width":8,"t_width":8,"seed":1}"#);
    let mut map = ptr::null_mut();
    let status = unsafe { otddf_map_train(ds, cfg.as_ptr(), &mut map) };
    assert_eq!(status, OtddfStatus::Ok, "{}", last_error());
    map
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(otddf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_round_trip() {
    let ds = simulate(20, 8);
    let (mut j, mut t_f, mut n, mut m) = (0, 0, 0, 0);
    assert_eq!(
        unsafe { otddf_dataset_dims(ds, &mut j, &mut t_f, &mut n, &mut m) },
        OtddfStatus::Ok
    );
    assert_eq!((j, t_f, n, m), (20, 8, 2, 1));

    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("d.csv").to_str().unwrap());
    assert_eq!(unsafe { otddf_dataset_save(ds, path.as_ptr()) }, OtddfStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { otddf_dataset_load(path.as_ptr(), &mut back) }, OtddfStatus::Ok);
    for t in [0, 4, 8] {
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        unsafe {
            assert_eq!(otddf_dataset_state(ds, 19, t, a.as_mut_ptr(), 2), OtddfStatus::Ok);
            assert_eq!(otddf_dataset_state(back, 19, t, b.as_mut_ptr(), 2), OtddfStatus::Ok);
        }
        assert_eq!(a, b);
    }
    let mut y = [0.0];
    assert_eq!(
        unsafe { otddf_dataset_observation(back, 0, 0, y.as_mut_ptr(), 1) },
        OtddfStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { otddf_dataset_observation(back, 0, 1, y.as_mut_ptr(), 2) },
        OtddfStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { otddf_dataset_observation(back, 0, 1, y.as_mut_ptr(), 1) },
        OtddfStatus::Ok
    );
    unsafe {
        otddf_dataset_free(ds);
        otddf_dataset_free(back);
        otddf_dataset_free(ptr::null_mut());
    }
}

#[test]
fn map_train_save_push() {
    let ds = simulate(200, 8);
    let map = small_map(ds);
    let (mut n, mut m, mut w, mut pool) = (0, 0, 0, 0);
    assert_eq!(
        unsafe { otddf_map_dims(map, &mut n, &mut m, &mut w, &mut pool) },
        OtddfStatus::Ok
    );
    assert_eq!((n, m, w, pool), (2, 1, 2, 200));

    let window = [0.4, -0.2];
    let mut sampled = vec![0.0; 2 * 50];
    let mut again = vec![0.0; 2 * 50];
    unsafe {
        assert_eq!(
            otddf_map_sample(map, window.as_ptr(), 2, 50, 3, sampled.as_mut_ptr(), 100),
            OtddfStatus::Ok
        );
        assert_eq!(
            otddf_map_sample(map, window.as_ptr(), 2, 50, 3, again.as_mut_ptr(), 100),
            OtddfStatus::Ok
        );
    }
    assert_eq!(sampled, again);
    assert!(sampled.iter().all(|v| v.is_finite()));

    // Row-major particles: pushing the same base twice gives equal rows.
    let base = [1.0, 2.0, 1.0, 2.0, -0.5, 0.25];
    let mut out = [0.0; 6];
    let status = unsafe { otddf_map_push_forward(map, base.as_ptr(), 3, window.as_ptr(), 2, out.as_mut_ptr(), 6) };
    assert_eq!(status, OtddfStatus::Ok);
    assert_eq!(out[0..2], out[2..4]);
    assert_ne!(out[0..2], out[4..6]);

    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("map.json").to_str().unwrap());
    assert_eq!(unsafe { otddf_map_save(map, path.as_ptr()) }, OtddfStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { otddf_map_load(path.as_ptr(), &mut loaded) }, OtddfStatus::Ok);
    let mut reloaded = [0.0; 6];
    let status =
        unsafe { otddf_map_push_forward(loaded, base.as_ptr(), 3, window.as_ptr(), 2, reloaded.as_mut_ptr(), 6) };
    assert_eq!(status, OtddfStatus::Ok);
    assert_eq!(out, reloaded);

    unsafe {
        otddf_map_free(map);
        otddf_map_free(loaded);
        otddf_dataset_free(ds);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut ds = ptr::null_mut();
    let status = unsafe { otddf_dataset_simulate(c("{\"kind\":\"ukf\"}").as_ptr(), 2, 2, 0, &mut ds) };
    assert_eq!(status, OtddfStatus::Parse);
    assert!(last_error().starts_with("model:"), "{}", last_error());
    assert!(ds.is_null());

    let status = unsafe { otddf_dataset_simulate(ptr::null(), 2, 2, 0, &mut ds) };
    assert_eq!(status, OtddfStatus::InvalidArgument);
    assert_eq!(last_error(), "model_json is null");

    let missing = c("/nonexistent/d.csv");
    assert_eq!(
        unsafe { otddf_dataset_load(missing.as_ptr(), &mut ds) },
        OtddfStatus::Io
    );

    let ds = simulate(10, 4);
    let mut map = ptr::null_mut();
    let too_long = c(r#"{"window":3,"burn_in":2}"#);
    assert_eq!(
        unsafe { otddf_map_train(ds, too_long.as_ptr(), &mut map) },
        OtddfStatus::InvalidWindow
    );
    let bad = c("[1, 2]");
    assert_eq!(
        unsafe { otddf_map_train(ds, bad.as_ptr(), &mut map) },
        OtddfStatus::Parse
    );
    assert!(map.is_null());

    let ds_big = simulate(100, 8);
    let map = small_map(ds_big);
    let mut out = [0.0; 4];
    let short_window = [0.1];
    let status = unsafe { otddf_map_sample(map, short_window.as_ptr(), 1, 2, 0, out.as_mut_ptr(), 4) };
    assert_eq!(status, OtddfStatus::InvalidWindow);
    let window = [0.1, 0.2];
    let status = unsafe { otddf_map_sample(map, window.as_ptr(), 2, 2, 0, out.as_mut_ptr(), 3) };
    assert_eq!(status, OtddfStatus::InvalidArgument);

    // The message buffer truncates but reports the full length.
    let mut tiny = [0 as c_char; 4];
    let full = unsafe { otddf_last_error_message(tiny.as_mut_ptr(), tiny.len()) };
    assert!(full > 3);
    assert_eq!(unsafe { CStr::from_ptr(tiny.as_ptr()) }.to_bytes().len(), 3);
    unsafe {
        otddf_map_free(map);
        otddf_dataset_free(ds);
        otddf_dataset_free(ds_big);
    }
}
