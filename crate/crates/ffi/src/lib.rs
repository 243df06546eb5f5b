//! C ABI over the gait-encoding pipeline: opaque handles for datasets,
//! checkpoints, and feature tables; integer status codes; a thread-local
//! last-error message. All configuration crosses the boundary as JSON
//! strings so the C surface stays small and stable.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use gaitenc::error::{GaitError, Result};
use gaitenc::reid::{evaluate, extract_features, train_recognizer, FeatureKind, FeatureRow, RecognizerConfig};
use gaitenc::skeldata::{assemble, generate_synthetic, load_raw, save_raw, Dataset, GenConfig, SkeletonSequence, DEFAULT_DISCARD};
use gaitenc::trainer::{load_checkpoint, save_checkpoint, train, Checkpoint, TrainConfig};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaitencStatus {
    Ok = 0,
    /// Invalid configuration, shapes, or arguments.
    Config = 1,
    /// Unreadable, malformed, or inconsistent data.
    Data = 2,
    /// Training diverged or produced non-finite values.
    Numeric = 3,
    /// A required pointer argument was null.
    NullArgument = 4,
    /// An internal invariant failed; the library state is unharmed.
    Panic = 5,
}

/// Opaque handle to a windowed dataset (train + test splits).
#[repr(C)]
pub struct GaitencDataset {
    _private: [u8; 0],
}

/// Opaque handle to a trained-model checkpoint.
#[repr(C)]
pub struct GaitencCheckpoint {
    _private: [u8; 0],
}

/// Opaque handle to an extracted feature table.
#[repr(C)]
pub struct GaitencFeatures {
    _private: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &GaitError) -> GaitencStatus {
    set_error(&err.to_string());
    match err.exit_code() {
        1 => GaitencStatus::Config,
        2 => GaitencStatus::Data,
        _ => GaitencStatus::Numeric,
    }
}

fn null_argument(what: &str) -> GaitencStatus {
    set_error(&format!("{what} must not be null"));
    GaitencStatus::NullArgument
}

/// Runs a fallible body, translating errors and panics to status codes.
fn guarded<F: FnOnce() -> std::result::Result<(), GaitencStatus>>(body: F) -> GaitencStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GaitencStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            GaitencStatus::Panic
        }
    }
}

fn read_str<'a>(ptr: *const c_char, what: &str) -> std::result::Result<&'a str, GaitencStatus> {
    if ptr.is_null() {
        return Err(null_argument(what));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        GaitencStatus::Config
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(
    text: &str,
    what: &str,
) -> std::result::Result<T, GaitencStatus> {
    serde_json::from_str(text).map_err(|e| {
        set_error(&format!("{what}: {e}"));
        GaitencStatus::Config
    })
}

unsafe fn dataset_ref<'a>(ptr: *const GaitencDataset) -> Option<&'a Dataset> {
    (ptr as *const Dataset).as_ref()
}

unsafe fn checkpoint_ref<'a>(ptr: *const GaitencCheckpoint) -> Option<&'a Checkpoint> {
    (ptr as *const Checkpoint).as_ref()
}

unsafe fn features_ref<'a>(ptr: *const GaitencFeatures) -> Option<&'a Vec<FeatureRow>> {
    (ptr as *const Vec<FeatureRow>).as_ref()
}

fn store_out<T, H>(value: T, out: *mut *mut H) {
    unsafe {
        *out = Box::into_raw(Box::new(value)) as *mut H;
    }
}

/// Library version as a static UTF-8 string; never freed by the caller.
#[no_mangle]
pub extern "C" fn gaitenc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn gaitenc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through a `char**` out-parameter.
#[no_mangle]
pub extern "C" fn gaitenc_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        unsafe {
            drop(CString::from_raw(ptr));
        }
    }
}

fn string_out(text: String, out: *mut *mut c_char) -> std::result::Result<(), GaitencStatus> {
    let c = CString::new(text.replace('\0', " ")).map_err(|_| {
        set_error("string contained interior NUL");
        GaitencStatus::Data
    })?;
    unsafe {
        *out = c.into_raw();
    }
    Ok(())
}

/// Generates a synthetic walking-skeleton dataset from a JSON generator
/// config and writes it as JSONL at `out_path`.
#[no_mangle]
pub extern "C" fn gaitenc_generate_dataset(
    config_json: *const c_char,
    out_path: *const c_char,
) -> GaitencStatus {
    guarded(|| {
        let config: GenConfig = parse_json(read_str(config_json, "config_json")?, "generator config")?;
        let path = read_str(out_path, "out_path")?;
        let run = || -> Result<()> {
            config.validate()?;
            let raw = generate_synthetic(&config)?;
            save_raw(Path::new(path), &raw)
        };
        run().map_err(|e| fail(&e))
    })
}

/// Loads a JSONL dataset and windows it into `seq_len`-frame sequences
/// (default preprocessing: 10 frames discarded at each end, sequences
/// centered). On success `*out` owns the dataset.
#[no_mangle]
pub extern "C" fn gaitenc_dataset_load(
    path: *const c_char,
    seq_len: usize,
    out: *mut *mut GaitencDataset,
) -> GaitencStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null_argument("out"));
        }
        let path = read_str(path, "path")?;
        let run = || -> Result<Dataset> {
            let raw = load_raw(Path::new(path))?;
            assemble(&raw, seq_len, DEFAULT_DISCARD, true)
        };
        let dataset = run().map_err(|e| fail(&e))?;
        store_out(dataset, out);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gaitenc_dataset_free(ptr: *mut GaitencDataset) {
    if !ptr.is_null() {
        unsafe {
            drop(Box::from_raw(ptr as *mut Dataset));
        }
    }
}

/// Number of training sequences; 0 for a null handle.
#[no_mangle]
pub extern "C" fn gaitenc_dataset_train_count(ptr: *const GaitencDataset) -> usize {
    unsafe { dataset_ref(ptr) }.map_or(0, |d| d.train.len())
}

/// Number of test sequences; 0 for a null handle.
#[no_mangle]
pub extern "C" fn gaitenc_dataset_test_count(ptr: *const GaitencDataset) -> usize {
    unsafe { dataset_ref(ptr) }.map_or(0, |d| d.test.len())
}

/// Joints per skeleton; 0 for a null handle.
#[no_mangle]
pub extern "C" fn gaitenc_dataset_joint_count(ptr: *const GaitencDataset) -> usize {
    unsafe { dataset_ref(ptr) }.map_or(0, |d| d.joint_count)
}

/// Trains the per-axis models on the dataset's training split.
/// `config_json` may be null for defaults. On success `*out` owns the
/// resulting checkpoint.
#[no_mangle]
pub extern "C" fn gaitenc_train(
    dataset: *const GaitencDataset,
    config_json: *const c_char,
    out: *mut *mut GaitencCheckpoint,
) -> GaitencStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null_argument("out"));
        }
        let dataset = unsafe { dataset_ref(dataset) }.ok_or_else(|| null_argument("dataset"))?;
        let config: TrainConfig = if config_json.is_null() {
            TrainConfig::default()
        } else {
            parse_json(read_str(config_json, "config_json")?, "train config")?
        };
        let (ckpt, _records) = train(dataset, &config).map_err(|e| fail(&e))?;
        store_out(ckpt, out);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gaitenc_checkpoint_save(
    ckpt: *const GaitencCheckpoint,
    path: *const c_char,
) -> GaitencStatus {
    guarded(|| {
        let ckpt = unsafe { checkpoint_ref(ckpt) }.ok_or_else(|| null_argument("ckpt"))?;
        let path = read_str(path, "path")?;
        save_checkpoint(ckpt, Path::new(path)).map_err(|e| fail(&e))
    })
}

#[no_mangle]
pub extern "C" fn gaitenc_checkpoint_load(
    path: *const c_char,
    out: *mut *mut GaitencCheckpoint,
) -> GaitencStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null_argument("out"));
        }
        let path = read_str(path, "path")?;
        let ckpt = load_checkpoint(Path::new(path)).map_err(|e| fail(&e))?;
        store_out(ckpt, out);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gaitenc_checkpoint_free(ptr: *mut GaitencCheckpoint) {
    if !ptr.is_null() {
        unsafe {
            drop(Box::from_raw(ptr as *mut Checkpoint));
        }
    }
}

/// Writes the checkpoint's resolved training config as a JSON string to
/// `*out_json`; free it with `gaitenc_string_free`.
#[no_mangle]
pub extern "C" fn gaitenc_checkpoint_config_json(
    ckpt: *const GaitencCheckpoint,
    out_json: *mut *mut c_char,
) -> GaitencStatus {
    guarded(|| {
        if out_json.is_null() {
            return Err(null_argument("out_json"));
        }
        let ckpt = unsafe { checkpoint_ref(ckpt) }.ok_or_else(|| null_argument("ckpt"))?;
        let json = serde_json::to_string(&ckpt.config).map_err(|e| {
            set_error(&format!("config serialize: {e}"));
            GaitencStatus::Data
        })?;
        string_out(json, out_json)
    })
}

/// Extracts per-step features. `split` is "train", "test", or "all";
/// `feature_kind` is "age" or "encoded-state". On success `*out` owns
/// the feature table.
#[no_mangle]
pub extern "C" fn gaitenc_extract(
    ckpt: *const GaitencCheckpoint,
    dataset: *const GaitencDataset,
    split: *const c_char,
    feature_kind: *const c_char,
    out: *mut *mut GaitencFeatures,
) -> GaitencStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null_argument("out"));
        }
        let ckpt = unsafe { checkpoint_ref(ckpt) }.ok_or_else(|| null_argument("ckpt"))?;
        let dataset = unsafe { dataset_ref(dataset) }.ok_or_else(|| null_argument("dataset"))?;
        let kind = FeatureKind::parse(read_str(feature_kind, "feature_kind")?)
            .map_err(|e| fail(&e))?;
        let sequences: Vec<SkeletonSequence> = match read_str(split, "split")? {
            "train" => dataset.train.clone(),
            "test" => dataset.test.clone(),
            "all" => {
                let mut all = dataset.train.clone();
                all.extend(dataset.test.iter().cloned());
                all
            }
            other => {
                set_error(&format!(
                    "unknown split '{other}' (expected train, test, or all)"
                ));
                return Err(GaitencStatus::Config);
            }
        };
        let rows = extract_features(&sequences, ckpt, kind).map_err(|e| fail(&e))?;
        store_out(rows, out);
        Ok(())
    })
}

/// Number of feature rows; 0 for a null handle.
#[no_mangle]
pub extern "C" fn gaitenc_features_count(ptr: *const GaitencFeatures) -> usize {
    unsafe { features_ref(ptr) }.map_or(0, |rows| rows.len())
}

/// Values per feature row (3k); 0 for a null or empty handle.
#[no_mangle]
pub extern "C" fn gaitenc_features_width(ptr: *const GaitencFeatures) -> usize {
    unsafe { features_ref(ptr) }
        .and_then(|rows| rows.first())
        .map_or(0, |row| row.values.len())
}

/// Copies row `index` out of the table. `out_values` must have room for
/// `values_capacity` doubles, at least the table width. Any out-pointer
/// may be null to skip that field.
#[no_mangle]
pub extern "C" fn gaitenc_features_row(
    ptr: *const GaitencFeatures,
    index: usize,
    out_sequence: *mut usize,
    out_step: *mut usize,
    out_label: *mut usize,
    out_values: *mut c_double,
    values_capacity: usize,
) -> GaitencStatus {
    guarded(|| {
        let rows = unsafe { features_ref(ptr) }.ok_or_else(|| null_argument("features"))?;
        let row = rows.get(index).ok_or_else(|| {
            set_error(&format!(
                "row {index} out of range (table has {})",
                rows.len()
            ));
            GaitencStatus::Data
        })?;
        unsafe {
            if !out_sequence.is_null() {
                *out_sequence = row.sequence;
            }
            if !out_step.is_null() {
                *out_step = row.step;
            }
            if !out_label.is_null() {
                *out_label = row.label;
            }
            if !out_values.is_null() {
                if values_capacity < row.values.len() {
                    set_error(&format!(
                        "values buffer holds {values_capacity}, row needs {}",
                        row.values.len()
                    ));
                    return Err(GaitencStatus::Config);
                }
                std::ptr::copy_nonoverlapping(
                    row.values.as_ptr(),
                    out_values,
                    row.values.len(),
                );
            }
        }
        Ok(())
    })
}

/// Writes the feature table as CSV (same format as the CLI).
#[no_mangle]
pub extern "C" fn gaitenc_features_save_csv(
    ptr: *const GaitencFeatures,
    path: *const c_char,
) -> GaitencStatus {
    guarded(|| {
        let rows = unsafe { features_ref(ptr) }.ok_or_else(|| null_argument("features"))?;
        let path = read_str(path, "path")?;
        let run = || -> Result<()> {
            let csv = gaitenc::artifacts::features_csv(rows)?;
            gaitenc::artifacts::write_text(Path::new(path), &csv)
        };
        run().map_err(|e| fail(&e))
    })
}

#[no_mangle]
pub extern "C" fn gaitenc_features_free(ptr: *mut GaitencFeatures) {
    if !ptr.is_null() {
        unsafe {
            drop(Box::from_raw(ptr as *mut Vec<FeatureRow>));
        }
    }
}

/// Trains the recognition head on `train_features`, scores
/// `test_features`, and writes the evaluation report (rank-1, CMC,
/// nAUC, per-sequence scores) as JSON to `*out_report_json`; free it
/// with `gaitenc_string_free`. `recognizer_config_json` may be null for
/// defaults.
#[no_mangle]
pub extern "C" fn gaitenc_evaluate(
    train_features: *const GaitencFeatures,
    test_features: *const GaitencFeatures,
    recognizer_config_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> GaitencStatus {
    guarded(|| {
        if out_report_json.is_null() {
            return Err(null_argument("out_report_json"));
        }
        let train_rows =
            unsafe { features_ref(train_features) }.ok_or_else(|| null_argument("train_features"))?;
        let test_rows =
            unsafe { features_ref(test_features) }.ok_or_else(|| null_argument("test_features"))?;
        let config: RecognizerConfig = if recognizer_config_json.is_null() {
            RecognizerConfig::default()
        } else {
            parse_json(
                read_str(recognizer_config_json, "recognizer_config_json")?,
                "recognizer config",
            )?
        };
        let run = || -> Result<String> {
            let classes = train_rows.iter().map(|r| r.label).max().unwrap_or(0);
            let recognizer = train_recognizer(train_rows, classes, &config)?;
            let report = evaluate(&recognizer, test_rows)?;
            gaitenc::artifacts::report_json(&report)
        };
        let json = run().map_err(|e| fail(&e))?;
        string_out(json, out_report_json)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn cstring(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(gaitenc_last_error()) }
            .to_string_lossy()
            .into_owned()
    }

    /// Whole pipeline through the C surface: generate, load, train,
    /// extract, evaluate, with handle cleanup.
    #[test]
    fn round_trip_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let data_path = cstring(dir.path().join("toy.jsonl").to_str().unwrap());

        let gen_cfg = cstring(
            r#"{"name":"ffi-toy","identities":2,"videos_per_identity":2,
                "frames_per_video":33,"seed":5,"noise_sigma":0.01}"#,
        );
        assert_eq!(
            gaitenc_generate_dataset(gen_cfg.as_ptr(), data_path.as_ptr()),
            GaitencStatus::Ok
        );

        let mut dataset: *mut GaitencDataset = ptr::null_mut();
        assert_eq!(
            gaitenc_dataset_load(data_path.as_ptr(), 4, &mut dataset),
            GaitencStatus::Ok
        );
        assert_eq!(gaitenc_dataset_joint_count(dataset), 20);
        assert!(gaitenc_dataset_train_count(dataset) > 0);
        assert!(gaitenc_dataset_test_count(dataset) > 0);

        let train_cfg = cstring(
            r#"{"seq_len":4,"hidden":8,"window_radius":2,"epochs":2,
                "batch_size":16,"seed":1}"#,
        );
        let mut ckpt: *mut GaitencCheckpoint = ptr::null_mut();
        assert_eq!(
            gaitenc_train(dataset, train_cfg.as_ptr(), &mut ckpt),
            GaitencStatus::Ok
        );

        let mut config_json: *mut c_char = ptr::null_mut();
        assert_eq!(
            gaitenc_checkpoint_config_json(ckpt, &mut config_json),
            GaitencStatus::Ok
        );
        let json = unsafe { CStr::from_ptr(config_json) }.to_str().unwrap();
        assert!(json.contains("\"hidden\":8"));
        gaitenc_string_free(config_json);

        // Save / load round trip.
        let ckpt_path = cstring(dir.path().join("m.ckpt").to_str().unwrap());
        assert_eq!(
            gaitenc_checkpoint_save(ckpt, ckpt_path.as_ptr()),
            GaitencStatus::Ok
        );
        let mut reloaded: *mut GaitencCheckpoint = ptr::null_mut();
        assert_eq!(
            gaitenc_checkpoint_load(ckpt_path.as_ptr(), &mut reloaded),
            GaitencStatus::Ok
        );

        let split_train = cstring("train");
        let split_test = cstring("test");
        let kind = cstring("age");
        let mut train_feat: *mut GaitencFeatures = ptr::null_mut();
        let mut test_feat: *mut GaitencFeatures = ptr::null_mut();
        assert_eq!(
            gaitenc_extract(reloaded, dataset, split_train.as_ptr(), kind.as_ptr(), &mut train_feat),
            GaitencStatus::Ok
        );
        assert_eq!(
            gaitenc_extract(reloaded, dataset, split_test.as_ptr(), kind.as_ptr(), &mut test_feat),
            GaitencStatus::Ok
        );
        assert_eq!(gaitenc_features_width(train_feat), 24);

        let mut seq = 0usize;
        let mut step = 0usize;
        let mut label = 0usize;
        let mut values = vec![0.0f64; 24];
        assert_eq!(
            gaitenc_features_row(
                train_feat,
                0,
                &mut seq,
                &mut step,
                &mut label,
                values.as_mut_ptr(),
                values.len()
            ),
            GaitencStatus::Ok
        );
        assert_eq!(step, 1);
        assert!(label >= 1);
        assert!(values.iter().all(|v| v.is_finite()));

        let rec_cfg = cstring(r#"{"hidden_dim":8,"epochs":5}"#);
        let mut report: *mut c_char = ptr::null_mut();
        assert_eq!(
            gaitenc_evaluate(train_feat, test_feat, rec_cfg.as_ptr(), &mut report),
            GaitencStatus::Ok
        );
        let report_text = unsafe { CStr::from_ptr(report) }.to_str().unwrap();
        assert!(report_text.contains("\"rank1\""));
        gaitenc_string_free(report);

        gaitenc_features_free(train_feat);
        gaitenc_features_free(test_feat);
        gaitenc_checkpoint_free(ckpt);
        gaitenc_checkpoint_free(reloaded);
        gaitenc_dataset_free(dataset);
    }

    #[test]
    fn null_arguments_are_reported() {
        let mut out: *mut GaitencDataset = ptr::null_mut();
        assert_eq!(
            gaitenc_dataset_load(ptr::null(), 4, &mut out),
            GaitencStatus::NullArgument
        );
        assert!(last_error().contains("must not be null"));

        let path = cstring("/nonexistent/x.jsonl");
        assert_eq!(
            gaitenc_dataset_load(path.as_ptr(), 4, ptr::null_mut()),
            GaitencStatus::NullArgument
        );

        assert_eq!(gaitenc_dataset_train_count(ptr::null()), 0);
        assert_eq!(gaitenc_features_width(ptr::null()), 0);
        gaitenc_dataset_free(ptr::null_mut());
        gaitenc_checkpoint_free(ptr::null_mut());
        gaitenc_features_free(ptr::null_mut());
        gaitenc_string_free(ptr::null_mut());
    }

    #[test]
    fn missing_file_maps_to_data_status() {
        let path = cstring("/nonexistent/x.jsonl");
        let mut out: *mut GaitencDataset = ptr::null_mut();
        assert_eq!(
            gaitenc_dataset_load(path.as_ptr(), 4, &mut out),
            GaitencStatus::Data
        );
        assert!(out.is_null());
        assert!(!last_error().is_empty());
    }

    #[test]
    fn bad_config_maps_to_config_status() {
        let cfg = cstring("{ not json");
        let path = cstring("/tmp/never-written.jsonl");
        assert_eq!(
            gaitenc_generate_dataset(cfg.as_ptr(), path.as_ptr()),
            GaitencStatus::Config
        );

        // Valid JSON, invalid semantics (1 identity).
        let cfg = cstring(
            r#"{"name":"x","identities":1,"videos_per_identity":1,
                "frames_per_video":40,"seed":1,"noise_sigma":0.0}"#,
        );
        assert_eq!(
            gaitenc_generate_dataset(cfg.as_ptr(), path.as_ptr()),
            GaitencStatus::Config
        );
        assert!(last_error().contains("identities"));
    }

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(gaitenc_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
