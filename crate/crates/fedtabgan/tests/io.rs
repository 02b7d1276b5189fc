use std::path::Path;

use fedtabgan::io::{load_dictionary, read_matrix, save_dictionary, write_matrix};
use fedtabgan::model_file::{decode_model, encode_model};
use fedtabgan_core::data::{CodeDictionary, PatientMatrix};
use fedtabgan_core::gan::{GanConfig, GanModel};
use proptest::prelude::*;

fn matrix_strategy() -> impl Strategy<Value = PatientMatrix> {
    (0usize..30, 1usize..15, any::<bool>()).prop_flat_map(|(rows, cols, labelled)| {
        prop::collection::vec(0u8..=1, rows * cols).prop_map(move |bits| {
            let m = PatientMatrix::new(rows, cols, bits).unwrap();
            if labelled {
                m.with_labels((0..cols).map(|c| format!("{}{c}", 100 + c * 7)).collect()).unwrap()
            } else {
                m
            }
        })
    })
}

proptest! {
    #[test]
    fn matrix_csv_round_trip(m in matrix_strategy()) {
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf, Path::new("m.csv")).unwrap();
        let back = read_matrix(&buf[..], Path::new("m.csv")).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn model_file_round_trip(seed in any::<u64>(), features in 1usize..6) {
        let mut cfg = GanConfig::desk(features).with_seed(seed);
        cfg.noise_dim = 2;
        cfg.g_hidden = vec![3];
        cfg.d_hidden = vec![3];
        let model = GanModel::new(&cfg).unwrap();
        let labels: Vec<String> = (0..features).map(|i| format!("V{i}")).collect();
        let file = decode_model(&encode_model(&model, Some(&labels))).unwrap();
        prop_assert!(file.model.same_weights(&model));
        prop_assert_eq!(file.digest, cfg.digest());
        prop_assert_eq!(file.labels, Some(labels));
    }
}

#[test]
fn dictionary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dict.csv");
    let mut dict = CodeDictionary::common_icu();
    dict.insert("V9999", "Description, with a comma").unwrap();
    save_dictionary(&dict, &path).unwrap();
    let back = load_dictionary(&path).unwrap();
    assert_eq!(back.len(), dict.len());
    assert_eq!(back.get("V9999"), Some("Description, with a comma"));
}

#[test]
fn single_silo_federation_writes_the_same_model_file() {
    use fedtabgan_core::data::{synth_source, SourceParams};
    use fedtabgan_core::federation::run_federation;
    let data = synth_source(&SourceParams::new(200, 12, 0.1, 4), 0).unwrap();
    let mut cfg = GanConfig::desk(12).with_seed(4);
    cfg.noise_dim = 6;
    cfg.g_hidden = vec![16];
    cfg.d_hidden = vec![16];
    cfg.batch_size = 32;
    let mut plain = GanModel::new(&cfg).unwrap();
    plain.train(&data, 50).unwrap();
    let fed = run_federation(&cfg, &data, 1, 1, 50).unwrap().model;
    let labels = data.labels();
    assert_eq!(encode_model(&plain, labels), encode_model(&fed, labels));
}
