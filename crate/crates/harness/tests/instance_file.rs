use misspec_core::hard::{embed_index_query, sample_rowwise, HardMatrixSpec};
use misspec_core::random::{random_sparse_instance, RandomInstanceSpec};
use misspec_core::NoiseModel;
use misspec_harness::instance_file::{read_instance, write_instance, InstanceFile, InstanceKind};
use misspec_harness::HarnessError;
use proptest::prelude::*;

fn sparse_file(seed: u64, noise: NoiseModel) -> InstanceFile {
    let inst = random_sparse_instance(&RandomInstanceSpec { k: 7, d: 5, s: 2, epsilon: 0.1, seed, noise }).unwrap();
    InstanceFile::from_instance(&inst, InstanceKind::Sparse)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #[test]
    fn text_round_trip_is_bit_exact(seed in 0u64..10_000, noisy in any::<bool>()) {
        let noise = if noisy { NoiseModel::gaussian(seed + 1) } else { NoiseModel::none() };
        let file = sparse_file(seed, noise);
        let back = InstanceFile::parse(&file.to_text(), "mem").unwrap();
        prop_assert_eq!(bits(&back.theta), bits(&file.theta));
        prop_assert_eq!(bits(&back.misspec), bits(&file.misspec));
        for (a, b) in back.features.iter().zip(&file.features) {
            prop_assert_eq!(bits(a), bits(b));
        }
        prop_assert_eq!(back, file);
    }
}

#[test]
fn file_round_trip_and_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.txt");
    let file = sparse_file(3, NoiseModel::none());
    write_instance(&path, &file).unwrap();
    let back = read_instance(&path).unwrap();
    assert_eq!(back, file);
    let inst = back.build().unwrap();
    assert_eq!(inst.k(), 7);
    assert!(back.check().iter().all(|c| c.passed));
}

#[test]
fn corrupted_misspecification_is_named() {
    let mut file = sparse_file(4, NoiseModel::none());
    file.misspec[2] = 0.5;
    let failed: Vec<_> = file.check().into_iter().filter(|c| !c.passed).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].name, "misspecification within epsilon");
    assert!(failed[0].detail.contains("action 2"), "{}", failed[0].detail);
    assert!(file.build().is_err());
}

#[test]
fn oversized_row_and_dense_parameter_are_named() {
    let mut file = sparse_file(5, NoiseModel::none());
    file.features[0] = file.features[0].iter().map(|v| v * 3.0).collect();
    file.theta = vec![0.5; 5];
    let failed: Vec<_> = file.check().into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
    assert!(failed.contains(&"feature rows have norm at most 1"));
    assert!(failed.contains(&"parameter has exactly s nonzeros"));
}

#[test]
fn hard_file_checks_orthogonality() {
    let spec = HardMatrixSpec { k: 8, d: 16, s: 3, epsilon: 0.4, tau: 0.9, delta: 1.0, c: 2.0, seed: 2 };
    let features = sample_rowwise(&spec, 1_000_000).unwrap();
    let inst = embed_index_query(&features, 1, 0.25, 0.2).unwrap();
    let kind = InstanceKind::Hard { row_sparsity: 3, orthogonality: 0.4 };
    let mut file = InstanceFile::from_instance(&inst, kind);
    let back = InstanceFile::parse(&file.to_text(), "mem").unwrap();
    assert_eq!(back.kind, kind);
    assert!(back.check().iter().all(|c| c.passed));
    // two identical rows break orthogonality
    file.features[1] = file.features[0].clone();
    let failed: Vec<_> = file.check().into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
    assert!(failed.contains(&"rows unit norm, sparse and pairwise near-orthogonal"), "{failed:?}");
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = sparse_file(6, NoiseModel::none()).to_text();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[8] = "0.1 0.2";
    let err = InstanceFile::parse(&lines.join("\n"), "bad.txt").unwrap_err();
    match &err {
        HarnessError::Parse { path, line, .. } => {
            assert_eq!(path, "bad.txt");
            assert_eq!(*line, 9);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(err.exit_code(), 1);
    assert!(InstanceFile::parse("misspec-instance 2\n", "x").is_err());
    let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
    assert!(InstanceFile::parse(&truncated, "x").is_err());
}
