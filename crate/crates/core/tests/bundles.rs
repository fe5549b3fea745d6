use swab_core::data::format::{read_bundle, write_bundle, MatrixEncoding};
use swab_core::data::{validate_bundle, ModelZoo};
use swab_core::eval::{generate_synthetic_universe, read_universe, write_universe, SynthConfig};

fn tiny() -> SynthConfig {
    SynthConfig { n_datasets: 2, classes_per_dataset: 4, n_models: 5, images_per_class: 5, ..SynthConfig::default() }
}

#[test]
fn bundles_round_trip_in_both_encodings() {
    let u = generate_synthetic_universe(&tiny(), 1).unwrap();
    let b = &u.bundles[0];
    for encoding in [MatrixEncoding::SwabMat, MatrixEncoding::Csv] {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), b, encoding).unwrap();
        let (back, _) = read_bundle::<f64>(dir.path()).unwrap();
        // Generated values are f32-representable, so both encodings are exact.
        assert_eq!(&back, b);
        assert!(validate_bundle(&back, &u.zoo).is_ok());
    }
}

#[test]
fn universes_round_trip() {
    let u = generate_synthetic_universe(&tiny(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_universe(dir.path(), &u, MatrixEncoding::SwabMat).unwrap();
    let (bundles, zoo) = read_universe(dir.path()).unwrap();
    assert_eq!(bundles, u.bundles);
    assert_eq!(zoo, u.zoo);
}

#[test]
fn single_precision_reads_match() {
    let u = generate_synthetic_universe(&tiny(), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), &u.bundles[1], MatrixEncoding::SwabMat).unwrap();
    let (b32, _) = read_bundle::<f32>(dir.path()).unwrap();
    assert_eq!(b32.cast::<f64>(), u.bundles[1]);
}

#[test]
fn validation_flags_broken_bundles() {
    let u = generate_synthetic_universe(&tiny(), 4).unwrap();
    let mut b = u.bundles[0].clone();
    let id = u.zoo.model_ids[0].clone();
    b.models.get_mut(&id).unwrap().class_accuracies = Some(vec![1.5; b.class_count()]);
    let report = validate_bundle(&b, &u.zoo);
    assert!(!report.is_ok());
    assert!(report.violations.iter().any(|v| v.location.contains(&id)));

    let bigger = ModelZoo::new(
        u.zoo.model_ids.iter().cloned().chain(["extra".to_string()]).collect(),
        u.zoo.dims.iter().copied().chain([16]).collect(),
    )
    .unwrap();
    assert!(!validate_bundle(&u.bundles[0], &bigger).is_ok());
}

#[test]
fn truncated_files_name_the_problem() {
    let u = generate_synthetic_universe(&tiny(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), &u.bundles[0], MatrixEncoding::SwabMat).unwrap();
    let victim = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "swab"))
        .expect("a matrix file");
    let bytes = std::fs::read(&victim).unwrap();
    std::fs::write(&victim, &bytes[..bytes.len() - 3]).unwrap();
    let err = read_bundle::<f64>(dir.path()).unwrap_err().to_string();
    assert!(err.contains("payload shorter than header rows·cols"), "{err}");
}
