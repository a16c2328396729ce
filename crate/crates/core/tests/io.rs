use std::fs::File;

use sbmlab_core::io::{
    read_labels, read_labels_file, read_matrix_market, read_matrix_market_file, read_metadata, write_labels,
    write_matrix_market, write_metadata, InstanceMetadata,
};
use sbmlab_core::{generate, ScenarioConfig};

#[test]
fn generated_instance_roundtrips_through_files() {
    let inst = generate(&ScenarioConfig::new(120, 4, 5.0, 0.3, 9).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.mtx");
    let truth = dir.path().join("truth.txt");
    write_matrix_market(&inst.adjacency, File::create(&graph).unwrap()).unwrap();
    write_labels(&inst.truth, File::create(&truth).unwrap()).unwrap();
    assert_eq!(read_matrix_market_file(&graph).unwrap(), inst.adjacency);
    assert_eq!(read_labels_file(&truth, Some(4)).unwrap(), inst.truth);

    let meta = InstanceMetadata {
        n: 120,
        k: 4,
        beta: 5.0,
        b: 0.3,
        seed: 9,
        rho: inst.scenario.rho(),
        alpha: inst.proportions.as_slice().to_vec(),
    };
    let mut buf = Vec::new();
    write_metadata(&meta, &mut buf).unwrap();
    assert_eq!(read_metadata(buf.as_slice()).unwrap(), meta);
}

#[test]
fn labels_are_one_based_on_disk() {
    let inst = generate(&ScenarioConfig::new(10, 1, 0.0, 0.5, 7).unwrap()).unwrap();
    let mut buf = Vec::new();
    write_labels(&inst.truth, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "1\n".repeat(10));
}

#[test]
fn malformed_inputs_are_rejected() {
    let header = "%%MatrixMarket matrix coordinate pattern symmetric\n";
    for bad in [
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n2 1\n".to_string(),
        format!("{header}3 3 1\n4 1\n"),
        format!("{header}3 3 1\n2 2\n"),
        format!("{header}3 3 2\n2 1\n"),
        format!("{header}3 2 0\n"),
        String::new(),
    ] {
        assert!(read_matrix_market(bad.as_bytes()).is_err(), "{bad:?}");
    }
    assert!(read_labels("1\n0\n".as_bytes(), None).is_err());
    assert!(read_labels("1\n3\n".as_bytes(), Some(2)).is_err());
    assert!(read_labels("1\nx\n".as_bytes(), None).is_err());
}

#[test]
fn comments_and_blank_lines_are_skipped() {
    let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% made by hand\n\n3 3 2\n2 1\n% edge\n3 2\n";
    let a = read_matrix_market(text.as_bytes()).unwrap();
    assert_eq!(a.n(), 3);
    assert!(a.get(0, 1) && a.get(1, 2) && !a.get(0, 2));
}
