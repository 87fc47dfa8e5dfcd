use std::path::Path;

use satm::config::KeyValues;
use satm::data::portable::encode_sarc;
use satm::data::{load_dataset, validate_split, write_class_list, Image, LoadOptions, Split, SplitReport, MSTAR_COUNTS};
use satm::Error;

fn write_chip(root: &Path, split: &str, class: &str, name: &str, value: f32) {
    let dir = root.join(split).join(class);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join(name), encode_sarc(&Image::new(4, 4, vec![value; 16]).unwrap(), &KeyValues::new())).unwrap();
}

#[test]
fn loads_layout_in_sorted_order() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_class_list(root, &["tank".into(), "truck".into()]).unwrap();
    write_chip(root, "train", "truck", "b.sarc", 4.0);
    write_chip(root, "train", "truck", "a.sarc", 3.0);
    write_chip(root, "train", "tank", "z.sarc", 1.0);
    write_chip(root, "test", "tank", "t.sarc", 5.0);

    let ds = load_dataset(root, &LoadOptions::default()).unwrap();
    let seen: Vec<(Split, usize, f32)> = ds.chips.iter().map(|c| (c.split, c.label, c.pixels.data[0])).collect();
    assert_eq!(seen, vec![(Split::Train, 0, 1.0), (Split::Train, 1, 3.0), (Split::Train, 1, 4.0), (Split::Test, 0, 5.0)]);
    assert_eq!(ds.manifest.counts, vec![(1, 1), (2, 0)]);
    assert_eq!(validate_split(&ds.manifest), SplitReport::NoReference);

    let tsv = ds.manifest.to_tsv();
    assert_eq!(tsv.lines().next(), Some("path\tclass\tsplit"));
    assert_eq!(tsv.lines().count(), 5);

    let test_only = load_dataset(root, &LoadOptions { split: Some(Split::Test), ..Default::default() }).unwrap();
    assert_eq!(test_only.chips.len(), 1);
}

#[test]
fn unknown_class_directory_lists_expected_names() {
    let dir = tempfile::tempdir().unwrap();
    write_chip(dir.path(), "train", "HMMWV", "x.sarc", 1.0);
    match load_dataset(dir.path(), &LoadOptions::default()) {
        Err(Error::UnknownClass { name, expected }) => {
            assert_eq!(name, "HMMWV");
            assert!(expected.contains("ZSU234") && expected.contains("2S1"));
        }
        other => panic!("{:?}", other.map(|d| d.chips.len())),
    }
}

#[test]
fn missing_root_is_an_io_error_naming_the_path() {
    let err = load_dataset(Path::new("/nonexistent/satm-data"), &LoadOptions::default()).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/satm-data"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn reference_table_totals() {
    let train: usize = MSTAR_COUNTS.iter().map(|c| c.0).sum();
    let test: usize = MSTAR_COUNTS.iter().map(|c| c.1).sum();
    assert_eq!((train, test), (3671, 3203));
    assert_eq!(MSTAR_COUNTS[1], (698, 587));
}

#[test]
fn corrupt_chip_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let class_dir = dir.path().join("train").join("T72");
    std::fs::create_dir_all(&class_dir).unwrap();
    std::fs::write(class_dir.join("bad.sarc"), b"SARC\x01\x00\x00\x00").unwrap();
    let err = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err();
    assert!(err.to_string().contains("bad.sarc"), "{err}");
    assert_eq!(err.exit_code(), 2);
}
