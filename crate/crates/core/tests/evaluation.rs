mod common;

use common::{chip, small_model};
use satm::data::{translated_crop, Chip, CropSpec, Image};
use satm::eval::{
    confusion_matrix, radial_profile, translation_map, translation_plot, Cell, Classifier, ConfusionMatrix,
    TranslationMap,
};
use satm::{Error, Result, Rng};

/// Reads the label back from a constant-valued patch.
struct ValueOracle;

impl Classifier for ValueOracle {
    fn num_classes(&self) -> usize {
        3
    }
    fn classify(&self, patches: &[Image]) -> Result<Vec<usize>> {
        Ok(patches.iter().map(|p| p.get(0, 0) as usize).collect())
    }
}

/// Class 0 only when the single bright pixel sits at patch position (1, 1).
struct Template;

impl Classifier for Template {
    fn num_classes(&self) -> usize {
        2
    }
    fn classify(&self, patches: &[Image]) -> Result<Vec<usize>> {
        Ok(patches.iter().map(|p| if p.argmax() == (1, 1) && p.max() > 0.0 { 0 } else { 1 }).collect())
    }
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

fn constant_chips() -> Vec<Chip> {
    (0..9).map(|i| chip(Image::new(10, 10, vec![(i % 3) as f32; 100]).unwrap(), i % 3)).collect()
}

fn bright_pixel_chip() -> Chip {
    // 12px chip, 4px crop: the center window starts at (4, 4).
    let mut img = Image::zeros(12, 12);
    img.set(5, 5, 1.0);
    chip(img, 0)
}

fn noisy_chips(n: usize, seed: u64) -> Vec<Chip> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| chip(Image::new(24, 24, (0..576).map(|_| rng.next_f64() as f32).collect()).unwrap(), i % 3))
        .collect()
}

#[test]
fn perfect_classifier_gives_diagonal_and_full_map() {
    let chips = constant_chips();
    let cm = confusion_matrix(&ValueOracle, &chips, &names(3), &CropSpec::center(4)).unwrap();
    assert_eq!(cm.counts, vec![vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3]]);
    assert_eq!(cm.overall_accuracy().unwrap().to_string(), "100.00% (9/9)");
    let map = translation_map(&ValueOracle, &chips, 4, 3, 2).unwrap();
    assert!(map.cells.iter().all(|c| *c == Cell { correct: 9, total: 9 }));
}

#[test]
fn class_count_mismatch_is_a_config_error() {
    let err = confusion_matrix(&ValueOracle, &constant_chips(), &names(4), &CropSpec::center(4)).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn bright_pixel_fixture() {
    let map = translation_map(&Template, &[bright_pixel_chip()], 4, 4, 1).unwrap();
    assert_eq!(map.side(), 9);
    for (dx, dy, c) in map.iter() {
        let expected = u64::from(dx == 0 && dy == 0);
        assert_eq!(c, Cell { correct: expected, total: 1 }, "({dx}, {dy})");
    }
}

#[test]
fn radius_bound_is_enforced() {
    match translation_map(&Template, &[bright_pixel_chip()], 4, 5, 1) {
        Err(Error::Range { bound, .. }) => assert_eq!(bound, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn origin_cell_equals_center_accuracy() {
    let model = small_model(7);
    let chips = noisy_chips(30, 1);
    let cm = confusion_matrix(&model, &chips, &names(3), &CropSpec::center(16)).unwrap();
    let acc = cm.overall_accuracy().unwrap();
    for radius in [0, 2] {
        let map = translation_map(&model, &chips, 16, radius, 1).unwrap();
        let origin = map.cell(0, 0).unwrap();
        assert_eq!((origin.correct, origin.total), (acc.correct, acc.total));
    }
    assert_eq!(translation_map(&model, &chips, 16, 0, 1).unwrap().cells.len(), 1);
}

#[test]
fn thread_count_does_not_change_the_map() {
    let model = small_model(8);
    let chips = noisy_chips(12, 2);
    let serial = translation_map(&model, &chips, 16, 4, 1).unwrap();
    for threads in [2, 3, 8, 100] {
        assert_eq!(translation_map(&model, &chips, 16, 4, threads).unwrap(), serial);
    }
}

#[test]
fn plot_matches_direct_recomputation() {
    let model = small_model(9);
    let chips = noisy_chips(15, 3);
    let map = translation_map(&model, &chips, 16, 3, 2).unwrap();
    let plot = translation_plot(&map);
    let direct = |dx: i64, dy: i64| -> u64 {
        let patches: Vec<Image> = chips.iter().map(|c| translated_crop(&c.pixels, 16, dx, dy).unwrap()).collect();
        let predicted = model.classify(&patches).unwrap();
        predicted.iter().zip(&chips).filter(|(p, c)| **p == c.label).count() as u64
    };
    for (i, d) in (-3..=3).enumerate() {
        assert_eq!(plot.along_x[i], (d, Cell { correct: direct(d, 0), total: 15 }));
        assert_eq!(plot.along_y[i], (d, Cell { correct: direct(0, d), total: 15 }));
    }
    assert_eq!(plot.along_x[3].1, plot.along_y[3].1);
}

#[test]
fn symmetric_map_gives_symmetric_series() {
    let cells = (0..49).map(|i| {
        let (dx, dy) = ((i % 7) as i64 - 3, (i / 7) as i64 - 3);
        Cell { correct: (dx.abs() + dy.abs()) as u64, total: 10 }
    });
    let map = TranslationMap { radius: 3, crop_size: 4, chip_extent: (10, 10), cells: cells.collect() };
    let p = translation_plot(&map);
    for i in 0..7 {
        assert_eq!(p.along_x[i].1, p.along_x[6 - i].1);
        assert_eq!(p.along_x[i].1, p.along_y[i].1);
    }
}

#[test]
fn radial_profile_hand_computed() {
    let cells = (0..25)
        .map(|i| {
            let (dx, dy) = ((i % 5) as u64, (i / 5) as u64);
            Cell { correct: (dx * 3 + dy * 7) % 5, total: 4 }
        })
        .collect();
    let map = TranslationMap { radius: 2, crop_size: 4, chip_extent: (10, 10), cells };
    let p: Vec<(usize, usize, f64)> = radial_profile(&map).iter().map(|b| (b.r, b.cells, b.mean_accuracy)).collect();
    assert_eq!(p, vec![(0, 1, 0.0), (1, 8, 0.46875), (2, 12, 0.625), (3, 4, 0.3125)]);
}

#[test]
fn constant_map_constant_profile() {
    let map = TranslationMap { radius: 5, crop_size: 4, chip_extent: (20, 20), cells: vec![Cell { correct: 3, total: 5 }; 121] };
    assert!(radial_profile(&map).iter().all(|b| (b.mean_accuracy - 0.6).abs() < 1e-12));
}

#[test]
fn empty_matrix_accuracy_is_undefined() {
    let cm = ConfusionMatrix::new(names(2));
    assert!(matches!(cm.overall_accuracy(), Err(Error::Undefined(_))));
}

const MSTAR: [&str; 10] = ["2S1", "BMP2", "BRDM2", "BTR60", "BTR70", "D7", "T62", "T72", "ZIL131", "ZSU234"];

fn reference_matrix(rows: [[u64; 10]; 10]) -> ConfusionMatrix {
    ConfusionMatrix { class_names: MSTAR.iter().map(|s| s.to_string()).collect(), counts: rows.iter().map(|r| r.to_vec()).collect() }
}

fn accuracy_column(cm: &ConfusionMatrix) -> Vec<String> {
    cm.to_tsv().lines().skip(1).map(|l| l.rsplit('\t').next().unwrap().to_string()).collect()
}

#[test]
fn reference_confusion_without_augmentation() {
    let cm = reference_matrix([
        [268, 0, 2, 0, 0, 0, 3, 0, 1, 0],
        [0, 584, 0, 0, 2, 0, 0, 1, 0, 0],
        [0, 0, 268, 0, 0, 0, 0, 0, 6, 0],
        [3, 0, 4, 187, 1, 0, 0, 0, 0, 0],
        [1, 0, 0, 0, 195, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 272, 1, 0, 0, 1],
        [0, 0, 0, 1, 0, 0, 264, 4, 1, 3],
        [0, 0, 0, 0, 0, 0, 1, 581, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 273, 1],
        [0, 0, 0, 0, 0, 2, 0, 0, 1, 271],
    ]);
    assert_eq!(
        accuracy_column(&cm),
        ["97.81", "99.49", "97.81", "95.90", "99.49", "99.27", "96.70", "99.83", "99.64", "98.91", "98.75"]
    );
    assert_eq!(cm.overall_accuracy().unwrap().to_string(), "98.75% (3163/3203)");
    let rows: Vec<u64> = (0..10).map(|i| cm.row_sum(i)).collect();
    assert_eq!(rows, satm::data::MSTAR_COUNTS.iter().map(|c| c.1 as u64).collect::<Vec<_>>());
}

#[test]
fn reference_confusion_with_augmentation() {
    let cm = reference_matrix([
        [273, 0, 0, 0, 1, 0, 0, 0, 0, 0],
        [0, 587, 0, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 273, 0, 0, 0, 0, 0, 1, 0],
        [0, 0, 5, 188, 0, 1, 0, 0, 0, 1],
        [0, 0, 1, 0, 195, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 274, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 269, 3, 0, 1],
        [0, 0, 0, 0, 0, 0, 0, 582, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 274, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 0, 274],
    ]);
    assert_eq!(
        accuracy_column(&cm),
        ["99.64", "100.00", "99.64", "96.41", "99.49", "100.00", "98.53", "100.00", "100.00", "100.00", "99.56"]
    );
    assert_eq!(cm.overall_accuracy().unwrap().to_string(), "99.56% (3189/3203)");
}
