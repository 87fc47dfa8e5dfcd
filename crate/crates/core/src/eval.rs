//! Evaluation artifacts: confusion matrices, accuracy-translation maps, their
//! axis slices and radial profile, and file exports.

use std::fmt;
use std::path::Path;

use crate::data::{apply_crop, max_translation, translated_crop, Chip, CropSpec, Image};
use crate::error::{Error, Result};
use crate::model::TrainedModel;
use crate::train::stack_patches;

/// Anything that maps square patches (raw magnitudes) to class indices.
pub trait Classifier: Sync {
    fn num_classes(&self) -> usize;
    fn classify(&self, patches: &[Image]) -> Result<Vec<usize>>;
}

/// Patches per inference batch.
pub const INFERENCE_BATCH: usize = 64;

impl Classifier for TrainedModel {
    fn num_classes(&self) -> usize {
        self.network.config().num_classes
    }

    fn classify(&self, patches: &[Image]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(patches.len());
        for chunk in patches.chunks(INFERENCE_BATCH) {
            let x = stack_patches(chunk, self.meta.norm_scale)?;
            out.extend(self.network.predict(&x)?);
        }
        Ok(out)
    }
}

/// `correct / total` kept as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: u64,
    pub total: u64,
}

impl Accuracy {
    pub fn new(correct: u64, total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::Undefined("accuracy of an empty set"));
        }
        Ok(Accuracy { correct, total })
    }

    pub fn fraction(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// Percent in hundredths, rounded half up.
    pub fn percent_hundredths(&self) -> u64 {
        (self.correct * 20_000 + self.total) / (2 * self.total)
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.percent_hundredths();
        write!(f, "{}.{:02}% ({}/{})", h / 100, h % 100, self.correct, self.total)
    }
}

fn percent_string(correct: u64, total: u64) -> String {
    match Accuracy::new(correct, total) {
        Ok(a) => {
            let h = a.percent_hundredths();
            format!("{}.{:02}", h / 100, h % 100)
        }
        Err(_) => "NA".into(),
    }
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        ConfusionMatrix { class_names, counts: vec![vec![0; k]; k] }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        self.counts[actual].iter().sum()
    }

    pub fn class_accuracy(&self, actual: usize) -> Result<Accuracy> {
        Accuracy::new(self.counts[actual][actual], self.row_sum(actual))
    }

    pub fn overall_accuracy(&self) -> Result<Accuracy> {
        Accuracy::new(self.trace(), self.total())
    }

    /// Header row `Class`, the predicted class names, `Accuracy(%)`; one
    /// row per actual class ending in its percent accuracy (`NA` for empty
    /// rows); a final `Total` row carrying only the overall accuracy.
    pub fn to_tsv(&self) -> String {
        let k = self.num_classes();
        let mut s = String::from("Class");
        for name in &self.class_names {
            s.push('\t');
            s.push_str(name);
        }
        s.push_str("\tAccuracy(%)\n");
        for (i, name) in self.class_names.iter().enumerate() {
            s.push_str(name);
            for c in &self.counts[i] {
                s.push_str(&format!("\t{c}"));
            }
            s.push_str(&format!("\t{}\n", percent_string(self.counts[i][i], self.row_sum(i))));
        }
        s.push_str("Total");
        s.push_str(&"\t".repeat(k));
        s.push_str(&format!("\t{}\n", percent_string(self.trace(), self.total())));
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Format { offset: line as u64, message: msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::EmptyInput("confusion matrix"))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 3 || cols[0] != "Class" || cols[cols.len() - 1] != "Accuracy(%)" {
            return Err(bad(1, "header must be 'Class<TAB>names...<TAB>Accuracy(%)'".into()));
        }
        let names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let mut cm = ConfusionMatrix::new(names);
        let k = cm.num_classes();
        let mut rows = 0;
        for (n, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            if rows == k && f.first() == Some(&"Total") {
                rows += 1;
                continue;
            }
            if rows >= k || f.len() != k + 2 || f[0] != cm.class_names[rows] {
                return Err(bad(n + 1, format!("unexpected row '{line}'")));
            }
            for (j, v) in f[1..=k].iter().enumerate() {
                cm.counts[rows][j] = v.parse().map_err(|_| bad(n + 1, format!("count '{v}' is not an integer")))?;
            }
            rows += 1;
        }
        if rows != k + 1 {
            return Err(bad(0, format!("expected {k} class rows and a Total row")));
        }
        Ok(cm)
    }
}

fn check_classes<C: Classifier + ?Sized>(classifier: &C, class_names: &[String]) -> Result<()> {
    if classifier.num_classes() != class_names.len() {
        return Err(Error::Config(format!(
            "classifier has {} classes, dataset has {}",
            classifier.num_classes(),
            class_names.len()
        )));
    }
    Ok(())
}

fn count_correct<C: Classifier + ?Sized>(classifier: &C, chips: &[Chip], crop: impl Fn(&Image) -> Result<Image>) -> Result<u64> {
    let mut correct = 0;
    for group in chips.chunks(INFERENCE_BATCH) {
        let patches: Vec<Image> = group.iter().map(|c| crop(&c.pixels)).collect::<Result<_>>()?;
        let predicted = classifier.classify(&patches)?;
        correct += predicted.iter().zip(group).filter(|(p, c)| **p == c.label).count() as u64;
    }
    Ok(correct)
}

/// Classifies the deterministic crop of every chip. Random crop specs are
/// rejected: evaluation never uses random crops.
pub fn confusion_matrix<C: Classifier + ?Sized>(
    classifier: &C,
    chips: &[Chip],
    class_names: &[String],
    crop: &CropSpec,
) -> Result<ConfusionMatrix> {
    check_classes(classifier, class_names)?;
    let mut cm = ConfusionMatrix::new(class_names.to_vec());
    for group in chips.chunks(INFERENCE_BATCH) {
        let patches: Vec<Image> = group.iter().map(|c| apply_crop(&c.pixels, crop, None)).collect::<Result<_>>()?;
        for (chip, p) in group.iter().zip(classifier.classify(&patches)?) {
            if chip.label >= cm.num_classes() {
                return Err(Error::InvalidLabel { label: chip.label, classes: cm.num_classes() });
            }
            cm.add(chip.label, p);
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cell {
    pub correct: u64,
    pub total: u64,
}

impl Cell {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Accuracy for every integer displacement in `[-radius, radius]^2`,
/// stored row-major with `dy` outer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationMap {
    pub radius: usize,
    pub crop_size: usize,
    /// Smallest `(rows, cols)` among the evaluated chips.
    pub chip_extent: (usize, usize),
    pub cells: Vec<Cell>,
}

impl TranslationMap {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    fn index(&self, dx: i64, dy: i64) -> Option<usize> {
        let r = self.radius as i64;
        if dx.abs() > r || dy.abs() > r {
            return None;
        }
        Some(((dy + r) * (2 * r + 1) + (dx + r)) as usize)
    }

    pub fn cell(&self, dx: i64, dy: i64) -> Option<Cell> {
        self.index(dx, dy).map(|i| self.cells[i])
    }

    pub fn accuracy(&self, dx: i64, dy: i64) -> Option<f64> {
        self.cell(dx, dy).map(|c| c.accuracy())
    }

    /// `(dx, dy, cell)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Cell)> + '_ {
        let r = self.radius as i64;
        let side = self.side();
        self.cells.iter().enumerate().map(move |(i, c)| ((i % side) as i64 - r, (i / side) as i64 - r, *c))
    }

    /// `dy,dx,correct,total,accuracy` with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dy,dx,correct,total,accuracy\n");
        for (dx, dy, c) in self.iter() {
            s.push_str(&format!("{dy},{dx},{},{},{:.6}\n", c.correct, c.total, c.accuracy()));
        }
        s
    }

    /// Rebuilds a map from [`to_csv`](Self::to_csv) output. Crop size and
    /// chip extent are not part of the CSV and are supplied by the caller.
    pub fn from_csv(text: &str, crop_size: usize, chip_extent: (usize, usize)) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Format { offset: line as u64, message: msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, "dy,dx,correct,total,accuracy")) => {}
            _ => return Err(bad(1, "missing header 'dy,dx,correct,total,accuracy'".into())),
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(n + 1, format!("expected 5 fields in '{line}'")));
            }
            let int = |s: &str| s.trim().parse::<i64>().map_err(|_| bad(n + 1, format!("'{s}' is not an integer")));
            rows.push((int(f[0])?, int(f[1])?, int(f[2])?, int(f[3])?));
        }
        let side = (rows.len() as f64).sqrt().round() as usize;
        if side * side != rows.len() || side % 2 == 0 {
            return Err(bad(0, format!("{} rows do not form an odd square grid", rows.len())));
        }
        let mut map = TranslationMap { radius: side / 2, crop_size, chip_extent, cells: vec![Cell::default(); rows.len()] };
        for (i, (dy, dx, correct, total)) in rows.into_iter().enumerate() {
            if map.index(dx, dy) != Some(i) || correct < 0 || total < correct {
                return Err(bad(i + 2, format!("row ({dy},{dx}) out of order or inconsistent")));
            }
            map.cells[i] = Cell { correct: correct as u64, total: total as u64 };
        }
        Ok(map)
    }

    /// 8-bit binary PGM, one pixel per cell, `round(255 * accuracy)`, with
    /// `(-R, -R)` at the top left.
    pub fn to_pgm(&self) -> Vec<u8> {
        let side = self.side();
        let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
        out.extend(self.cells.iter().map(|c| (255.0 * c.accuracy()).round() as u8));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Largest admissible map radius over a set of chips.
pub fn max_radius(chips: &[Chip], crop_size: usize) -> Result<usize> {
    let rows = chips.iter().map(|c| c.pixels.rows).min().ok_or(Error::EmptyInput("test set"))?;
    let cols = chips.iter().map(|c| c.pixels.cols).min().unwrap_or(rows);
    if crop_size == 0 || crop_size > rows.min(cols) {
        return Err(Error::InvalidCrop(format!("{crop_size}px crop from {rows}x{cols} chips")));
    }
    Ok(max_translation(rows, cols, crop_size))
}

/// Evaluates every displacement cell over `threads` workers. Cells are
/// distributed round-robin and each is counted independently, so the result
/// does not depend on `threads`.
pub fn translation_map<C: Classifier + ?Sized>(
    classifier: &C,
    chips: &[Chip],
    crop_size: usize,
    radius: usize,
    threads: usize,
) -> Result<TranslationMap> {
    let bound = max_radius(chips, crop_size)?;
    if radius > bound {
        return Err(Error::Range { message: format!("map radius {radius} exceeds the maximum"), bound });
    }
    let rows = chips.iter().map(|c| c.pixels.rows).min().unwrap_or(0);
    let cols = chips.iter().map(|c| c.pixels.cols).min().unwrap_or(0);
    let mut map = TranslationMap { radius, crop_size, chip_extent: (rows, cols), cells: vec![Cell::default(); (2 * radius + 1).pow(2)] };
    let offsets: Vec<(i64, i64)> = map.iter().map(|(dx, dy, _)| (dx, dy)).collect();
    let threads = threads.clamp(1, offsets.len());
    let eval_cell = |(dx, dy): (i64, i64)| -> Result<Cell> {
        let correct = count_correct(classifier, chips, |img| translated_crop(img, crop_size, dx, dy))?;
        Ok(Cell { correct, total: chips.len() as u64 })
    };
    let results: Vec<Result<Vec<(usize, Cell)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let offsets = &offsets;
                let eval_cell = &eval_cell;
                s.spawn(move || {
                    (t..offsets.len())
                        .step_by(threads)
                        .map(|i| eval_cell(offsets[i]).map(|c| (i, c)))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("map worker panicked")).collect()
    });
    for part in results {
        for (i, c) in part? {
            map.cells[i] = c;
        }
    }
    Ok(map)
}

/// `(offset, cell)` pairs along one axis of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationPlot {
    /// Accuracy against `dx` at `dy = 0`.
    pub along_x: Vec<(i64, Cell)>,
    /// Accuracy against `dy` at `dx = 0`.
    pub along_y: Vec<(i64, Cell)>,
}

impl TranslationPlot {
    /// `axis<TAB>offset<TAB>correct<TAB>total<TAB>accuracy` with a header row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("axis\toffset\tcorrect\ttotal\taccuracy\n");
        for (axis, series) in [("dx", &self.along_x), ("dy", &self.along_y)] {
            for (o, c) in series {
                s.push_str(&format!("{axis}\t{o}\t{}\t{}\t{:.6}\n", c.correct, c.total, c.accuracy()));
            }
        }
        s
    }
}

pub fn translation_plot(map: &TranslationMap) -> TranslationPlot {
    let r = map.radius as i64;
    let cell = |dx, dy| map.cell(dx, dy).unwrap_or_default();
    TranslationPlot {
        along_x: (-r..=r).map(|d| (d, cell(d, 0))).collect(),
        along_y: (-r..=r).map(|d| (d, cell(0, d))).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBin {
    pub r: usize,
    pub cells: usize,
    pub mean_accuracy: f64,
}

/// Rounded radius of a displacement: `floor(sqrt(dx^2 + dy^2) + 0.5)`.
pub fn radial_bin(dx: i64, dy: i64) -> usize {
    (((dx * dx + dy * dy) as f64).sqrt() + 0.5).floor() as usize
}

/// Mean cell accuracy per rounded radius, ascending, empty bins omitted.
pub fn radial_profile(map: &TranslationMap) -> Vec<RadialBin> {
    let mut sums: Vec<(usize, f64)> = Vec::new();
    for (dx, dy, c) in map.iter() {
        let r = radial_bin(dx, dy);
        if sums.len() <= r {
            sums.resize(r + 1, (0, 0.0));
        }
        sums[r].0 += 1;
        sums[r].1 += c.accuracy();
    }
    sums.into_iter()
        .enumerate()
        .filter(|(_, (n, _))| *n > 0)
        .map(|(r, (n, s))| RadialBin { r, cells: n, mean_accuracy: s / n as f64 })
        .collect()
}

pub fn radial_tsv(profile: &[RadialBin]) -> String {
    let mut s = String::from("r\tcells\tmean_accuracy\n");
    for b in profile {
        s.push_str(&format!("{}\t{}\t{:.6}\n", b.r, b.cells, b.mean_accuracy));
    }
    s
}
