//! Dataset directories: `root/{train,test}/<CLASS>/<chip files>`.
//!
//! Labels follow the class list: `root/classes.txt` (one name per line) when
//! present, otherwise the ten MSTAR classes in their standard order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::KeyValues;
use crate::data::image::Image;
use crate::data::phoenix::{is_phoenix, parse_phoenix};
use crate::data::portable::{decode_sarc, is_sarc};
use crate::error::{Error, Result};

pub const MSTAR_CLASSES: [&str; 10] = ["2S1", "BMP2", "BRDM2", "BTR60", "BTR70", "D7", "T62", "T72", "ZIL131", "ZSU234"];

/// Reference `(train, test)` chip counts of the ten-class MSTAR set
/// (17 degree depression for training, 15 degree for testing).
pub const MSTAR_COUNTS: [(usize, usize); 10] =
    [(299, 274), (698, 587), (298, 274), (256, 195), (233, 196), (299, 274), (299, 273), (691, 582), (299, 274), (299, 274)];

pub const CLASS_LIST_FILE: &str = "classes.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Train, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split '{s}' (train|test)"))),
        }
    }
}

/// One target chip.
#[derive(Debug, Clone, PartialEq)]
pub struct Chip {
    /// Linear-scale SAR magnitude.
    pub pixels: Image,
    pub label: usize,
    pub class_name: String,
    pub serial: String,
    pub depression_deg: f64,
    pub split: Split,
    pub source_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChipFormat {
    Phoenix,
    Portable,
}

pub fn detect_format(bytes: &[u8]) -> Option<ChipFormat> {
    if is_sarc(bytes) {
        Some(ChipFormat::Portable)
    } else if is_phoenix(bytes) {
        Some(ChipFormat::Phoenix)
    } else {
        None
    }
}

/// Reads a chip file of either format. Label and class come from the
/// caller; serial and depression from the file's own metadata.
pub fn load_chip_file(path: &Path, label: usize, class_name: &str, split: Split) -> Result<Chip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decode = || -> Result<Chip> {
        let (pixels, serial, depression) = match detect_format(&bytes) {
            Some(ChipFormat::Portable) => {
                let (img, meta) = decode_sarc(&bytes)?;
                let serial = meta.get("serial").unwrap_or_default().to_string();
                (img, serial, meta.parsed::<f64>("depression_deg")?.unwrap_or(f64::NAN))
            }
            Some(ChipFormat::Phoenix) => {
                let c = parse_phoenix(&bytes)?;
                (c.magnitude, c.serial.unwrap_or_default(), c.depression_deg.unwrap_or(f64::NAN))
            }
            None => return Err(Error::Format { offset: 0, message: "unknown chip magic (expected SARC or Phoenix)".into() }),
        };
        if let Some(v) = pixels.data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Format { offset: 0, message: format!("magnitude {v} is not finite and non-negative") });
        }
        Ok(Chip {
            pixels,
            label,
            class_name: class_name.to_string(),
            serial,
            depression_deg: depression,
            split,
            source_path: path.to_path_buf(),
        })
    };
    decode().map_err(|e| e.in_file(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class_name: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    /// `(train, test)` counts per class, in class order.
    pub counts: Vec<(usize, usize)>,
}

impl DatasetManifest {
    pub fn new(classes: Vec<String>) -> Self {
        let counts = vec![(0, 0); classes.len()];
        DatasetManifest { classes, entries: Vec::new(), counts }
    }

    pub fn push(&mut self, label: usize, path: PathBuf, split: Split) {
        let c = &mut self.counts[label];
        match split {
            Split::Train => c.0 += 1,
            Split::Test => c.1 += 1,
        }
        self.entries.push(ManifestEntry { path, class_name: self.classes[label].clone(), split });
    }

    pub fn total(&self, split: Split) -> usize {
        self.counts.iter().map(|c| if split == Split::Train { c.0 } else { c.1 }).sum()
    }

    pub fn is_mstar(&self) -> bool {
        self.classes.iter().map(String::as_str).eq(MSTAR_CLASSES)
    }

    /// `path<TAB>class<TAB>split` with a header row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("path\tclass\tsplit\n");
        for e in &self.entries {
            s.push_str(&format!("{}\t{}\t{}\n", e.path.display(), e.class_name, e.split));
        }
        s
    }
}

/// Outcome of comparing a manifest with the reference MSTAR counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitReport {
    Pass,
    Mismatch(Vec<String>),
    /// The manifest's classes are not the MSTAR ten; nothing to compare with.
    NoReference,
}

impl fmt::Display for SplitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitReport::Pass => write!(f, "pass: per-class counts match the MSTAR ten-class reference"),
            SplitReport::Mismatch(m) => write!(f, "fail: {}", m.join("; ")),
            SplitReport::NoReference => write!(f, "no reference counts for this class list"),
        }
    }
}

pub fn validate_split(manifest: &DatasetManifest) -> SplitReport {
    if !manifest.is_mstar() {
        return SplitReport::NoReference;
    }
    let mut problems = Vec::new();
    for ((name, &(train, test)), &(want_train, want_test)) in
        manifest.classes.iter().zip(&manifest.counts).zip(&MSTAR_COUNTS)
    {
        if train != want_train {
            problems.push(format!("{name} train: expected {want_train} got {train}"));
        }
        if test != want_test {
            problems.push(format!("{name} test: expected {want_test} got {test}"));
        }
    }
    if problems.is_empty() {
        SplitReport::Pass
    } else {
        SplitReport::Mismatch(problems)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Overrides the class list found in (or defaulted for) the root.
    pub classes: Option<Vec<String>>,
    /// Restricts loading to one split.
    pub split: Option<Split>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub chips: Vec<Chip>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&Chip> {
        self.chips.iter().filter(|c| c.split == split).collect()
    }

    pub fn into_split(self, split: Split) -> Vec<Chip> {
        self.chips.into_iter().filter(|c| c.split == split).collect()
    }
}

pub fn read_class_list(root: &Path) -> Result<Option<Vec<String>>> {
    let path = root.join(CLASS_LIST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(Some(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()))
}

pub fn write_class_list(root: &Path, classes: &[String]) -> Result<()> {
    let path = root.join(CLASS_LIST_FILE);
    let text: String = classes.iter().map(|c| format!("{c}\n")).collect();
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        out.push(entry.map_err(|e| Error::io(path, e))?.path());
    }
    out.sort();
    Ok(out)
}

/// Loads every chip under `root`. Chips are ordered by split (train first),
/// then class label, then file name.
pub fn load_dataset(root: &Path, options: &LoadOptions) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::io(root, std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory")));
    }
    let classes = match &options.classes {
        Some(c) => c.clone(),
        None => read_class_list(root)?.unwrap_or_else(|| MSTAR_CLASSES.iter().map(|s| s.to_string()).collect()),
    };
    let mut manifest = DatasetManifest::new(classes.clone());
    let mut chips = Vec::new();
    for split in Split::ALL {
        if options.split.is_some_and(|s| s != split) {
            continue;
        }
        let split_dir = root.join(split.dir_name());
        if !split_dir.is_dir() {
            continue;
        }
        let mut per_class: Vec<Vec<PathBuf>> = vec![Vec::new(); classes.len()];
        for class_dir in sorted_dir(&split_dir)? {
            if !class_dir.is_dir() {
                continue;
            }
            let name = class_dir.file_name().unwrap_or_default().to_string_lossy().to_string();
            let label = classes.iter().position(|c| *c == name).ok_or_else(|| Error::UnknownClass {
                name: name.clone(),
                expected: classes.join(", "),
            })?;
            per_class[label] = sorted_dir(&class_dir)?.into_iter().filter(|p| p.is_file()).collect();
        }
        for (label, files) in per_class.into_iter().enumerate() {
            for path in files {
                chips.push(load_chip_file(&path, label, &classes[label], split)?);
                manifest.push(label, path, split);
            }
        }
    }
    Ok(Dataset { chips, manifest })
}

/// Metadata keys written alongside pixels in `SARC` files.
pub fn chip_metadata(chip: &Chip) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("class", &chip.class_name);
    kv.set("serial", &chip.serial);
    kv.set("depression_deg", chip.depression_deg);
    kv.set("split", chip.split);
    kv
}
