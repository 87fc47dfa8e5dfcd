use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use satm::config::{parse_list, KeyValues};
use satm::data::phoenix::parse_phoenix;
use satm::data::portable::{decode_sarc, encode_sarc};
use satm::data::{
    detect_format, load_dataset, mean_image, validate_split, write_pgm16, ChipFormat, CropSpec, LoadOptions, Split,
    SplitReport,
};
use satm::eval::{confusion_matrix, radial_profile, radial_tsv, translation_map, translation_plot};
use satm::model::{load_checkpoint, read_checkpoint_header, save_checkpoint, NetworkConfig, CHECKPOINT_MAGIC};
use satm::synth::{generate_dataset, SynthConfig};
use satm::train::{train_with, Augmentation, LrSchedule, TrainConfig};
use satm::{Error, Result};

/// Translation-invariance toolkit for SAR target chip classifiers.
#[derive(Parser)]
#[command(name = "satm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic chip dataset.
    Synth(SynthArgs),
    /// Train a network and write a checkpoint plus a per-epoch TSV log.
    Train(TrainArgs),
    /// Confusion matrix and accuracy on center-cropped test chips.
    Eval(EvalArgs),
    /// Accuracy-translation map over test chips.
    Transmap(TransmapArgs),
    /// Mean image of a split as a 16-bit PGM.
    MeanImage(MeanImageArgs),
    /// Print the header and metadata of a chip or checkpoint file.
    Inspect(InspectArgs),
    /// Convert a Phoenix or SARC chip to SARC.
    Convert(ConvertArgs),
    /// Write the dataset manifest and check split counts.
    Manifest(ManifestArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Chip side in pixels.
    #[arg(long)]
    chip_size: Option<usize>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    /// Number of looks of the multiplicative gamma speckle.
    #[arg(long)]
    speckle_looks: Option<f64>,
    /// Mean background magnitude.
    #[arg(long)]
    clutter_level: Option<f64>,
    #[arg(long)]
    target_amplitude: Option<f64>,
    /// Peak gain of the bright scatterer core at the target centroid.
    #[arg(long)]
    core_gain: Option<f64>,
    /// Gaussian width of the core in pixels.
    #[arg(long)]
    core_sigma: Option<f64>,
    /// Maximum target offset from the chip center in pixels.
    #[arg(long)]
    jitter: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root containing train/ and test/.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch TSV log (default: checkpoint path with `.log.tsv` appended).
    #[arg(long)]
    log: Option<PathBuf>,
    /// `none` or `random:<source size>`.
    #[arg(long)]
    aug: Option<Augmentation>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Learning-rate multiplier applied at each milestone.
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Comma-separated epochs at which the decay applies.
    #[arg(long)]
    lr_milestones: Option<String>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel width multiplier.
    #[arg(long)]
    width_mult: Option<f64>,
    /// Network input and crop size.
    #[arg(long)]
    crop_size: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Confusion matrix TSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransmapArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Largest |dx|, |dy| evaluated (default 8).
    #[arg(long)]
    radius: Option<usize>,
    /// Output prefix: writes `<out>.csv` and `<out>.pgm`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Axis-slice TSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Radial profile TSV.
    #[arg(long)]
    radial: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "SATM_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct MeanImageArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// `train` or `test` (default train).
    #[arg(long)]
    split: Option<Split>,
    /// Center-crop size (default: the smallest chip extent).
    #[arg(long)]
    crop_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct ManifestArgs {
    #[arg(long)]
    data: PathBuf,
    /// Manifest TSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A config file overlaid with command-line flags. Keys use underscores;
/// dashes in file keys are accepted.
struct Layered {
    kv: KeyValues,
}

impl Layered {
    fn new(file: Option<&Path>, known: &[&str]) -> Result<Self> {
        let mut kv = KeyValues::new();
        if let Some(path) = file {
            for (k, v) in KeyValues::read(path)?.iter() {
                let key = k.replace('-', "_");
                if !known.contains(&key.as_str()) {
                    return Err(Error::Config(format!("{}: unknown key '{k}'", path.display())));
                }
                kv.set(&key, v);
            }
        }
        Ok(Layered { kv })
    }

    fn flag(&mut self, key: &str, value: Option<impl std::fmt::Display>) -> &mut Self {
        if let Some(v) = value {
            self.kv.set(key, v);
        }
        self
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        self.kv.require(key).map(PathBuf::from).map_err(|_| Error::Config(format!("--{} is required", key.replace('_', "-"))))
    }
}

fn echo(kv: &KeyValues) {
    eprintln!("# effective config");
    eprint!("{}", kv.render());
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let known = ["out", "seed", "chip_size", "train_per_class", "test_per_class", "speckle_looks", "clutter_level", "target_amplitude", "core_gain", "core_sigma", "jitter"];
    let mut l = Layered::new(a.config.as_deref(), &known)?;
    l.flag("out", a.out.as_ref().map(|p| p.display()))
        .flag("seed", a.seed)
        .flag("chip_size", a.chip_size)
        .flag("train_per_class", a.train_per_class)
        .flag("test_per_class", a.test_per_class)
        .flag("speckle_looks", a.speckle_looks)
        .flag("clutter_level", a.clutter_level)
        .flag("target_amplitude", a.target_amplitude)
        .flag("core_gain", a.core_gain)
        .flag("core_sigma", a.core_sigma)
        .flag("jitter", a.jitter);
    let out = l.path("out")?;
    let cfg = SynthConfig::from_kv(&l.kv)?;
    let mut effective = KeyValues::new();
    effective.set("out", out.display());
    effective.merge(&cfg.to_kv());
    echo(&effective);
    let manifest = generate_dataset(&cfg, &out)?;
    println!(
        "wrote {} train and {} test chips in {} classes to {}",
        manifest.total(Split::Train),
        manifest.total(Split::Test),
        manifest.classes.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let known = ["data", "out", "log", "aug", "epochs", "batch_size", "lr", "lr_decay", "lr_milestones", "momentum", "weight_decay", "seed", "width_mult", "crop_size"];
    let mut l = Layered::new(a.config.as_deref(), &known)?;
    l.flag("data", a.data.as_ref().map(|p| p.display()))
        .flag("out", a.out.as_ref().map(|p| p.display()))
        .flag("log", a.log.as_ref().map(|p| p.display()))
        .flag("aug", a.aug)
        .flag("epochs", a.epochs)
        .flag("batch_size", a.batch_size)
        .flag("lr", a.lr)
        .flag("lr_decay", a.lr_decay)
        .flag("lr_milestones", a.lr_milestones)
        .flag("momentum", a.momentum)
        .flag("weight_decay", a.weight_decay)
        .flag("seed", a.seed)
        .flag("width_mult", a.width_mult)
        .flag("crop_size", a.crop_size);
    let data = l.path("data")?;
    let out = l.path("out")?;
    let log = match l.kv.get("log") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from(format!("{}.log.tsv", out.display())),
    };
    let d = TrainConfig::default();
    let kv = &l.kv;
    let milestones = match kv.get("lr_milestones") {
        Some(v) if v.trim().is_empty() => Vec::new(),
        Some(v) => parse_list("lr_milestones", v)?,
        None => d.lr_schedule.milestones.clone(),
    };
    let cfg = TrainConfig {
        augmentation: kv.parsed_or("aug", d.augmentation)?,
        crop_size: kv.parsed_or("crop_size", d.crop_size)?,
        epochs: kv.parsed_or("epochs", d.epochs)?,
        batch_size: kv.parsed_or("batch_size", d.batch_size)?,
        lr: kv.parsed_or("lr", d.lr)?,
        lr_schedule: LrSchedule { factor: kv.parsed_or("lr_decay", d.lr_schedule.factor)?, milestones },
        momentum: kv.parsed_or("momentum", d.momentum)?,
        weight_decay: kv.parsed_or("weight_decay", d.weight_decay)?,
        seed: kv.parsed_or("seed", d.seed)?,
    };
    cfg.validate()?;

    let dataset = load_dataset(&data, &LoadOptions { split: Some(Split::Train), ..Default::default() })?;
    let classes = dataset.manifest.classes.clone();
    let net = NetworkConfig {
        input_size: cfg.crop_size,
        num_classes: classes.len(),
        width_mult: kv.parsed_or("width_mult", NetworkConfig::default().width_mult)?,
        ..NetworkConfig::default()
    };
    net.validate()?;

    let mut effective = KeyValues::new();
    effective.set("data", data.display());
    effective.set("out", out.display());
    effective.set("log", log.display());
    effective.set("aug", cfg.augmentation);
    effective.set("epochs", cfg.epochs);
    effective.set("batch_size", cfg.batch_size);
    effective.set("lr", cfg.lr);
    effective.set("lr_decay", cfg.lr_schedule.factor);
    effective.set("lr_milestones", cfg.lr_schedule.milestones.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","));
    effective.set("momentum", cfg.momentum);
    effective.set("weight_decay", cfg.weight_decay);
    effective.set("seed", cfg.seed);
    effective.set("width_mult", net.width_mult);
    effective.set("crop_size", cfg.crop_size);
    echo(&effective);

    let chips = dataset.into_split(Split::Train);
    eprintln!("training on {} chips, {} classes", chips.len(), classes.len());
    let (model, log_records) = train_with(&net, &cfg, &chips, &classes, |r| {
        eprintln!(
            "epoch {:>3}  loss {:.4}  acc {:.4}  lr {:.3e}  {:.1}s",
            r.epoch, r.mean_loss, r.train_acc, r.lr, r.wall_seconds
        );
    })?;
    save_checkpoint(&model, &out)?;
    write_file(&log, log_records.to_tsv())?;
    println!("checkpoint {}", out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let mut l = Layered::new(a.config.as_deref(), &["checkpoint", "data", "out"])?;
    l.flag("checkpoint", a.checkpoint.as_ref().map(|p| p.display()))
        .flag("data", a.data.as_ref().map(|p| p.display()))
        .flag("out", a.out.as_ref().map(|p| p.display()));
    let checkpoint = l.path("checkpoint")?;
    let data = l.path("data")?;
    echo(&l.kv);
    let model = load_checkpoint(&checkpoint)?;
    let classes = model.meta.class_names.clone();
    let chips = load_dataset(&data, &LoadOptions { classes: Some(classes.clone()), split: Some(Split::Test) })?.chips;
    let cm = confusion_matrix(&model, &chips, &classes, &CropSpec::center(model.meta.crop_size))?;
    if let Some(out) = l.kv.get("out") {
        write_file(Path::new(out), cm.to_tsv())?;
    } else {
        print!("{}", cm.to_tsv());
    }
    println!("accuracy {}", cm.overall_accuracy()?);
    Ok(())
}

fn cmd_transmap(a: TransmapArgs) -> Result<()> {
    let known = ["checkpoint", "data", "radius", "out", "plot", "radial", "threads"];
    let mut l = Layered::new(a.config.as_deref(), &known)?;
    l.flag("checkpoint", a.checkpoint.as_ref().map(|p| p.display()))
        .flag("data", a.data.as_ref().map(|p| p.display()))
        .flag("radius", a.radius)
        .flag("out", a.out.as_ref().map(|p| p.display()))
        .flag("plot", a.plot.as_ref().map(|p| p.display()))
        .flag("radial", a.radial.as_ref().map(|p| p.display()))
        .flag("threads", a.threads);
    let checkpoint = l.path("checkpoint")?;
    let data = l.path("data")?;
    let out = l.path("out")?;
    let radius = l.kv.parsed_or("radius", 8usize)?;
    let default_threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = l.kv.parsed_or("threads", default_threads)?.max(1);
    l.kv.set("radius", radius);
    l.kv.set("threads", threads);
    echo(&l.kv);

    let model = load_checkpoint(&checkpoint)?;
    let classes = model.meta.class_names.clone();
    let chips = load_dataset(&data, &LoadOptions { classes: Some(classes), split: Some(Split::Test) })?.chips;
    let map = translation_map(&model, &chips, model.meta.crop_size, radius, threads)?;
    map.write_csv(&PathBuf::from(format!("{}.csv", out.display())))?;
    map.write_pgm(&PathBuf::from(format!("{}.pgm", out.display())))?;
    if let Some(p) = l.kv.get("plot") {
        write_file(Path::new(p), translation_plot(&map).to_tsv())?;
    }
    let profile = radial_profile(&map);
    if let Some(p) = l.kv.get("radial") {
        write_file(Path::new(p), radial_tsv(&profile))?;
    }
    if let Some(c) = map.cell(0, 0) {
        println!("accuracy at (0,0) {}/{}", c.correct, c.total);
    }
    for b in &profile {
        println!("r={:<3} cells={:<4} mean_accuracy={:.4}", b.r, b.cells, b.mean_accuracy);
    }
    Ok(())
}

fn cmd_mean_image(a: MeanImageArgs) -> Result<()> {
    let mut l = Layered::new(a.config.as_deref(), &["data", "split", "crop_size", "out"])?;
    l.flag("data", a.data.as_ref().map(|p| p.display()))
        .flag("split", a.split)
        .flag("crop_size", a.crop_size)
        .flag("out", a.out.as_ref().map(|p| p.display()));
    let data = l.path("data")?;
    let out = l.path("out")?;
    let split = l.kv.parsed_or("split", Split::Train)?;
    let chips = load_dataset(&data, &LoadOptions { split: Some(split), ..Default::default() })?.chips;
    let smallest = chips.iter().map(|c| c.pixels.rows.min(c.pixels.cols)).min().ok_or(Error::EmptyInput("dataset split"))?;
    let crop = l.kv.parsed_or("crop_size", smallest)?;
    l.kv.set("split", split);
    l.kv.set("crop_size", crop);
    echo(&l.kv);
    let mean = mean_image(chips.iter().map(|c| &c.pixels), &CropSpec::center(crop))?;
    write_pgm16(&mean, &out)?;
    let (r, c) = mean.argmax();
    println!("mean of {} chips, {}x{}, brightest pixel at row {r} col {c}", chips.len(), mean.rows, mean.cols);
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let path = &a.path;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(CHECKPOINT_MAGIC) {
        let h = read_checkpoint_header(path)?;
        println!("format=checkpoint");
        println!("version={}", h.version);
        print!("{}", h.raw.render());
        let model = load_checkpoint(path)?;
        println!("architecture={}", model.network.report());
        return Ok(());
    }
    let inner = || -> Result<()> {
        match detect_format(&bytes) {
            Some(ChipFormat::Portable) => {
                let (img, meta) = decode_sarc(&bytes)?;
                println!("format=sarc");
                println!("magic=SARC");
                println!("rows={}", img.rows);
                println!("cols={}", img.cols);
                print!("{}", meta.render());
            }
            Some(ChipFormat::Phoenix) => {
                let chip = parse_phoenix(&bytes)?;
                println!("format=phoenix");
                println!("version={}", chip.version);
                println!("rows={}", chip.magnitude.rows);
                println!("cols={}", chip.magnitude.cols);
                println!("data_offset={}", chip.data_offset);
                println!("target_type={}", chip.target_type.as_deref().unwrap_or(""));
                println!("serial={}", chip.serial.as_deref().unwrap_or(""));
                println!("depression_deg={}", chip.depression_deg.map_or(String::new(), |d| d.to_string()));
                for (k, v) in chip.header.iter() {
                    println!("header.{k}={v}");
                }
            }
            None => return Err(Error::Format { offset: 0, message: "unknown magic (expected SATM, SARC or Phoenix)".into() }),
        }
        Ok(())
    };
    inner().map_err(|e| e.in_file(path))
}

fn cmd_convert(a: ConvertArgs) -> Result<()> {
    let bytes = std::fs::read(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let encoded = (|| -> Result<Vec<u8>> {
        match detect_format(&bytes) {
            Some(ChipFormat::Portable) => {
                let (img, meta) = decode_sarc(&bytes)?;
                Ok(encode_sarc(&img, &meta))
            }
            Some(ChipFormat::Phoenix) => {
                let chip = parse_phoenix(&bytes)?;
                let mut meta = KeyValues::new();
                if let Some(t) = &chip.target_type {
                    meta.set("class", t);
                }
                if let Some(s) = &chip.serial {
                    meta.set("serial", s);
                }
                if let Some(d) = chip.depression_deg {
                    meta.set("depression_deg", d);
                }
                Ok(encode_sarc(&chip.magnitude, &meta))
            }
            None => Err(Error::Format { offset: 0, message: "unknown chip magic (expected SARC or Phoenix)".into() }),
        }
    })()
    .map_err(|e| e.in_file(&a.input))?;
    write_file(&a.output, encoded)?;
    println!("wrote {}", a.output.display());
    Ok(())
}

fn cmd_manifest(a: ManifestArgs) -> Result<()> {
    let dataset = load_dataset(&a.data, &LoadOptions::default())?;
    let m = &dataset.manifest;
    match &a.out {
        Some(p) => write_file(p, m.to_tsv())?,
        None => print!("{}", m.to_tsv()),
    }
    for (name, (train, test)) in m.classes.iter().zip(&m.counts) {
        eprintln!("{name}\ttrain {train}\ttest {test}");
    }
    eprintln!("total\ttrain {}\ttest {}", m.total(Split::Train), m.total(Split::Test));
    match validate_split(m) {
        SplitReport::Pass => eprintln!("split counts match the reference table"),
        SplitReport::NoReference => eprintln!("no reference counts for this class list"),
        SplitReport::Mismatch(problems) => {
            for p in &problems {
                eprintln!("mismatch: {p}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Transmap(a) => cmd_transmap(a),
        Command::MeanImage(a) => cmd_mean_image(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Manifest(a) => cmd_manifest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
