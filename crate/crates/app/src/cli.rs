//! `stylecurve` command line.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use stylecurve_core::enhancer::{
    build_lut_set, enhance_with, parse_sliders, CurveSet, CurveSetFile, KnotLayout, RenderMode,
    DEFAULT_DEPTH,
};
use stylecurve_core::io::{load_image, save_image};
use stylecurve_core::style::StyleLatent;
use stylecurve_core::{BitDepth, Image};
use stylecurve_nn::model::{load_weights, save_weights};
use stylecurve_nn::{CurveEncoderConfig, MappingConfig, ModelConfig, Pipeline, StyleEncoderConfig};
use stylecurve_train::dataset::STYLES_FILE;
use stylecurve_train::eval::{
    off_diagonal_mean, style_matrix_eval, write_matrix_csv, write_metrics_csv,
};
use stylecurve_train::presets::preset;
use stylecurve_train::{
    embed_images, load_dataset, procedural_bases, train_enhancer, train_style_encoder,
    write_dataset, StyleEntry, TrainConfig,
};

use crate::engine::{render, save_style, Engine, StyleRegistry};
use crate::server::{serve, AppState, DEFAULT_ADDR};
use crate::session::{SessionStore, DEFAULT_SESSION_CAPACITY};

/// Environment variable naming the default model file.
pub const MODEL_ENV: &str = "STARENH_MODEL";

#[derive(Debug, Parser)]
#[command(
    name = "stylecurve",
    version,
    about = "Style-aware curve-based photo enhancement"
)]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a synthetic multi-style dataset.
    Synth(SynthArgs),
    /// Train the style encoder on a dataset.
    TrainStyle(TrainStyleArgs),
    /// Train the mapping network and curve encoder; writes the model bundle.
    TrainEnhancer(TrainEnhancerArgs),
    /// Turn a gallery of images into a style latent.
    Embed(EmbedArgs),
    /// Move an image from one style to another.
    Enhance(EnhanceArgs),
    /// Time the lookup-table renderer.
    Bench(BenchArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model bundle (style encoder, mapping network, curve encoder).
    #[arg(long, env = MODEL_ENV)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Built-in style set: two, four or five.
    #[arg(long, default_value = "four", conflicts_with = "styles_file")]
    pub preset: String,
    /// JSON file `{"styles": [{"id": .., "spec": {..}}]}` instead of a preset.
    #[arg(long)]
    pub styles_file: Option<PathBuf>,
    /// Number of procedural base images.
    #[arg(long, default_value_t = 200)]
    pub bases: usize,
    /// Side length of every base image.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra base photos (PNG/PNM), resized to `size x size`.
    #[arg(long)]
    pub photos: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Network input size `K`.
    #[arg(long, default_value_t = stylecurve_nn::model::DEFAULT_INPUT_SIZE)]
    pub input_size: usize,
    /// Bases held out at the end of the dataset.
    #[arg(long, default_value_t = 0)]
    pub test: usize,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainStyleArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Style-encoder weights file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct TrainEnhancerArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Trained style-encoder weights.
    #[arg(long)]
    pub style: PathBuf,
    /// Model bundle to write; latents go to `<dir>/styles/`.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of step, lr, loss.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// CSV of the held-out style matrix (needs `--test`).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Latent file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Gallery images of one style.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Source style id, or a latent `.json` file.
    #[arg(long)]
    pub source: String,
    /// Target style id, or a latent `.json` file.
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub model: ModelArg,
    /// Directory of `<id>.json` latents; defaults to `styles/` next to the model.
    #[arg(long)]
    pub styles: Option<PathBuf>,
    /// JSON object of slider values, e.g. `{"r_to_r": 0.5}`.
    #[arg(long)]
    pub sliders: Option<PathBuf>,
    /// Also write the predicted curves (with sliders) as JSON.
    #[arg(long)]
    pub curves_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Frame size as WIDTHxHEIGHT.
    #[arg(long, default_value = "3840x2160", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    /// Render rows on all cores instead of one thread.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: u32,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Directory of `<id>.json` latents; posted styles are saved here too.
    #[arg(long)]
    pub styles: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_ADDR)]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = DEFAULT_SESSION_CAPACITY)]
    pub sessions: usize,
}

/// Parses `WIDTHxHEIGHT`.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
    let h: usize = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

/// Parses `argv` and runs the command; returns the process exit code:
/// 0 on success, 2 on a usage error, 1 on a runtime error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::TrainStyle(a) => train_style(a),
        Command::TrainEnhancer(a) => train_enh(a),
        Command::Embed(a) => embed(a),
        Command::Enhance(a) => enhance_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let styles: Vec<StyleEntry> = match &a.styles_file {
        Some(p) => {
            #[derive(serde::Deserialize)]
            struct File {
                styles: Vec<StyleEntry>,
            }
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<File>(&text)?.styles
        }
        None => preset(&a.preset)?,
    };
    let mut bases = procedural_bases(a.bases, a.size, a.seed)?;
    if let Some(dir) = &a.photos {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.sort();
        for p in paths {
            match load_image(&p) {
                Ok(img) => bases.push(img.resize_bilinear(a.size, a.size)?),
                Err(e) => log::warn!("skipping {}: {e}", p.display()),
            }
        }
    }
    if bases.is_empty() {
        bail!("no base images");
    }
    write_dataset(&a.out, &bases, &styles)?;
    println!(
        "wrote {} bases x {} styles to {}",
        bases.len(),
        styles.len(),
        a.out.display()
    );
    Ok(())
}

fn load_split(
    dir: &Path,
    test: usize,
) -> anyhow::Result<(
    Vec<String>,
    stylecurve_train::StyledSet,
    stylecurve_train::StyledSet,
)> {
    let (entries, data) = load_dataset(dir)
        .with_context(|| format!("loading dataset {} ({STYLES_FILE})", dir.display()))?;
    let ids = entries.into_iter().map(|e| e.id).collect();
    let (train, held) = data.split(test)?;
    Ok((ids, train, held))
}

fn train_style(a: TrainStyleArgs) -> anyhow::Result<()> {
    let (_, train, _) = load_split(&a.data, a.train.test)?;
    let mut model = StyleEncoderConfig::default();
    model.trunk.input_size = a.train.input_size;
    let out = train_style_encoder(&train, model, &a.train.config())?;
    for e in &out.epochs {
        println!(
            "epoch {:>3}  loss {:.5}  recall {:?}",
            e.epoch, e.loss, e.recall
        );
    }
    save_weights(&a.out, &[&out.weights])?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn train_enh(a: TrainEnhancerArgs) -> anyhow::Result<()> {
    let (ids, train, held) = load_split(&a.data, a.train.test)?;
    let style = load_weights(&a.style)?
        .into_iter()
        .find(|w| matches!(w.config(), ModelConfig::StyleEncoder(_)))
        .with_context(|| format!("{} holds no style encoder", a.style.display()))?;
    let pools = (0..train.styles())
        .map(|q| {
            let imgs: Vec<_> = train.images[q].iter().flatten().collect();
            embed_images(&style, &imgs)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut enc = CurveEncoderConfig::default();
    enc.trunk.input_size = a.train.input_size;
    let cfg = a.train.config();
    let trained = train_enhancer(&train, &pools, MappingConfig::default(), enc, &cfg)?;
    if let Some(last) = trained.log.last() {
        println!("{} steps, final loss {:.5}", trained.log.len(), last.loss);
    }
    if trained.skipped > 0 {
        log::warn!("{} sampled pairs were missing and skipped", trained.skipped);
    }
    if let Some(p) = &a.metrics {
        write_metrics_csv(p, &trained.log)?;
    }
    let pipeline = Pipeline::new(style, trained.mapping, trained.encoder)?;
    pipeline.save(&a.out)?;

    let styles_dir = default_styles_dir(&a.out);
    let engine = Engine::new(pipeline);
    let mut latents = Vec::new();
    for (q, id) in ids.iter().enumerate() {
        let latent = stylecurve_core::style::average_latent(
            &pools[q],
            format!("training gallery of {}", pools[q].len()),
        )?;
        save_style(&styles_dir, id, &latent)?;
        latents.push(latent);
    }
    println!(
        "wrote {} and {} latents to {}",
        a.out.display(),
        ids.len(),
        styles_dir.display()
    );

    if a.train.test > 0 {
        let table = style_matrix_eval(engine.pipeline(), &latents, &held)?;
        for (id, row) in ids.iter().zip(&table) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:7.2}")).collect();
            println!("{id:>12} {}", cells.join(" "));
        }
        println!("off-diagonal mean PSNR {:.2} dB", off_diagonal_mean(&table));
        if let Some(p) = &a.matrix {
            write_matrix_csv(p, &ids, &table)?;
        }
    } else if a.matrix.is_some() {
        log::warn!("--matrix needs --test > 0; no matrix written");
    }
    Ok(())
}

/// `styles/` next to the model file.
pub fn default_styles_dir(model: &Path) -> PathBuf {
    model.parent().unwrap_or(Path::new(".")).join("styles")
}

fn embed(a: EmbedArgs) -> anyhow::Result<()> {
    let engine = Engine::load(&a.model.model)?;
    let images = a
        .images
        .iter()
        .map(|p| load_image(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<Image<f32>>>>()?;
    let latent = engine.gallery_latent(&images, &format!("gallery of {}", images.len()))?;
    latent.save(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// A latent `.json` path, or a style id looked up in `dir`.
pub fn resolve_style(dir: &Path, name: &str) -> anyhow::Result<StyleLatent> {
    let as_file = Path::new(name);
    if as_file.extension().and_then(|e| e.to_str()) == Some("json") && as_file.is_file() {
        return Ok(StyleLatent::load(as_file)?);
    }
    crate::engine::check_style_id(name)?;
    let path = dir.join(format!("{name}.json"));
    StyleLatent::load(&path)
        .with_context(|| format!("unknown style {name:?} (looked for {})", path.display()))
}

/// Predicts curves for `image` and applies the optional sliders.
pub fn predict_with_sliders(
    engine: &Engine,
    image: &Image<f32>,
    source: &StyleLatent,
    target: &StyleLatent,
    sliders: Option<&serde_json::Value>,
) -> anyhow::Result<CurveSet> {
    let a = engine.codes(source)?;
    let b = engine.codes(target)?;
    let curves = engine.predict(image, &a, &b)?;
    Ok(match sliders {
        Some(v) => stylecurve_core::enhancer::apply_sliders(&curves, &parse_sliders(v)?)?,
        None => curves,
    })
}

fn enhance_cmd(a: EnhanceArgs) -> anyhow::Result<()> {
    let engine = Engine::load(&a.model.model)
        .with_context(|| format!("loading model {}", a.model.model.display()))?;
    let dir = a
        .styles
        .clone()
        .unwrap_or_else(|| default_styles_dir(&a.model.model));
    let source = resolve_style(&dir, &a.source)?;
    let target = resolve_style(&dir, &a.target)?;
    let image = load_image(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let sliders = match &a.sliders {
        Some(p) => Some(serde_json::from_str::<serde_json::Value>(
            &std::fs::read_to_string(p)?,
        )?),
        None => None,
    };
    let curves = predict_with_sliders(&engine, &image, &source, &target, sliders.as_ref())?;
    let out = render(&image, &curves, engine.depth())?;
    save_image(&out, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.curves_out {
        CurveSetFile::new(curves).save(p)?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Random smooth curves and a random frame for timing.
pub fn bench_inputs(
    width: usize,
    height: usize,
    seed: u64,
) -> anyhow::Result<(Image<f32>, CurveSet)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let layout = KnotLayout::default();
    let u: Vec<f64> = (0..layout.total())
        .map(|_| rng.gen_range(-0.1..0.1))
        .collect();
    let curves = CurveSet::from_flat(&u, &layout)?;
    let n = width * height;
    let data: Vec<f32> = (0..3 * n).map(|_| rng.gen::<f32>()).collect();
    Ok((
        Image::from_planar(width, height, BitDepth::Eight, data)?,
        curves,
    ))
}

/// Mean milliseconds per frame: tables built and image rendered each frame.
pub fn time_render(
    image: &Image<f32>,
    curves: &CurveSet,
    depth: u32,
    frames: usize,
    mode: RenderMode,
) -> anyhow::Result<f64> {
    if frames == 0 {
        bail!("need at least one frame");
    }
    let t = Instant::now();
    for _ in 0..frames {
        let luts = build_lut_set(curves, depth, image.height(), image.width())?;
        std::hint::black_box(enhance_with(image, &luts, false, mode)?);
    }
    Ok(t.elapsed().as_secs_f64() * 1e3 / frames as f64)
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let (w, h) = a.size;
    let (image, curves) = bench_inputs(w, h, 0)?;
    let mode = if a.parallel {
        RenderMode::Parallel
    } else {
        RenderMode::Serial
    };
    // one untimed frame to fault in the buffers
    time_render(&image, &curves, a.depth, 1, mode)?;
    let ms = time_render(&image, &curves, a.depth, a.frames, mode)?;
    println!(
        "{w}x{h} {}: {ms:.2} ms/frame, {:.1} FPS",
        if a.parallel {
            "parallel"
        } else {
            "single-threaded"
        },
        1000.0 / ms
    );
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> anyhow::Result<()> {
    let engine = Arc::new(
        Engine::load(&a.model.model)
            .with_context(|| format!("loading model {}", a.model.model.display()))?,
    );
    let dir = a
        .styles
        .clone()
        .unwrap_or_else(|| default_styles_dir(&a.model.model));
    let registry = if dir.is_dir() {
        StyleRegistry::load_dir(&engine, &dir)?
    } else {
        StyleRegistry::new()
    };
    log::info!(
        "{} styles registered from {}",
        registry.len(),
        dir.display()
    );
    let mut state = AppState::new(engine, registry, SessionStore::new(a.sessions)?);
    state.styles_dir = Some(dir);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(Arc::new(state), a.addr))
}
