//! Command-line frontend for the blur-invariant toolkit.
//!
//! Every subcommand resolves and validates a session configuration before
//! touching any pixels, performs one library operation, and reports on
//! stdout with the configuration embedded: JSON results carry a `config`
//! field, CSV tables repeat the configuration as leading `#` comment
//! lines. With a fixed configuration and seed the output is bit-identical
//! across reruns and thread counts. Failures print a one-line diagnostic
//! on stderr and exit with a stable code: 1 for usage errors, 2 for
//! missing or malformed data, 3 for numerical degeneracies.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use blurinv::{
    add_white_gaussian_noise, classify_nn, convolve_full, fourier_invariant, invariant_distance,
    match_template, moment_invariants, project, psf_disk, psf_gaussian, psf_motion, psf_polygon,
    psf_random_centrosymmetric, read_image, register_shift, register_shift_rotation, smooth_blobs,
    spectrum_distance, write_image, write_spectrum, BlurClass, Error, ErrorKind, Gallery, Image,
    InvariantVector, Psf, RegistrationResult, Result,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = init_threads().and_then(|()| run(cli)) {
        eprintln!("blurinv: {err}");
        std::process::exit(match err.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        });
    }
}

/// Caps the global thread pool when `BLURINV_THREADS` is set; the library
/// produces identical results at any thread count, so this only trades
/// latency for niceness on shared machines.
fn init_threads() -> Result<()> {
    let text = match std::env::var("BLURINV_THREADS") {
        Ok(text) => text,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(err) => return Err(Error::InvalidParam(format!("BLURINV_THREADS: {err}"))),
    };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            Error::InvalidParam(format!("BLURINV_THREADS must be a positive integer, got {text:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|err| Error::InvalidParam(format!("thread pool setup failed: {err}")))
}

#[derive(Parser)]
#[command(
    name = "blurinv",
    version,
    about = "Blur-invariant image description, matching and registration",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point-spread function and write it to a file
    Psf(PsfArgs),
    /// Convolve an image with a kernel and optionally add white noise
    Blur(BlurArgs),
    /// Apply the blur-class projector to an image
    Project(ProjectArgs),
    /// Compute the blur-invariant coefficient vector of an image
    Invariants(InvariantsArgs),
    /// Compute the Fourier-domain invariant spectrum of an image
    Spectrum(SpectrumArgs),
    /// Distance between the invariants of two images
    Dist(DistArgs),
    /// Nearest-neighbour classification against a gallery directory
    Classify(ClassifyArgs),
    /// Locate a template inside a larger scene
    Match(MatchArgs),
    /// Estimate the shift (and optionally rotation) between two views
    Register(RegisterArgs),
    /// Mean relative error of one invariant over a blur-size x SNR grid
    MreSweep(MreSweepArgs),
}

/// Options shared by every subcommand. Unused fields fall back to their
/// defaults and are still recorded in the emitted configuration so that a
/// result file is self-describing.
#[derive(Args, Debug, Clone)]
struct SessionArgs {
    /// Blur class: identity, delta, even1d, centro, nfold:N, radial,
    /// dihedral:N:alpha, directional:beta, gauss
    #[arg(long, default_value = "centro")]
    class: String,
    /// Maximum total moment order
    #[arg(long, default_value_t = 7)]
    r: u32,
    /// Reference length in pixels; moments use coordinates (x/L, y/L)
    #[arg(short = 'L', long = "ref-length", value_name = "L", default_value_t = 8.0)]
    ref_length: f64,
    /// Spectral support threshold relative to the projection's peak
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Fraction of the Nyquist radius kept by spectral comparisons
    #[arg(long, default_value_t = 0.25)]
    lowpass_radius: f64,
    /// Spectrum canvas as WIDTHxHEIGHT; defaults to a padded square
    #[arg(long, value_name = "WxH")]
    canvas: Option<String>,
    /// Seed for every pseudo-random choice (synthesis, noise)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format; defaults to json, and to csv for sweeps
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Json,
    Csv,
}

/// A validated session: the class string parsed, the numeric ranges
/// checked, and the output format resolved. Built before any computation
/// so that configuration mistakes never cost a long run.
struct Session {
    class: BlurClass,
    r: u32,
    ref_length: f64,
    eps: f64,
    lowpass_radius: f64,
    canvas: Option<(usize, usize)>,
    seed: u64,
    format: OutputFormat,
}

impl Session {
    fn new(args: &SessionArgs, default_format: OutputFormat) -> Result<Self> {
        let class = BlurClass::from_str(&args.class)?;
        if !(args.ref_length.is_finite() && args.ref_length > 0.0) {
            return Err(Error::InvalidParam("reference length must be positive".into()));
        }
        if !(args.eps > 0.0 && args.eps < 1.0) {
            return Err(Error::InvalidParam("eps must lie in (0, 1)".into()));
        }
        if !(args.lowpass_radius > 0.0 && args.lowpass_radius <= 1.0) {
            return Err(Error::InvalidParam("lowpass radius must lie in (0, 1]".into()));
        }
        let canvas = args.canvas.as_deref().map(parse_canvas).transpose()?;
        Ok(Session {
            class,
            r: args.r,
            ref_length: args.ref_length,
            eps: args.eps,
            lowpass_radius: args.lowpass_radius,
            canvas,
            seed: args.seed,
            format: args.format.unwrap_or(default_format),
        })
    }

    fn config_json(&self) -> serde_json::Value {
        json!({
            "class": self.class.to_string(),
            "r": self.r,
            "L": self.ref_length,
            "eps": self.eps,
            "lowpass_radius": self.lowpass_radius,
            "canvas": self.canvas.map(|(w, h)| json!([w, h])),
            "seed": self.seed,
            "format": match self.format {
                OutputFormat::Json => "json",
                OutputFormat::Csv => "csv",
            },
        })
    }

    /// The configuration as one `#` comment line for CSV outputs.
    fn config_comment(&self) -> String {
        let canvas = match self.canvas {
            Some((w, h)) => format!("{w}x{h}"),
            None => "-".into(),
        };
        format!(
            "# class={} r={} L={} eps={} lowpass_radius={} canvas={} seed={} format=csv",
            self.class, self.r, self.ref_length, self.eps, self.lowpass_radius, canvas, self.seed,
        )
    }

    /// Prints a single-result payload: a JSON object with the config
    /// embedded, or a one-row CSV table under config comments.
    fn emit(&self, section: &str, payload: serde_json::Value) {
        match self.format {
            OutputFormat::Json => {
                let doc = json!({ "config": self.config_json(), section: payload });
                println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            }
            OutputFormat::Csv => {
                println!("{}", self.config_comment());
                let object = payload.as_object().expect("payload is an object");
                let header: Vec<&str> = object.keys().map(String::as_str).collect();
                println!("{}", header.join(","));
                let row: Vec<String> = object.values().map(csv_cell).collect();
                println!("{}", row.join(","));
            }
        }
    }

    /// Prints a homogeneous list of records: a JSON array, or one CSV row
    /// per record.
    fn emit_table(&self, section: &str, columns: &[&str], rows: &[serde_json::Value]) {
        match self.format {
            OutputFormat::Json => {
                let doc = json!({ "config": self.config_json(), section: rows });
                println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            }
            OutputFormat::Csv => {
                println!("{}", self.config_comment());
                println!("{}", columns.join(","));
                for row in rows {
                    let object = row.as_object().expect("row is an object");
                    let cells: Vec<String> =
                        columns.iter().map(|c| csv_cell(&object[*c])).collect();
                    println!("{}", cells.join(","));
                }
            }
        }
    }

    /// The canvas for spectral work: the explicit request, or the smallest
    /// power-of-two square holding every listed image.
    fn resolve_canvas(&self, images: &[&Image]) -> Result<(usize, usize)> {
        let mut need = 1usize;
        for img in images {
            need = need.max(img.width()).max(img.height());
        }
        let (w, h) = self.canvas.unwrap_or_else(|| {
            let side = need.next_power_of_two();
            (side, side)
        });
        if w < need || h < need {
            for img in images {
                if w < img.width() || h < img.height() {
                    return Err(Error::InvalidParam(format!(
                        "canvas {w}x{h} is smaller than the {}x{} input",
                        img.width(),
                        img.height()
                    )));
                }
            }
        }
        Ok((w, h))
    }
}

fn csv_cell(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(text) => text.clone(),
        serde_json::Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn parse_canvas(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParam(format!("canvas must look like 128x128, got {text:?}"));
    let (ws, hs) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = ws.trim().parse().map_err(|_| bad())?;
    let h: usize = hs.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Psf(args) => cmd_psf(args),
        Command::Blur(args) => cmd_blur(args),
        Command::Project(args) => cmd_project(args),
        Command::Invariants(args) => cmd_invariants(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Dist(args) => cmd_dist(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Match(args) => cmd_match(args),
        Command::Register(args) => cmd_register(args),
        Command::MreSweep(args) => cmd_mre_sweep(args),
    }
}

// --- psf ---------------------------------------------------------------

#[derive(Args)]
struct PsfArgs {
    /// Kernel family
    #[arg(value_enum)]
    kind: PsfKind,
    /// Output path (.pgm clamps to 16 bits; any other extension stores
    /// lossless floats)
    #[arg(short, long, value_name = "PATH")]
    out: PathBuf,
    /// Disk or polygon circumscribed radius in pixels
    #[arg(long)]
    radius: Option<f64>,
    /// Number of polygon vertices
    #[arg(long)]
    vertices: Option<u32>,
    /// Polygon rotation in radians
    #[arg(long, default_value_t = 0.0)]
    rotation: f64,
    /// Gaussian sigma along x in pixels
    #[arg(long, default_value_t = 2.0)]
    sigma_x: f64,
    /// Gaussian sigma along y in pixels
    #[arg(long, default_value_t = 2.0)]
    sigma_y: f64,
    /// Gaussian correlation coefficient in (-1, 1)
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Half-size of the sampling window for gaussian and random kernels
    #[arg(long)]
    half_size: Option<usize>,
    /// Motion streak length in pixels
    #[arg(long)]
    length: Option<f64>,
    /// Motion streak angle in radians
    #[arg(long, default_value_t = 0.0)]
    angle: f64,
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PsfKind {
    /// Uniform disk
    Disk,
    /// Centered regular polygon
    Polygon,
    /// Anisotropic Gaussian
    Gaussian,
    /// Straight motion streak
    Motion,
    /// Random kernel with two-fold symmetry
    RandomCentro,
}

fn require<T: Copy>(value: Option<T>, name: &str, kind: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParam(format!("--{name} is required for a {kind} kernel")))
}

fn cmd_psf(args: PsfArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let psf: Psf = match args.kind {
        PsfKind::Disk => psf_disk(require(args.radius, "radius", "disk")?)?,
        PsfKind::Polygon => psf_polygon(
            require(args.vertices, "vertices", "polygon")?,
            require(args.radius, "radius", "polygon")?,
            args.rotation,
        )?,
        PsfKind::Gaussian => {
            let half = args.half_size.unwrap_or_else(|| {
                (4.0 * args.sigma_x.max(args.sigma_y)).ceil().max(1.0) as usize
            });
            psf_gaussian(args.sigma_x, args.sigma_y, args.rho, half)?
        }
        PsfKind::Motion => psf_motion(require(args.length, "length", "motion")?, args.angle)?,
        PsfKind::RandomCentro => {
            psf_random_centrosymmetric(args.half_size.unwrap_or(4), session.seed)?
        }
    };
    let image = psf.into_image();
    write_image(&args.out, &image)?;
    session.emit(
        "psf",
        json!({
            "kind": format!("{:?}", args.kind).to_lowercase(),
            "width": image.width(),
            "height": image.height(),
            "mass": image.mass(),
            "path": args.out.display().to_string(),
        }),
    );
    Ok(())
}

// --- blur --------------------------------------------------------------

#[derive(Args)]
struct BlurArgs {
    /// Input image (PGM or float container)
    input: PathBuf,
    /// Kernel image to convolve with
    #[arg(long, value_name = "PATH")]
    psf: PathBuf,
    /// Signal-to-noise ratio in dB for added white noise; omit for none
    #[arg(long)]
    snr: Option<f64>,
    /// Output path
    #[arg(short, long, value_name = "PATH")]
    out: PathBuf,
    #[command(flatten)]
    session: SessionArgs,
}

fn cmd_blur(args: BlurArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let scene = read_image(&args.input)?;
    let kernel = read_image(&args.psf)?;
    let mut out = convolve_full(&scene, &kernel)?;
    if let Some(snr) = args.snr {
        out = add_white_gaussian_noise(&out, snr, session.seed)?;
    }
    write_image(&args.out, &out)?;
    session.emit(
        "blur",
        json!({
            "width": out.width(),
            "height": out.height(),
            "snr_db": args.snr,
            "path": args.out.display().to_string(),
        }),
    );
    Ok(())
}

// --- project -----------------------------------------------------------

#[derive(Args)]
struct ProjectArgs {
    /// Input image
    input: PathBuf,
    /// Output path
    #[arg(short, long, value_name = "PATH")]
    out: PathBuf,
    #[command(flatten)]
    session: SessionArgs,
}

fn cmd_project(args: ProjectArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let image = read_image(&args.input)?;
    let projected = project(&image, &session.class)?;
    write_image(&args.out, &projected)?;
    session.emit(
        "project",
        json!({
            "width": projected.width(),
            "height": projected.height(),
            "mass": projected.mass(),
            "path": args.out.display().to_string(),
        }),
    );
    Ok(())
}

// --- invariants ---------------------------------------------------------

#[derive(Args)]
struct InvariantsArgs {
    /// Input image
    input: PathBuf,
    /// Also write the bare vector as a JSON file (the gallery format)
    #[arg(short, long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    session: SessionArgs,
}

fn cmd_invariants(args: InvariantsArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let image = read_image(&args.input)?;
    let vector = moment_invariants(&image, &session.class, session.r, session.ref_length)?;
    let text = vector.to_json();
    if let Some(path) = &args.out {
        std::fs::write(path, &text).map_err(|source| Error::Io { path: path.clone(), source })?;
    }
    match session.format {
        OutputFormat::Json => {
            let parsed: serde_json::Value =
                serde_json::from_str(&text).map_err(|err| Error::Format(err.to_string()))?;
            session.emit("invariants", parsed);
        }
        OutputFormat::Csv => {
            let rows: Vec<serde_json::Value> = vector
                .iter()
                .map(|((p, q), value)| {
                    json!({
                        "p": p,
                        "q": q,
                        "re": value.re,
                        "im": value.im,
                        "trivial": vector.is_trivial((p, q)),
                    })
                })
                .collect();
            session.emit_table("invariants", &["p", "q", "re", "im", "trivial"], &rows);
        }
    }
    Ok(())
}

// --- spectrum -----------------------------------------------------------

#[derive(Args)]
struct SpectrumArgs {
    /// Input image
    input: PathBuf,
    /// Output path for the binary spectrum container
    #[arg(short, long, value_name = "PATH")]
    out: PathBuf,
    #[command(flatten)]
    session: SessionArgs,
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let image = read_image(&args.input)?;
    let canvas = session.resolve_canvas(&[&image])?;
    let spectrum = fourier_invariant(&image, &session.class, canvas, session.eps)?;
    write_spectrum(&args.out, &spectrum)?;
    let valid = spectrum.mask().iter().filter(|m| **m).count();
    session.emit(
        "spectrum",
        json!({
            "width": spectrum.width(),
            "height": spectrum.height(),
            "valid_bins": valid,
            "total_bins": spectrum.width() * spectrum.height(),
            "path": args.out.display().to_string(),
        }),
    );
    Ok(())
}

// --- dist ---------------------------------------------------------------

#[derive(Args)]
struct DistArgs {
    /// First image
    first: PathBuf,
    /// Second image
    second: PathBuf,
    /// Compare masked Fourier quotients instead of moment invariants
    #[arg(long)]
    spectral: bool,
    #[command(flatten)]
    session: SessionArgs,
}

fn cmd_dist(args: DistArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let first = read_image(&args.first)?;
    let second = read_image(&args.second)?;
    let (metric, distance) = if args.spectral {
        let canvas = session.resolve_canvas(&[&first, &second])?;
        let sa = fourier_invariant(&first, &session.class, canvas, session.eps)?;
        let sb = fourier_invariant(&second, &session.class, canvas, session.eps)?;
        ("spectral", spectrum_distance(&sa, &sb, session.lowpass_radius)?)
    } else {
        let va = moment_invariants(&first, &session.class, session.r, session.ref_length)?;
        let vb = moment_invariants(&second, &session.class, session.r, session.ref_length)?;
        ("moment", invariant_distance(&va, &vb)?)
    };
    session.emit("dist", json!({ "metric": metric, "distance": distance }));
    Ok(())
}

// --- classify -----------------------------------------------------------

#[derive(Args)]
struct ClassifyArgs {
    /// Query image
    query: PathBuf,
    /// Gallery directory containing manifest.json and one vector file per
    /// entry, as written by `invariants -o`
    #[arg(long, value_name = "DIR")]
    gallery: PathBuf,
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(Deserialize)]
struct ManifestEntry {
    label: String,
    file: String,
}

fn load_gallery(dir: &Path) -> Result<Gallery> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|source| Error::Io { path: manifest_path.clone(), source })?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|err| Error::Format(format!("{}: {err}", manifest_path.display())))?;
    let mut pairs = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = dir.join(&entry.file);
        let body = std::fs::read_to_string(&path)
            .map_err(|source| Error::Io { path: path.clone(), source })?;
        pairs.push((entry.label, InvariantVector::from_json(&body)?));
    }
    Gallery::new(pairs)
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let gallery = load_gallery(&args.gallery)?;
    let query = read_image(&args.query)?;
    let result = classify_nn(&gallery, &query, &session.class, session.r, session.ref_length)?;
    session.emit(
        "classify",
        json!({
            "label": result.label,
            "distance": result.distance,
            "margin": result.margin,
        }),
    );
    Ok(())
}

// --- match --------------------------------------------------------------

#[derive(Args)]
struct MatchArgs {
    /// Scene image to search
    scene: PathBuf,
    /// Template image to look for
    template: PathBuf,
    /// Coarse grid step in pixels; 1 is exhaustive and is recommended for
    /// scenes with untextured background
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Number of best window positions to report
    #[arg(long, default_value_t = 5)]
    topk: usize,
    #[command(flatten)]
    session: SessionArgs,
}

fn cmd_match(args: MatchArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let scene = read_image(&args.scene)?;
    let template = read_image(&args.template)?;
    let hits = match_template(
        &scene,
        &template,
        &session.class,
        session.r,
        session.ref_length,
        args.stride,
        args.topk,
    )?;
    let rows: Vec<serde_json::Value> = hits
        .iter()
        .map(|hit| {
            json!({
                "rank": hit.rank,
                "x": hit.x,
                "y": hit.y,
                "distance": hit.distance,
            })
        })
        .collect();
    session.emit_table("match", &["rank", "x", "y", "distance"], &rows);
    Ok(())
}

// --- register -----------------------------------------------------------

#[derive(Args)]
struct RegisterArgs {
    /// Reference view
    first: PathBuf,
    /// Moving view; the reported displacement moves the second onto the
    /// first
    second: PathBuf,
    /// Also search for a rotation (radial and n-fold classes only)
    #[arg(long)]
    rotation: bool,
    /// Skip subpixel refinement and report integer estimates
    #[arg(long)]
    coarse: bool,
    #[command(flatten)]
    session: SessionArgs,
}

fn cmd_register(args: RegisterArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Json)?;
    let first = read_image(&args.first)?;
    let second = read_image(&args.second)?;
    let refine = !args.coarse;
    let result: RegistrationResult = if args.rotation {
        register_shift_rotation(
            &first,
            &second,
            &session.class,
            session.eps,
            session.lowpass_radius,
            refine,
        )?
    } else {
        register_shift(&first, &second, &session.class, session.eps, session.lowpass_radius, refine)?
    };
    session.emit(
        "register",
        json!({
            "dx": result.dx,
            "dy": result.dy,
            "theta": result.theta,
            "confidence": result.confidence,
            "reliable": result.reliable,
        }),
    );
    Ok(())
}

// --- mre-sweep ----------------------------------------------------------

#[derive(Args)]
struct MreSweepArgs {
    /// Side of the square synthetic test images
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Number of random test images averaged per grid cell
    #[arg(long, default_value_t = 10)]
    images: usize,
    /// Comma-separated disk blur diameters in pixels
    #[arg(long, value_delimiter = ',', default_value = "3,5,7,9,11,13,15")]
    blurs: Vec<usize>,
    /// Comma-separated SNR levels in dB; `inf` disables the noise
    #[arg(long, value_delimiter = ',', default_value = "inf,50,40,30,20,10")]
    snrs: Vec<f64>,
    /// First index of the tracked coefficient
    #[arg(long, default_value_t = 4)]
    p: u32,
    /// Second index of the tracked coefficient
    #[arg(long, default_value_t = 3)]
    q: u32,
    #[command(flatten)]
    session: SessionArgs,
}

/// Runs the robustness experiment: for each (blur size, SNR) cell, blur
/// every test image with a uniform disk of that diameter, add white noise
/// at that level, and average the relative error of the tracked invariant
/// coefficient against its value on the clean image.
fn cmd_mre_sweep(args: MreSweepArgs) -> Result<()> {
    let session = Session::new(&args.session, OutputFormat::Csv)?;
    if args.size < 8 {
        return Err(Error::InvalidParam("sweep images must be at least 8x8".into()));
    }
    if args.images == 0 {
        return Err(Error::InvalidParam("the sweep needs at least one test image".into()));
    }
    if args.blurs.is_empty() || args.snrs.is_empty() {
        return Err(Error::InvalidParam("the sweep grid must not be empty".into()));
    }
    if args.blurs.iter().any(|b| *b == 0) {
        return Err(Error::InvalidParam("blur diameters must be positive".into()));
    }
    let idx = (args.p, args.q);
    if args.p + args.q > session.r {
        return Err(Error::InvalidParam(format!(
            "coefficient ({}, {}) exceeds the maximum order {}",
            args.p, args.q, session.r
        )));
    }

    // Clean images and their reference coefficients, computed once.
    let mut clean = Vec::with_capacity(args.images);
    for i in 0..args.images {
        let image = smooth_blobs(args.size, args.size, 6, session.seed.wrapping_add(i as u64));
        let vector = moment_invariants(&image, &session.class, session.r, session.ref_length)?;
        if vector.is_trivial(idx) {
            return Err(Error::InvalidParam(format!(
                "coefficient ({}, {}) is trivially fixed for class {}; track an informative one",
                args.p, args.q, session.class
            )));
        }
        let reference = vector.get(idx);
        if reference.norm() == 0.0 {
            return Err(Error::InvalidParam(format!(
                "coefficient ({}, {}) vanishes on test image {i}; its relative error is undefined",
                args.p, args.q
            )));
        }
        clean.push((image, reference));
    }

    let mut rows = Vec::new();
    for (bi, blur) in args.blurs.iter().enumerate() {
        let kernel = psf_disk(*blur as f64 / 2.0)?;
        for (si, snr) in args.snrs.iter().enumerate() {
            let mut total = 0.0;
            for (i, (image, reference)) in clean.iter().enumerate() {
                let blurred = convolve_full(image, kernel.image())?;
                let noise_seed = session
                    .seed
                    .wrapping_add(1 + i as u64)
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add((bi as u64) << 32 | si as u64);
                let degraded = add_white_gaussian_noise(&blurred, *snr, noise_seed)?;
                let vector =
                    moment_invariants(&degraded, &session.class, session.r, session.ref_length)?;
                total += (vector.get(idx) - reference).norm() / reference.norm();
            }
            rows.push(json!({
                "blur_size": blur,
                "snr_db": if snr.is_finite() { json!(snr) } else { json!("inf") },
                "mre": total / args.images as f64,
            }));
        }
    }
    session.emit_table("mre_sweep", &["blur_size", "snr_db", "mre"], &rows);
    Ok(())
}
