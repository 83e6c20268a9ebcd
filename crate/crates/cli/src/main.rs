//! `qbaker` command line: build operators to CMAT files, certify the
//! superposition and cross-construction identities, evolve coherent states
//! with Husimi output, run spectral diagnostics, convergence scans and
//! classical orbits.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qbaker::dynamics::{
    classical_orbit, convergence_scan, semiclassical_run, write_orbit_csv, write_scan_csv,
    PhasePoint, TargetMode,
};
use qbaker::matrix::{load_cmat, save_cmat};
use qbaker::operators::{
    self, bv_baker, generalized_dft, modmult_full, modmult_reduced, tilde_baker, DftSpec,
    ModMultSpec, Sign,
};
use qbaker::spectral::{
    spacing_ratios, spectrum_report, write_degeneracy_csv, write_ratios_csv, write_spectrum_csv,
};
use qbaker::states::{husimi, load_state, save_state, write_husimi_csv};
use qbaker::{Error, Result};

#[derive(Parser)]
#[command(name = "qbaker", version, about = "Quantized A-baker maps and modular multiplication")]
struct Cli {
    /// Worker threads for grids and scans (falls back to QBAKER_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct an operator and write it as a CMAT v1 file.
    Build(BuildArgs),
    /// Certify the superposition and cross-construction identities.
    Verify(VerifyArgs),
    /// Evolve a coherent state by a baker variant; write state, Husimi CSV
    /// and a JSON summary.
    Evolve(EvolveArgs),
    /// Husimi grid of a STATE v1 file.
    Husimi(HusimiArgs),
    /// Eigenphases and degeneracy/spacing diagnostics of a CMAT operator.
    Spectrum(SpectrumArgs),
    /// Semiclassical error versus dimension.
    Scan(ScanArgs),
    /// Classical A-baker orbit.
    Classical(ClassicalArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[command(subcommand)]
    kind: BuildKind,
}

#[derive(Subcommand)]
enum BuildKind {
    /// Generalized DFT matrix F_D^{alpha,beta}.
    Dft {
        #[arg(long = "D")]
        d: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full N x N modular multiplication permutation operator.
    Modmult {
        #[arg(long = "A")]
        a: u64,
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduced Aq x Aq modular multiplication operator.
    ModmultReduced {
        #[arg(long = "A")]
        a: u64,
        #[arg(long)]
        q: u64,
        #[arg(long, value_parser = parse_sign)]
        sign: Sign,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balazs--Voros quantized A-baker map with cyclic shift k.
    BakerBv {
        #[arg(long = "D")]
        d: usize,
        #[arg(long = "A")]
        a: usize,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Block-phase baker variant B~_A^{+-(k)} of a reduced modular
    /// multiplication spec.
    BakerTilde {
        #[arg(long = "A")]
        a: u64,
        #[arg(long)]
        q: u64,
        #[arg(long, value_parser = parse_sign)]
        sign: Sign,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "A")]
    a: u64,
    #[arg(long)]
    q: u64,
    #[arg(long, value_parser = parse_sign)]
    sign: Sign,
    /// Pass tolerance for all reported residuals.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long = "A")]
    a: u64,
    #[arg(long)]
    q: u64,
    #[arg(long, value_parser = parse_sign)]
    sign: Sign,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    x0: f64,
    #[arg(long)]
    p0: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Husimi grid size in x (defaults to D).
    #[arg(long)]
    nx: Option<usize>,
    /// Husimi grid size in p (defaults to D).
    #[arg(long)]
    np: Option<usize>,
    /// Compare against the classical or the O(1/D)-shifted target center.
    #[arg(long, default_value = "classical", value_parser = parse_target)]
    target: TargetMode,
    /// Output prefix: writes <out>.state, <out>.husimi.csv, <out>.json.
    #[arg(long, default_value = "evolve")]
    out: PathBuf,
}

#[derive(Args)]
struct HusimiArgs {
    /// Input STATE v1 file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    np: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Rescale so the maximum value is 1.
    #[arg(long)]
    unit_max: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Input CMAT v1 file (must be unitary).
    #[arg(long = "in")]
    input: PathBuf,
    /// Eigenphase CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Degeneracy-class CSV output.
    #[arg(long)]
    degeneracy: Option<PathBuf>,
    /// Spacing-ratio CSV output.
    #[arg(long)]
    ratios: Option<PathBuf>,
    /// Clustering tolerance for degeneracy classes.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long = "A")]
    a: u64,
    #[arg(long)]
    k: usize,
    #[arg(long, value_parser = parse_sign)]
    sign: Sign,
    #[arg(long)]
    x0: f64,
    #[arg(long)]
    p0: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Comma-separated list of q values.
    #[arg(long, value_delimiter = ',', required = true)]
    qs: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassicalArgs {
    #[arg(long = "A")]
    a: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long)]
    x0: f64,
    #[arg(long)]
    p0: f64,
    #[arg(long)]
    steps: usize,
    /// Orbit CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_sign(s: &str) -> std::result::Result<Sign, String> {
    Sign::from_str(s).map_err(|e| e.to_string())
}

fn parse_target(s: &str) -> std::result::Result<TargetMode, String> {
    match s {
        "classical" => Ok(TargetMode::Classical),
        "shifted" => Ok(TargetMode::Shifted),
        other => Err(format!("target must be 'classical' or 'shifted', got '{other}'")),
    }
}

/// Convention flags in force, embedded in every JSON summary so results are
/// self-describing.
#[derive(Serialize)]
struct Conventions {
    /// Block phase lattice of the baker variants: e^{+-2 pi i j l / A}.
    omega_denominator: &'static str,
    /// Index origin of the reduced basis labels for this sign.
    index_offset: usize,
    /// DFT kernel sign: entries exp(-2 pi i (n+alpha)(m+beta)/D)/sqrt(D).
    dft_kernel: &'static str,
    /// Momentum index m of F_D psi is read as p = m/D.
    momentum_orientation: &'static str,
}

impl Conventions {
    fn for_sign(sign: Sign) -> Self {
        Conventions {
            omega_denominator: "A",
            index_offset: sign.index_offset(),
            dft_kernel: "exp(-2*pi*i*(n+alpha)*(m+beta)/D)/sqrt(D)",
            momentum_orientation: "p=m/D",
        }
    }
}

#[derive(Serialize)]
struct EvolveSummary {
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "A")]
    a: u64,
    q: u64,
    sign: String,
    k: usize,
    x0: f64,
    p0: f64,
    sigma: f64,
    target: &'static str,
    error: f64,
    #[serde(rename = "classicalTarget")]
    classical_target: [f64; 2],
    #[serde(rename = "shiftedTarget")]
    shifted_target: [f64; 2],
    #[serde(rename = "husimiPeak")]
    husimi_peak: [f64; 2],
    #[serde(rename = "goodRegion")]
    good_region: bool,
    conventions: Conventions,
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli
        .threads
        .or_else(|| std::env::var("QBAKER_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        }
    }
    match cli.command {
        Command::Build(args) => build(args),
        Command::Verify(args) => verify(args),
        Command::Evolve(args) => evolve(args),
        Command::Husimi(args) => husimi_cmd(args),
        Command::Spectrum(args) => spectrum(args),
        Command::Scan(args) => scan(args),
        Command::Classical(args) => classical(args),
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let (matrix, out) = match args.kind {
        BuildKind::Dft { d, alpha, beta, out } => {
            (generalized_dft(&DftSpec::new(d, alpha, beta)?), out)
        }
        BuildKind::Modmult { a, n, out } => (modmult_full(a, n)?, out),
        BuildKind::ModmultReduced { a, q, sign, out } => {
            (modmult_reduced(&ModMultSpec::new(a, q, sign)?), out)
        }
        BuildKind::BakerBv { d, a, k, alpha, beta, out } => (bv_baker(d, a, k, alpha, beta)?, out),
        BuildKind::BakerTilde { a, q, sign, k, out } => {
            (tilde_baker(&ModMultSpec::new(a, q, sign)?, k)?, out)
        }
    };
    save_cmat(&matrix, &out)?;
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let spec = ModMultSpec::new(args.a, args.q, args.sign)?;
    let report = operators::verify_spec(&spec)?;
    println!("residual={}", qbaker::matrix::fmt17(report.decomposition));
    println!("unitarity={}", qbaker::matrix::fmt17(report.unitarity_max));
    println!("cross={}", qbaker::matrix::fmt17(report.cross));
    if report.all_below(args.tol) {
        Ok(())
    } else {
        Err(Error::NonUnitary {
            residual: report
                .decomposition
                .max(report.cross)
                .max(report.unitarity_max),
            tol: args.tol,
        })
    }
}

fn evolve(args: EvolveArgs) -> Result<()> {
    let spec = ModMultSpec::new(args.a, args.q, args.sign)?;
    let d = spec.d();
    let z0 = PhasePoint::new(args.x0, args.p0);
    let grid = (args.nx.unwrap_or(d), args.np.unwrap_or(d));
    let (report, evolved) =
        semiclassical_run(&spec, args.k, z0, args.sigma, args.target, Some(grid))?;

    let state_path = args.out.with_extension("state");
    let husimi_path = args.out.with_extension("husimi.csv");
    let json_path = args.out.with_extension("json");

    save_state(&evolved, &state_path)?;
    let hgrid = husimi(&evolved, grid.0, grid.1, args.sigma)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&husimi_path)?);
    write_husimi_csv(&hgrid, &mut w)?;
    w.flush()?;

    let peak = report.husimi_peak.expect("grid requested");
    let summary = EvolveSummary {
        d,
        a: args.a,
        q: args.q,
        sign: args.sign.to_string(),
        k: args.k,
        x0: z0.x,
        p0: z0.p,
        sigma: args.sigma,
        target: match args.target {
            TargetMode::Classical => "classical",
            TargetMode::Shifted => "shifted",
        },
        error: report.error,
        classical_target: [report.classical_target.x, report.classical_target.p],
        shifted_target: [report.shifted_target.x, report.shifted_target.p],
        husimi_peak: [peak.x, peak.p],
        good_region: report.good_region,
        conventions: Conventions::for_sign(args.sign),
    };
    let mut jf = std::io::BufWriter::new(std::fs::File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut jf, &summary)
        .map_err(|e| Error::Parse(format!("JSON serialization: {e}")))?;
    jf.write_all(b"\n")?;
    jf.flush()?;
    println!(
        "D={} error={:.6} husimiPeak=({:.4},{:.4}) goodRegion={}",
        d, report.error, peak.x, peak.p, report.good_region
    );
    Ok(())
}

fn husimi_cmd(args: HusimiArgs) -> Result<()> {
    let psi = load_state(&args.input)?;
    let mut grid = husimi(&psi, args.nx, args.np, args.sigma)?;
    if args.unit_max {
        grid = grid.into_unit_max();
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    write_husimi_csv(&grid, &mut w)?;
    w.flush()?;
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Result<()> {
    let u = load_cmat(&args.input)?;
    let report = spectrum_report(&u, args.tol)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    write_spectrum_csv(&report.phases, &mut w)?;
    w.flush()?;
    if let Some(path) = &args.degeneracy {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_degeneracy_csv(&report.degeneracy_classes, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.ratios {
        let (ratios, mean) = spacing_ratios(&report.phases)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_ratios_csv(&ratios, mean, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn scan(args: ScanArgs) -> Result<()> {
    let rows = convergence_scan(
        args.a,
        args.k,
        args.sign,
        PhasePoint::new(args.x0, args.p0),
        args.sigma,
        &args.qs,
    )?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    write_scan_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn classical(args: ClassicalArgs) -> Result<()> {
    if args.a == 0 {
        return Err(Error::InvalidParameter("A must be >= 1".into()));
    }
    if args.k >= args.a {
        return Err(Error::InvalidParameter(format!(
            "shift k = {} out of range for A = {}",
            args.k, args.a
        )));
    }
    let orbit = classical_orbit(
        args.a,
        &qbaker::operators::BlockPermutation::CyclicShift(args.k),
        PhasePoint::new(args.x0, args.p0),
        args.steps,
    );
    match &args.out {
        Some(path) => {
            let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
            write_orbit_csv(&orbit, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write_orbit_csv(&orbit, &mut w)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
