use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgiga::enrichment::{Method, MethodVariant};
use sgiga::experiments::{
    default_deltas, define_experiment, fit_records, run_convergence, run_robustness, write_csv,
    write_svgs, ConvergenceRecord, ExperimentKind, Quantity, RunSettings,
};
use sgiga::quadrature::QuadSettings;

#[derive(Parser, Debug)]
#[command(name = "sgiga", version, about = "Unfitted spline methods for elliptic interface problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a convergence or robustness sweep and write CSV.
    Run(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// line | circle | arc | robustness
    #[arg(long)]
    example: ExperimentKind,
    /// Comma-separated method tags.
    #[arg(long, value_delimiter = ',', default_value = "iga,giga-star,sgiga2")]
    methods: Vec<Method>,
    /// Mesh sizes N (N × N elements).
    #[arg(long = "n", value_delimiter = ',', default_value = "5,10,20,40,80")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 10.0)]
    a0: f64,
    #[arg(long, default_value_t = 1.0)]
    a1: f64,
    /// Interface offsets for the robustness sweep ("auto" = 0.05·2^-j, j = 1..20).
    #[arg(long, default_value = "auto")]
    deltas: String,
    /// Quadtree depth inside cut elements.
    #[arg(long, default_value_t = 5)]
    quad_depth: usize,
    /// Gauss points per direction.
    #[arg(long, default_value_t = 3)]
    gauss: usize,
    /// Keep the coarsest mesh in the reported slope fits.
    #[arg(long)]
    include_coarsest: bool,
    /// Stabilize every enriched method with the projection and orthogonalization.
    #[arg(long, conflicts_with = "no_stabilize")]
    stabilize_all: bool,
    /// Disable the default stabilization of GIGA* and SGIGA2.
    #[arg(long)]
    no_stabilize: bool,
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for SVG plots.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Skip the condition-number estimate (the scn column is NaN).
    #[arg(long)]
    no_scn: bool,
    /// Report zero wall times so output is byte-reproducible.
    #[arg(long)]
    deterministic: bool,
}

fn parse_deltas(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().eq_ignore_ascii_case("auto") {
        return Ok(default_deltas());
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad delta '{v}': {e}")))
        .collect()
}

fn report_slopes(records: &[ConvergenceRecord], methods: &[Method], include_coarsest: bool) {
    for &m in methods {
        let mut parts = Vec::new();
        for (q, tag) in [(Quantity::L2, "L2"), (Quantity::H1, "H1"), (Quantity::Scn, "SCN")] {
            match fit_records(records, m, q, include_coarsest) {
                Ok(f) => parts.push(format!("{tag} {:+.3} (R² {:.3})", f.slope, f.r2)),
                Err(_) => parts.push(format!("{tag} n/a")),
            }
        }
        eprintln!("{:<12} slopes vs h: {}", m.tag(), parts.join(", "));
    }
}

fn run(args: RunArgs) -> Result<bool, Box<dyn std::error::Error>> {
    if args.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build_global()?;
    }
    let settings = RunSettings {
        quad: QuadSettings {
            depth: args.quad_depth,
            gauss: args.gauss,
        },
        deterministic: args.deterministic,
        compute_scn: !args.no_scn,
        ..RunSettings::default()
    };
    let variants: Vec<MethodVariant> = args
        .methods
        .iter()
        .map(|&m| {
            let v = MethodVariant::new(m);
            if args.stabilize_all && m != Method::Iga {
                v.with_stabilization(true, true)
            } else if args.no_stabilize {
                v.with_stabilization(false, false)
            } else {
                v
            }
        })
        .collect();
    let (records, name) = if args.example == ExperimentKind::Robustness {
        let deltas = parse_deltas(&args.deltas)?;
        let recs = run_robustness(args.a0, args.a1, &variants, &deltas, &settings)?;
        (recs, format!("robustness_a0_{}", args.a0))
    } else {
        let exp = define_experiment(args.example, args.a0, args.a1)?;
        let recs = run_convergence(&exp, &variants, &args.ns, &settings)?;
        report_slopes(&recs, &args.methods, args.include_coarsest);
        (recs, args.example.tag().to_string())
    };
    match &args.out {
        Some(p) => write_csv(BufWriter::new(File::create(p)?), &records)?,
        None => write_csv(io::stdout().lock(), &records)?,
    }
    if let Some(dir) = &args.svg {
        write_svgs(dir, &name, &records, args.example == ExperimentKind::Robustness)?;
    }
    Ok(records.iter().all(|r| r.ok()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => {
                eprintln!("some cells failed; see the notes column");
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
