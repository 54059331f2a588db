use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use nsdt_core::fields::{ChartPoint, ProbeConfig, ScalarField};
use nsdt_core::geodesics::{detect_closure, null_defect, trace_geodesic, write_csv, Closure, GeodesicState, TracerConfig};
use nsdt_core::metric::{check_sd_system, generate_sd_family, NeutralMetric};
use nsdt_core::spec::{parse_metric_spec, MetricSpec};
use nsdt_core::suite::{run_check_suite, SuiteOptions};
use nsdt_core::tetrad::classify_null_plane;

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "nsdt", version, about = "Checks for neutral self-dual 4-metrics with alpha-surface foliations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full check suite on a metric spec.
    Check {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        report: ReportFormat,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        /// Number of probe points for numeric zero tests.
        #[arg(long, default_value_t = 12)]
        probes: usize,
        #[arg(long, env = "NSDT_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        no_timings: bool,
    },
    /// Write random special-form specs solving the self-duality system.
    Generate {
        #[arg(long, default_value_t = 2)]
        fiber_degree: u32,
        #[arg(long, default_value_t = 1)]
        base_degree: u32,
        #[arg(long, env = "NSDT_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace a geodesic and report whether it closes.
    Trace {
        /// `std-s2xs2` or a spec file.
        #[arg(long, default_value = "std-s2xs2")]
        metric: String,
        /// x0 x1 x2 x3 v0 v1 v2 v3
        #[arg(long, num_args = 8, required = true, allow_negative_numbers = true)]
        init: Vec<f64>,
        #[arg(long, default_value_t = 7000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        step_size: f64,
        #[arg(long, default_value_t = 1e-5)]
        closure_tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
    },
    /// Classify the plane spanned by two tangent vectors at a point.
    Classify {
        #[arg(long, default_value = "std-s2xs2")]
        metric: String,
        #[arg(long, num_args = 4, required = true, allow_negative_numbers = true)]
        point: Vec<f64>,
        #[arg(long, num_args = 4, required = true, allow_negative_numbers = true)]
        v: Vec<f64>,
        #[arg(long, num_args = 4, required = true, allow_negative_numbers = true)]
        w: Vec<f64>,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn check_failure(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn read_spec(path: &Path) -> Result<MetricSpec, Failure> {
    let src = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_metric_spec(&src).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_metric(name: &str) -> Result<NeutralMetric, Failure> {
    if name == "std-s2xs2" {
        return Ok(NeutralMetric::product_sphere());
    }
    read_spec(Path::new(name))?.build().map_err(|e| usage(format!("{name}: {e}")))
}

fn array4(v: &[f64]) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

fn cmd_check(
    spec_path: &Path,
    report: ReportFormat,
    tolerance: f64,
    probes: usize,
    seed: u64,
    no_timings: bool,
) -> Result<u8, Failure> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(usage("--tolerance must be positive"));
    }
    if probes == 0 {
        return Err(usage("--probes must be at least 1"));
    }
    let spec = read_spec(spec_path)?;
    let id = spec.id.clone().unwrap_or_else(|| {
        spec_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });
    let opts = SuiteOptions {
        tolerance,
        probes: ProbeConfig { seed, count: probes, ..ProbeConfig::default() },
        timings: !no_timings,
    };
    let r = run_check_suite(&spec, &id, &opts).map_err(|e| usage(e.to_string()))?;
    match report {
        ReportFormat::Json => println!("{}", r.to_json()),
        ReportFormat::Text => print!("{}", r.to_text()),
    }
    Ok(r.exit_code() as u8)
}

fn cmd_generate(fiber_degree: u32, base_degree: u32, seed: u64, count: usize, out: &Path) -> Result<u8, Failure> {
    let family = generate_sd_family(fiber_degree, base_degree, seed, count).map_err(|e| usage(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    for (i, t) in family.iter().enumerate() {
        let [p, q, r] = [&t.p, &t.q, &t.r].map(|f| ScalarField::from(f.clone()));
        if !check_sd_system(&p, &q, &r).pass {
            return Err(check_failure(format!("member {i} does not solve the self-duality system")));
        }
        let id = format!("sd-f{fiber_degree}-b{base_degree}-s{seed}-{i:03}");
        let spec = MetricSpec { id: Some(id.clone()), ..MetricSpec::special_form(t) };
        let path = out.join(format!("{id}.json"));
        fs::write(&path, spec.to_json_pretty() + "\n").map_err(|e| usage(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_trace(
    metric: &str,
    init: &[f64],
    steps: usize,
    step_size: f64,
    closure_tolerance: f64,
    out: Option<&Path>,
    report: ReportFormat,
) -> Result<u8, Failure> {
    let m = load_metric(metric)?;
    let state = GeodesicState::new(array4(&init[..4]), array4(&init[4..])).map_err(|e| usage(e.to_string()))?;
    let cfg = TracerConfig { step: step_size, steps, closure_tolerance, ..TracerConfig::default() };
    let path = trace_geodesic(&m, &state, &cfg).map_err(|e| check_failure(e.to_string()))?;
    let defect = null_defect(&path, &m).map_err(|e| check_failure(e.to_string()))?;
    let closure = detect_closure(&path, &m, closure_tolerance);
    if let Some(out) = out {
        let file = fs::File::create(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
        let mut w = BufWriter::new(file);
        write_csv(&path, &m, &mut w).map_err(|e| usage(e.to_string()))?;
        w.flush().map_err(|e| usage(e.to_string()))?;
    }
    match report {
        ReportFormat::Json => {
            let v = json!({ "closure": closure, "null_defect": defect, "samples": path.len() });
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
        }
        ReportFormat::Text => {
            match closure {
                Closure::Closed { period, .. } => println!("closed, period ≈ {period:.4}"),
                Closure::Open => println!("open"),
            }
            println!("max null defect {:.3e}", defect.max);
        }
    }
    Ok(0)
}

fn cmd_classify(metric: &str, point: &[f64], v: &[f64], w: &[f64]) -> Result<u8, Failure> {
    let m = load_metric(metric)?;
    let x = ChartPoint::new(array4(point)).map_err(|e| usage(e.to_string()))?;
    let class = classify_null_plane(array4(v), array4(w), &m, &x).map_err(|e| check_failure(e.to_string()))?;
    println!("{}", serde_json::to_string(&json!({ "class": class })).expect("serializable"));
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Check { spec, report, tolerance, probes, seed, no_timings } => {
            cmd_check(&spec, report, tolerance, probes, seed, no_timings)
        }
        Command::Generate { fiber_degree, base_degree, seed, count, out } => {
            cmd_generate(fiber_degree, base_degree, seed, count, &out)
        }
        Command::Trace { metric, init, steps, step_size, closure_tolerance, out, report } => {
            cmd_trace(&metric, &init, steps, step_size, closure_tolerance, out.as_deref(), report)
        }
        Command::Classify { metric, point, v, w } => cmd_classify(&metric, &point, &v, &w),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let _ = writeln!(io::stderr(), "error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
