use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rfocus_core::harness::{run_experiment, write_outputs, ExperimentName, ExperimentSpec};
use rfocus_core::measurement::write_trace_csv;
use rfocus_core::optimize::{halfplane_opt, run_controller_in, ControllerParams};
use rfocus_core::synth::{gen_geometric, gen_iid, GeometricScene, IidEnvSpec, SPEED_OF_LIGHT};
use rfocus_core::{rssi_ratio_exact, Environment, MeasurementSession, NoiseModel};
use serde_json::json;

/// Reflecting-surface simulator.
///
/// Run an experiment with `rfocus-sim <experiment> --out dir`, or use one of
/// the subcommands below.
#[derive(Parser, Debug)]
#[command(version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment name (linearity, measurability, quadratic, opt_speed,
    /// frequency, pi_bound, two_approx, diffraction).
    experiment: Option<String>,
    /// Experiment spec JSON; defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory; falls back to the spec's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an environment and write it as JSON.
    GenEnv(GenEnvArgs),
    /// Run the RSSI-only controller on an environment file.
    Optimize(OptimizeArgs),
    /// List experiment names.
    List,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["iid", "scene"])))]
struct GenEnvArgs {
    /// i.i.d. complex Gaussian element contributions.
    #[arg(long)]
    iid: bool,
    /// Geometric scene JSON.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    baseline: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scene frequencies in Hz; defaults to the scene wavelength. More than
    /// one writes an array of `{frequency_hz, environment}` objects.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    freq: Vec<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    env: PathBuf,
    /// Per-sample RSSI noise in dB.
    #[arg(long, default_value_t = 0.5)]
    noise_db: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Directory for `report.json` and `trace.csv`.
    #[arg(long)]
    out: PathBuf,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(args: &RunArgs) -> Result<bool> {
    let Some(name) = &args.experiment else {
        bail!("no experiment given; try `rfocus-sim list`");
    };
    let name = ExperimentName::parse(name).with_context(|| format!("unknown experiment `{name}`"))?;
    let mut spec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentSpec::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentSpec::new(name, 0),
    };
    if spec.name != name {
        bail!("spec is for `{}`, not `{}`", spec.name.as_str(), name.as_str());
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if args.trials.is_some() {
        spec.trials = args.trials;
    }
    let out = args
        .out
        .clone()
        .or_else(|| spec.output_dir.clone())
        .context("no output directory: pass --out or set output_dir in the spec")?;

    let report = run_experiment(&spec)?;
    write_outputs(&out, &spec, &report)?;
    for p in &report.properties {
        let tag = match (p.passed, p.asserted) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "NOTE",
        };
        println!("{tag} {}: {}", p.name, p.detail);
    }
    Ok(report.passed())
}

fn gen_env(a: &GenEnvArgs) -> Result<()> {
    let text = if a.iid {
        gen_iid(&IidEnvSpec {
            n_elements: a.n,
            element_sigma: a.sigma,
            baseline_magnitude: a.baseline,
            seed: a.seed,
        })?
        .to_json()?
    } else {
        let path = a.scene.as_ref().expect("clap enforces a source");
        let scene = GeometricScene::from_json(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        if scene.spacing_warning() {
            eprintln!("warning: element spacing exceeds half a wavelength");
        }
        let freqs = if a.freq.is_empty() {
            vec![SPEED_OF_LIGHT / scene.wavelength_m]
        } else {
            a.freq.clone()
        };
        if let [f] = freqs[..] {
            gen_geometric(&scene, f)?.to_json()?
        } else {
            let all = freqs
                .iter()
                .map(|&f| -> Result<_> {
                    let env: serde_json::Value = serde_json::from_str(&gen_geometric(&scene, f)?.to_json()?)?;
                    Ok(json!({ "frequency_hz": f, "environment": env }))
                })
                .collect::<Result<Vec<_>>>()?;
            serde_json::to_string_pretty(&all)?
        }
    };
    write_text(a.out.as_deref(), &(text + "\n"))
}

fn optimize(a: &OptimizeArgs) -> Result<()> {
    let text = fs::read_to_string(&a.env).with_context(|| format!("reading {}", a.env.display()))?;
    let env = Environment::from_json(&text).with_context(|| format!("parsing {}", a.env.display()))?;
    let defaults = ControllerParams::default();
    let params = ControllerParams {
        budget: a.budget.unwrap_or(defaults.budget),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        seed: a.seed,
        ..defaults
    };
    let noise = NoiseModel::gaussian(a.noise_db, a.noise_seed);
    let mut session = MeasurementSession::new(&env, noise)?.with_trace();
    let report = run_controller_in(&mut session, env.n_elements(), &params)?;

    fs::create_dir_all(&a.out)?;
    let optimal = rssi_ratio_exact(&env, &halfplane_opt(&env).0)?;
    let exact = rssi_ratio_exact(&env, &report.best_config)?;
    let mut value: serde_json::Value = serde_json::from_str(&report.to_json()?)?;
    value["exact_ratio"] = json!(exact);
    value["halfplane_ratio"] = json!(optimal);
    fs::write(a.out.join("report.json"), serde_json::to_string_pretty(&value)? + "\n")?;
    let mut w = BufWriter::new(fs::File::create(a.out.join("trace.csv"))?);
    write_trace_csv(session.trace().unwrap_or(&[]), &mut w)?;
    w.flush()?;
    println!(
        "achieved ratio {:.4} (exact {exact:.4}, halfplane {optimal:.4}) after {} measurements",
        report.achieved_ratio, report.total_measurements
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::GenEnv(a)) => gen_env(a).map(|_| true),
        Some(Command::Optimize(a)) => optimize(a).map(|_| true),
        Some(Command::List) => {
            for n in ExperimentName::ALL {
                println!("{}", n.as_str());
            }
            Ok(true)
        }
        None => run(&cli.run),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
