//! `xbarsim` — run, validate, and compare crossbar binary-network
//! simulations, and generate synthetic workloads.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use xbarsim_cli::error::{CliError, Result};
use xbarsim_cli::format::{decode_inputs_file, encode_inputs_file};
use xbarsim_cli::manifest::{load_network, write_network};
use xbarsim_cli::runner::{
    self, dump_mappings, inputs_to_tensors, Backend, RunConfig,
};
use xbarsim_cli::synth;
use xbarsim_core::mapping::{CrossbarDims, MappingKind};
use xbarsim_core::report::{compare, CostReport, TechConstants};

#[derive(Parser)]
#[command(
    name = "xbarsim",
    about = "Step-accurate crossbar simulator for XNOR+Popcount binary networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a workload end to end and emit predictions plus a cost report.
    Run(RunArgs),
    /// Check simulated dot products against the reference engine.
    Validate(RunArgs),
    /// Normalize cost reports against a baseline design.
    Compare(CompareArgs),
    /// Generate a seeded synthetic workload (manifest, weights, inputs).
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Network manifest (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Packed weights file.
    #[arg(long)]
    weights: PathBuf,
    /// Input set file.
    #[arg(long)]
    inputs: PathBuf,
    /// Weight mapping.
    #[arg(long, value_parser = parse_mapping)]
    mapping: MappingKind,
    /// Crossbar technology.
    #[arg(long, value_parser = parse_backend)]
    backend: Backend,
    /// Crossbar dimensions as MxN (rows x columns).
    #[arg(long, default_value = "32x32", value_parser = parse_crossbar)]
    crossbar: (usize, usize),
    /// ADC model: "ideal" or a resolution in bits.
    #[arg(long, default_value = "ideal")]
    adc: String,
    /// Wavelength capacity K (photonic backend only).
    #[arg(long = "wdm-k", default_value_t = 16)]
    wdm_k: usize,
    /// Technology constants override (JSON).
    #[arg(long)]
    tech: Option<PathBuf>,
    /// Workload seed, echoed into output naming only; inference itself is
    /// deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Report format.
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
}

#[derive(Args)]
struct CompareArgs {
    /// Design label to normalize against.
    #[arg(long)]
    baseline: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    /// Cost report JSON files produced by `run`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Workload family.
    #[arg(long, default_value = "mlp", value_parser = ["mlp", "cnn"])]
    kind: String,
    /// MLP width chain: input, hidden..., classes.
    #[arg(long, default_value = "32,64,64,10", value_delimiter = ',')]
    widths: Vec<usize>,
    /// CNN channel chain: input channels then per-conv output channels.
    #[arg(long, default_value = "1,8,8", value_delimiter = ',')]
    channels: Vec<usize>,
    /// CNN input spatial size as HxW.
    #[arg(long, default_value = "8x8", value_parser = parse_crossbar)]
    image: (usize, usize),
    /// CNN class count.
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Number of input vectors.
    #[arg(long, default_value_t = 16)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Workload name; derived from the parameters when omitted.
    #[arg(long)]
    name: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn parse_mapping(s: &str) -> std::result::Result<MappingKind, String> {
    match s {
        "tacit" => Ok(MappingKind::Tacit),
        "custbinary" => Ok(MappingKind::CustBinary),
        other => Err(format!("unknown mapping '{other}' (tacit|custbinary)")),
    }
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    match s {
        "epcm" => Ok(Backend::Epcm),
        "opcm" => Ok(Backend::Opcm),
        other => Err(format!("unknown backend '{other}' (epcm|opcm)")),
    }
}

fn parse_crossbar(s: &str) -> std::result::Result<(usize, usize), String> {
    let (m, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxN, got '{s}'"))?;
    let rows = m.parse().map_err(|_| format!("bad row count '{m}'"))?;
    let cols = n.parse().map_err(|_| format!("bad column count '{n}'"))?;
    Ok((rows, cols))
}

fn load_tech(path: Option<&Path>) -> Result<TechConstants> {
    match path {
        None => Ok(TechConstants::default()),
        Some(p) => {
            let bytes = fs::read(p).map_err(CliError::io(p))?;
            serde_json::from_slice(&bytes)
                .map_err(|e| CliError::format(p, format!("bad tech constants: {e}")))
        }
    }
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let (rows, cols) = args.crossbar;
    let dims = CrossbarDims::new(rows, cols).map_err(CliError::Sim)?;
    let adc_bits = match args.adc.as_str() {
        "ideal" => None,
        bits => Some(bits.parse::<u32>().map_err(|_| {
            CliError::Config(format!("--adc wants 'ideal' or a bit count, got '{bits}'"))
        })?),
    };
    let config = RunConfig {
        mapping: args.mapping,
        backend: args.backend,
        dims,
        adc_bits,
        wdm_capacity: args.wdm_k,
        tech: load_tech(args.tech.as_deref())?,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Content hash over the three workload files; reports carry it so compare
/// can refuse runs over different data.
fn workload_hash(paths: [&Path; 3]) -> Result<String> {
    let mut hasher = Sha256::new();
    for p in paths {
        hasher.update(fs::read(p).map_err(CliError::io(p))?);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn workload_name(manifest: &Path) -> String {
    manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "workload".into())
}

struct LoadedWorkload {
    net: xbarsim_core::network::BnnNetwork,
    tensors: Vec<xbarsim_core::network::Tensor>,
    name: String,
    hash: String,
}

fn load_workload(args: &RunArgs) -> Result<LoadedWorkload> {
    let net = load_network(&args.network, &args.weights)?;
    let input_bytes = fs::read(&args.inputs).map_err(CliError::io(&args.inputs))?;
    let inputs = decode_inputs_file(&args.inputs, &input_bytes)?;
    let tensors = inputs_to_tensors(&net, &inputs)?;
    Ok(LoadedWorkload {
        tensors,
        name: workload_name(&args.network),
        hash: workload_hash([&args.network, &args.weights, &args.inputs])?,
        net,
    })
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = build_config(args)?;
    let wl = load_workload(args)?;
    let outcome = runner::run(&config, &wl.net, &wl.tensors, &wl.name, &wl.hash)?;

    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let mut predictions = String::new();
    for class in &outcome.sim.predictions {
        predictions.push_str(&format!("{class}\n"));
    }
    write_out(&args.out.join("predictions.txt"), predictions.as_bytes())?;
    let report_path = match args.format.as_str() {
        "csv" => {
            let p = args.out.join("report.csv");
            write_out(&p, outcome.report.to_csv().as_bytes())?;
            p
        }
        _ => {
            let p = args.out.join("report.json");
            write_out(&p, outcome.report.to_json().as_bytes())?;
            p
        }
    };
    println!(
        "{} on {}: {} inputs, {} steps, {:.3e} s, {:.3e} J",
        outcome.report.design,
        outcome.report.workload,
        outcome.sim.predictions.len(),
        outcome.report.total_steps,
        outcome.report.total_time_s,
        outcome.report.total_energy_j
    );
    println!(
        "host: {} full-precision layers, {} MACs (not in step totals)",
        outcome.report.host.full_layers, outcome.report.host.mac_ops
    );
    println!("wrote {} and {}", report_path.display(), args.out.join("predictions.txt").display());
    Ok(())
}

fn cmd_validate(args: &RunArgs) -> Result<()> {
    let config = build_config(args)?;
    let wl = load_workload(args)?;
    let sim = runner::simulate_network(&config, &wl.net, &wl.tensors)?;
    let report = runner::validate_sim(&config, &wl.net, &wl.tensors, &sim)?;

    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let report_json =
        serde_json::to_string_pretty(&report).expect("validation report serializes");
    write_out(&args.out.join("validate.json"), report_json.as_bytes())?;
    let dumps = dump_mappings(&sim, &config);
    let dump_json = serde_json::to_string_pretty(&dumps).expect("mapping dump serializes");
    write_out(&args.out.join("mapping.json"), dump_json.as_bytes())?;

    if report.passed {
        println!(
            "validate {}: pass ({} layers, {} values checked)",
            report.design, report.checked_layers, report.checked_values
        );
        Ok(())
    } else {
        let d = report.divergence.expect("failed reports carry a divergence");
        let mut msg = format!(
            "{}: layer {}, input {}, neuron {}: simulated {} != expected {}",
            report.design, d.layer, d.input_index, d.neuron, d.simulated, d.expected
        );
        if let Some(note) = &d.adc_note {
            msg.push_str(&format!(" ({note})"));
        }
        Err(CliError::Validation(msg))
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let mut reports: Vec<CostReport> = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let bytes = fs::read(path).map_err(CliError::io(path))?;
        reports.push(
            serde_json::from_slice(&bytes)
                .map_err(|e| CliError::format(path, format!("bad cost report: {e}")))?,
        );
    }
    let table = compare(&reports, &args.baseline).map_err(CliError::Sim)?;
    let rendered = match args.format.as_str() {
        "csv" => table.to_csv(),
        _ => {
            let mut s = serde_json::to_string_pretty(&table).expect("table serializes");
            s.push('\n');
            s
        }
    };
    match &args.out {
        Some(path) => {
            write_out(path, rendered.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let net = match args.kind.as_str() {
        "cnn" => synth::gen_cnn(&args.channels, args.image, args.classes, args.seed)?,
        _ => synth::gen_mlp(&args.widths, args.seed)?,
    };
    let name = args.name.clone().unwrap_or_else(|| match args.kind.as_str() {
        "cnn" => format!(
            "cnn-{}-{}x{}-s{}",
            args.channels
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("x"),
            args.image.0,
            args.image.1,
            args.seed
        ),
        _ => format!(
            "mlp-{}-s{}",
            args.widths
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("x"),
            args.seed
        ),
    });
    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let manifest = args.out.join(format!("{name}.json"));
    let weights = args.out.join(format!("{name}.weights"));
    let inputs_path = args.out.join(format!("{name}.inputs"));
    write_network(&net, &manifest, &weights)?;
    let inputs = synth::gen_inputs(&net, args.count, args.seed);
    write_out(&inputs_path, &encode_inputs_file(&inputs))?;
    println!(
        "generated {name}: {} layers, {} inputs",
        net.layers().len(),
        args.count
    );
    println!("  --network {}", manifest.display());
    println!("  --weights {}", weights.display());
    println!("  --inputs {}", inputs_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
