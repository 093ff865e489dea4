use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use auxval::circuit_gen::{generate, AuxReuse, GeneratorConfig};
use auxval::circuit_ir::{parse_circuit, serialize_circuit, Circuit};
use auxval::early_abort::simulate_with_abort;
use auxval::estimator::{bias_variance, selection_stats};
use auxval::experiments::{
    calibrate_sweep, decide_batch, emit_report, run_experiment, ExperimentConfig, ReportFormat,
};
use auxval::lightcone::lightcone_set;
use auxval::noise_sim::{sample_batch, NoiseParams, ShotRecord};
use auxval::placement::{instrument, select_placements, PlacementConfig};
use auxval::postselect::{DecisionRecord, PostSelectPolicy, Strategy};

#[derive(Parser)]
#[command(name = "auxval", version, about = "Auxiliary-qubit validation and post-selection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct NoiseArgs {
    /// Per-gate failure probability
    #[arg(long)]
    p: f64,
    /// Per-failed-gate measurement flip probability
    #[arg(long)]
    r: f64,
    /// Readout error probability
    #[arg(long)]
    q: f64,
    /// Logical-output flip probability per failed gate (defaults to r)
    #[arg(long)]
    delta_flip_prob: Option<f64>,
}

impl NoiseArgs {
    fn params(&self) -> Result<NoiseParams, String> {
        let np = NoiseParams {
            p: self.p,
            r: self.r,
            q: self.q,
            delta_flip_prob: self.delta_flip_prob,
        };
        np.validate().map_err(|e| e.to_string())?;
        Ok(np)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic compute/uncompute block circuit
    Generate {
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        #[arg(long, default_value_t = 6)]
        data: usize,
        #[arg(long, default_value_t = 3)]
        aux: usize,
        #[arg(long = "half-gates", default_value_t = 20)]
        half_gates: usize,
        /// Auxiliary allocation: across | fresh
        #[arg(long, default_value = "across")]
        reuse: AuxReuse,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-measurement cone sizes, overlap matrix, and union coverage
    Lightcone {
        #[arg(long)]
        circuit: PathBuf,
    },
    /// Sample shots under the stochastic noise model
    Simulate {
        #[arg(long)]
        circuit: PathBuf,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accept/reject previously sampled shots at a likelihood threshold
    Filter {
        #[arg(long)]
        shots: PathBuf,
        #[arg(long)]
        circuit: PathBuf,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        threshold: f64,
        /// none | final | all
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate selection statistics and bias/variance estimates
    Stats {
        #[arg(long)]
        shots: PathBuf,
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedily choose validation measurement locations
    Place {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long = "overlap-penalty", default_value_t = 0.0)]
        overlap_penalty: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate with prefix-based early abort and report saved execution
    AbortSim {
        #[arg(long)]
        circuit: PathBuf,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        threshold: f64,
        /// final | all
        #[arg(long, default_value = "all")]
        strategy: Strategy,
        #[arg(long)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full strategy/threshold study from a TOML config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output report; .csv emits the flat table, anything else JSON
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep noise grids and report points hitting the target FP/FN window
    Calibrate {
        #[arg(long)]
        circuit: PathBuf,
        /// Comma-separated gate failure probabilities
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Comma-separated flip probabilities (default 0.5)
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        r: Vec<f64>,
        /// Comma-separated readout error probabilities
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[arg(long, default_value_t = 20000)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every grid point, not just the ones meeting the target
        #[arg(long)]
        all: bool,
    },
}

fn load_circuit(path: &PathBuf) -> Result<Circuit, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_circuit(&text).map_err(|e| e.to_string())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<Vec<T>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| format!("{} line {}: {e}", path.display(), i + 1))
        })
        .collect()
}

fn write_jsonl<T: serde::Serialize>(path: &PathBuf, items: &[T]) -> Result<(), String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(|e| e.to_string())?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Generate { blocks, data, aux, half_gates, reuse, seed, out } => {
            let cfg = GeneratorConfig {
                n_blocks: blocks,
                data_qubits: data,
                aux_qubits: aux,
                gates_per_block_half: half_gates,
                aux_reuse: reuse,
                seed,
            };
            let c = generate(&cfg).map_err(|e| e.to_string())?;
            fs::write(&out, serialize_circuit(&c)).map_err(|e| e.to_string())?;
        }
        Command::Lightcone { circuit } => {
            let c = load_circuit(&circuit)?;
            let lcs = lightcone_set(&c).map_err(|e| e.to_string())?;
            let coverage = if c.gates.is_empty() {
                0.0
            } else {
                lcs.union_size as f64 / c.gates.len() as f64
            };
            let doc = json!({
                "measurements": lcs.cones.iter().map(|cone| json!({
                    "id": cone.measurement_id,
                    "qubit": cone.qubit,
                    "size": cone.size(),
                })).collect::<Vec<_>>(),
                "overlap": lcs.overlap,
                "union_size": lcs.union_size,
                "union_coverage": coverage,
            });
            println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?);
        }
        Command::Simulate { circuit, noise, shots, seed, out } => {
            let c = load_circuit(&circuit)?;
            let np = noise.params()?;
            let lcs = lightcone_set(&c).map_err(|e| e.to_string())?;
            let batch = sample_batch(&c, &lcs, &np, shots, seed).map_err(|e| e.to_string())?;
            write_jsonl(&out, &batch)?;
        }
        Command::Filter { shots, circuit, noise, threshold, strategy, out } => {
            let c = load_circuit(&circuit)?;
            let np = noise.params()?;
            let lcs = lightcone_set(&c).map_err(|e| e.to_string())?;
            let policy = PostSelectPolicy::new(threshold, strategy).map_err(|e| e.to_string())?;
            let batch: Vec<ShotRecord> = read_jsonl(&shots)?;
            let decisions = decide_batch(&batch, &lcs, &np, &policy).map_err(|e| e.to_string())?;
            write_jsonl(&out, &decisions)?;
        }
        Command::Stats { shots, decisions, delta, sigma2, out } => {
            let batch: Vec<ShotRecord> = read_jsonl(&shots)?;
            let decs: Vec<DecisionRecord> = read_jsonl(&decisions)?;
            let stats = selection_stats(&batch, &decs).map_err(|e| e.to_string())?;
            let bv = bias_variance(&stats, delta, sigma2).map_err(|e| e.to_string())?;
            let doc = json!({ "selection": stats, "bias_variance": bv });
            fs::write(&out, format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()))
                .map_err(|e| e.to_string())?;
        }
        Command::Place { circuit, budget, overlap_penalty, out } => {
            let c = load_circuit(&circuit)?;
            let cfg = PlacementConfig::new(budget, overlap_penalty);
            let points = select_placements(&c, &cfg).map_err(|e| e.to_string())?;
            let placed = instrument(&c, points);
            fs::write(&out, serialize_circuit(&placed)).map_err(|e| e.to_string())?;
        }
        Command::AbortSim { circuit, noise, threshold, strategy, shots, seed, out } => {
            let c = load_circuit(&circuit)?;
            let np = noise.params()?;
            let lcs = lightcone_set(&c).map_err(|e| e.to_string())?;
            let policy = PostSelectPolicy::new(threshold, strategy).map_err(|e| e.to_string())?;
            let report = simulate_with_abort(&c, &lcs, &np, &policy, shots, seed)
                .map_err(|e| e.to_string())?;
            fs::write(&out, format!("{}\n", serde_json::to_string_pretty(&report).unwrap()))
                .map_err(|e| e.to_string())?;
        }
        Command::Run { config, out, seed } => {
            let text = fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
            let format = if out.extension().is_some_and(|e| e == "csv") {
                ReportFormat::Csv
            } else {
                ReportFormat::Json
            };
            fs::write(&out, emit_report(&report, format)).map_err(|e| e.to_string())?;
        }
        Command::Calibrate { circuit, p, r, q, thresholds, shots, seed, all } => {
            let c = load_circuit(&circuit)?;
            let points = calibrate_sweep(&c, &p, &r, &q, &thresholds, shots, seed)
                .map_err(|e| e.to_string())?;
            let mut hits = 0usize;
            for pt in &points {
                if pt.meets_target || all {
                    println!("{}", serde_json::to_string(pt).map_err(|e| e.to_string())?);
                }
                hits += pt.meets_target as usize;
            }
            eprintln!("{hits}/{} grid points meet the target window", points.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
