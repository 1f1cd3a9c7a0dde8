//! `first` — operational surface of the frontrunning-resistance stack.
//!
//! Subcommands: `keygen`, `setup`, `vdf eval|verify|bench`, `sim run`,
//! `analyze grid|recommend`. All randomness flows from `--seed`; a fixed
//! invocation over fixed inputs is byte-identical on stdout and in every
//! artifact it writes (`vdf bench` timing columns excepted, being wall
//! clock measurements).
//!
//! Exit codes: 0 success, 1 domain error (typed reason on stderr),
//! 2 usage error.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use first_core::analytics::{
    self, default_tip_grid, grid_report, ingest_trace, recommend_epoch, IngestMode,
};
use first_core::chainsim::{run_simulation, Chain, SimConfig};
use first_core::protocol::pipeline::Transcript;
use first_core::protocol::{EpochConfig, Federation, FederationConfig};
use first_core::vdf::{self, VdfParams};
use first_core::{aggsig, primes};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "first",
    version,
    about = "Frontrunning-resistant transaction tooling"
)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory artifacts are written to.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Write the protocol message log here (commands that exchange
    /// protocol messages; currently `setup`).
    #[arg(long, global = true)]
    transcript: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate signing keypairs.
    Keygen(KeygenArgs),
    /// Deploy a committee and federate delay-function parameters.
    Setup(SetupArgs),
    /// Delay-function tooling.
    Vdf {
        #[command(subcommand)]
        command: VdfCommand,
    },
    /// Chain simulation.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Historical-trace analytics.
    Analyze {
        #[command(subcommand)]
        command: AnalyzeCommand,
    },
}

#[derive(Args)]
struct KeygenArgs {
    /// Number of keypairs.
    #[arg(long, default_value_t = 1)]
    count: u32,
    /// Output file name.
    #[arg(long, default_value = "keys.json")]
    out: String,
}

#[derive(Args)]
struct SetupArgs {
    /// Committee size (odd, at least 3).
    #[arg(long)]
    verifiers: u32,
    /// Sequential squarings per evaluation.
    #[arg(long)]
    difficulty: u64,
    #[arg(long, default_value_t = 64)]
    security_k: u32,
    /// Freshness window in blocks.
    #[arg(long, default_value_t = 10)]
    freshness: u64,
    /// Recommended tip, percent of base fee.
    #[arg(long, default_value_t = 20.0)]
    tip_pct: f64,
    /// Wall seconds one squaring costs the reference evaluator.
    #[arg(long, default_value_t = 0.001)]
    vdf_seconds_per_step: f64,
    /// Expected pool wait the delay must dominate.
    #[arg(long, default_value_t = 15.0)]
    t2_seconds: f64,
}

#[derive(Subcommand)]
enum VdfCommand {
    /// Evaluate the delay function and produce a proof.
    Eval {
        /// Parameter file from `setup` (pp.json).
        #[arg(long)]
        pp: PathBuf,
        /// Input element, decimal.
        #[arg(long)]
        input: String,
        /// Override the difficulty from the parameter file.
        #[arg(long)]
        difficulty: Option<u64>,
        #[arg(long, default_value = "proof.json")]
        out: String,
    },
    /// Check a proof.
    Verify {
        #[arg(long)]
        pp: PathBuf,
        #[arg(long)]
        proof: PathBuf,
        /// Override the difficulty from the parameter file.
        #[arg(long)]
        difficulty: Option<u64>,
    },
    /// Time eval/verify across a difficulty grid.
    Bench {
        /// Parameter file; omitted, a seeded benchmark modulus is built.
        #[arg(long)]
        pp: Option<PathBuf>,
        /// Comma-separated difficulties.
        #[arg(long, default_value = "16384,32768,65536,131072,262144,524288")]
        t_list: String,
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        #[arg(long, default_value = "bench.csv")]
        out: String,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run one configured scenario.
    Run {
        /// simconfig/1 JSON document.
        #[arg(long)]
        config: PathBuf,
        /// The config's seed is replaced by the global --seed when set.
        #[arg(long, default_value_t = false)]
        override_seed: bool,
        /// Run the full cryptographic pipeline for protected transactions
        /// instead of the modeled-delay fast path (small difficulties only).
        #[arg(long, default_value_t = false)]
        real_vdf: bool,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Exposure probabilities over a (tip, delay) grid.
    Grid {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated tip thresholds in percent (default 0..25 by 2.5).
        #[arg(long)]
        tips: Option<String>,
        #[arg(long, default_value = "0,100,300,500,1000,2000")]
        delays: String,
        /// Abort on the first malformed row instead of skipping.
        #[arg(long, default_value_t = false)]
        strict: bool,
        #[arg(long, default_value = "grid.csv")]
        out: String,
    },
    /// Smallest (delay, tip) meeting a target exposure.
    Recommend {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        target: f64,
        #[arg(long)]
        tips: Option<String>,
        #[arg(long, default_value = "0,100,300,500,1000,2000")]
        delays: String,
        #[arg(long, default_value_t = false)]
        strict: bool,
        #[arg(long, default_value = "recommendation.json")]
        out: String,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating out dir {}", cli.out_dir.display()))?;
    match &cli.command {
        Command::Keygen(args) => keygen(&cli, args),
        Command::Setup(args) => setup(&cli, args),
        Command::Vdf { command } => match command {
            VdfCommand::Eval {
                pp,
                input,
                difficulty,
                out,
            } => vdf_eval(&cli, pp, input, *difficulty, out),
            VdfCommand::Verify {
                pp,
                proof,
                difficulty,
            } => vdf_verify(pp, proof, *difficulty),
            VdfCommand::Bench {
                pp,
                t_list,
                repeats,
                out,
            } => vdf_bench(&cli, pp.as_deref(), t_list, *repeats, out),
        },
        Command::Sim { command } => match command {
            SimCommand::Run {
                config,
                override_seed,
                real_vdf,
            } => sim_run(&cli, config, *override_seed, *real_vdf),
        },
        Command::Analyze { command } => match command {
            AnalyzeCommand::Grid {
                trace,
                tips,
                delays,
                strict,
                out,
            } => analyze_grid(&cli, trace, tips.as_deref(), delays, *strict, out),
            AnalyzeCommand::Recommend {
                trace,
                target,
                tips,
                delays,
                strict,
                out,
            } => analyze_recommend(&cli, trace, *target, tips.as_deref(), delays, *strict, out),
        },
    }
}

fn rng_for(cli: &Cli) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(cli.seed)
}

fn write_artifact(cli: &Cli, name: &str, contents: &str) -> Result<()> {
    let path = cli.out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {name}");
    Ok(())
}

fn write_json<T: Serialize>(cli: &Cli, name: &str, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_artifact(cli, name, &body)
}

fn keygen(cli: &Cli, args: &KeygenArgs) -> Result<()> {
    #[derive(Serialize)]
    struct KeyRecord {
        index: u32,
        secret_be_hex: String,
        public_compressed_hex: String,
    }
    let mut rng = rng_for(cli);
    let keys: Vec<KeyRecord> = (0..args.count)
        .map(|index| {
            let keypair = aggsig::keygen(&mut rng);
            KeyRecord {
                index,
                secret_be_hex: hex::encode(keypair.secret_bytes()),
                public_compressed_hex: hex::encode(keypair.public().to_bytes()),
            }
        })
        .collect();
    write_json(cli, &args.out, &keys)?;
    println!("generated {} keypair(s)", args.count);
    Ok(())
}

fn setup(cli: &Cli, args: &SetupArgs) -> Result<()> {
    let mut rng = rng_for(cli);
    let mut chain = Chain::new(1_000_000_000, 15_000_000);
    let config = FederationConfig {
        verifier_count: args.verifiers,
        security_bits: args.security_k,
        difficulty: args.difficulty,
        vdf_seconds_per_step: args.vdf_seconds_per_step,
        t2_seconds: args.t2_seconds,
        recommended_tip_pct: args.tip_pct,
        freshness_threshold: args.freshness,
    };
    let federation = Federation::bootstrap(&mut chain, &config, &mut rng)?;

    write_json(cli, "pp.json", federation.epoch())?;

    #[derive(Serialize)]
    struct VerifierKeyRecord {
        verifier: u32,
        public_compressed_hex: String,
    }
    let keys: Vec<VerifierKeyRecord> = federation
        .verifier_keys()
        .iter()
        .enumerate()
        .map(|(i, k)| VerifierKeyRecord {
            verifier: i as u32,
            public_compressed_hex: hex::encode(k.to_bytes()),
        })
        .collect();
    write_json(cli, "verifier_keys.json", &keys)?;

    #[derive(Serialize)]
    struct PpSignatureRecord {
        verifier: u32,
        signature_compressed_hex: String,
    }
    let signatures: Vec<PpSignatureRecord> = federation
        .pp_signatures()
        .iter()
        .enumerate()
        .map(|(i, (_, s))| PpSignatureRecord {
            verifier: i as u32,
            signature_compressed_hex: hex::encode(s.to_bytes()),
        })
        .collect();
    write_json(cli, "pp_signatures.json", &signatures)?;

    if let Some(path) = &cli.transcript {
        let mut transcript = Transcript::default();
        for verifier in &federation.verifiers {
            let share = verifier
                .modulus_share()
                .expect("bootstrap populates shares")
                .to_bytes_be();
            transcript.log(
                &verifier.id.to_string(),
                "committee",
                "modulus-share",
                share,
            );
        }
        let pp_bytes = federation.params().canonical_bytes();
        for (verifier, (_, signature)) in
            federation.verifiers.iter().zip(federation.pp_signatures())
        {
            transcript.log(
                &verifier.id.to_string(),
                "committee",
                "pp-signature",
                [pp_bytes.clone(), signature.to_bytes().to_vec()].concat(),
            );
        }
        fs::write(path, transcript.render())
            .with_context(|| format!("writing transcript {}", path.display()))?;
        println!("wrote transcript ({} messages)", transcript.entries.len());
    }

    let epoch = federation.epoch();
    println!(
        "committee of {} ready: epoch {}, difficulty {}, modulus {} bits (odd: {}), t1 {:.3}s > t2 {:.3}s",
        args.verifiers,
        epoch.epoch_id,
        epoch.difficulty,
        epoch.modulus.bits(),
        epoch.modulus.bit(0),
        epoch.t1_seconds,
        epoch.t2_seconds,
    );
    println!(
        "modulus provenance: sum of {} member-contributed primes (federated, no trusted dealer)",
        args.verifiers
    );
    Ok(())
}

fn load_params(pp_path: &Path, difficulty_override: Option<u64>) -> Result<VdfParams> {
    let raw = fs::read_to_string(pp_path)
        .with_context(|| format!("reading parameter file {}", pp_path.display()))?;
    let epoch: EpochConfig = serde_json::from_str(&raw).context("parsing parameter file")?;
    let difficulty = difficulty_override.unwrap_or(epoch.difficulty);
    VdfParams::new(
        epoch.security_bits,
        difficulty as u128,
        epoch.modulus.clone(),
    )
    .map_err(|e| anyhow!("invalid parameters: {e}"))
}

fn vdf_eval(cli: &Cli, pp: &Path, input: &str, difficulty: Option<u64>, out: &str) -> Result<()> {
    let params = load_params(pp, difficulty)?;
    let x = BigUint::parse_bytes(input.as_bytes(), 10)
        .ok_or_else(|| anyhow!("--input must be a decimal integer"))?;
    let proof = vdf::eval(&params, &x)?;
    write_json(cli, out, &proof)?;
    println!(
        "evaluated difficulty {} over a {}-bit modulus",
        params.difficulty(),
        params.modulus().bits()
    );
    Ok(())
}

fn vdf_verify(pp: &Path, proof_path: &Path, difficulty: Option<u64>) -> Result<()> {
    let params = load_params(pp, difficulty)?;
    let raw = fs::read_to_string(proof_path)
        .with_context(|| format!("reading proof {}", proof_path.display()))?;
    let proof: vdf::VdfProof = serde_json::from_str(&raw).context("parsing proof file")?;
    if vdf::verify(&params, &proof) {
        println!("accept");
        Ok(())
    } else {
        bail!("reject: proof does not verify");
    }
}

fn bench_modulus(cli: &Cli) -> BigUint {
    let mut rng = rng_for(cli);
    // Federated-shape benchmark modulus: the sum of three large primes.
    (0..3).map(|_| primes::random_prime(&mut rng, 512)).sum()
}

fn vdf_bench(cli: &Cli, pp: Option<&Path>, t_list: &str, repeats: u32, out: &str) -> Result<()> {
    let params = match pp {
        Some(path) => load_params(path, None)?,
        None => VdfParams::new(64, 1, bench_modulus(cli))
            .map_err(|e| anyhow!("benchmark modulus invalid: {e}"))?,
    };
    let difficulties = parse_list::<u64>(t_list)?;
    if difficulties.is_empty() {
        bail!("--t-list must name at least one difficulty");
    }
    let input = BigUint::from(2u32);
    let points = vdf::bench_grid(&params, &difficulties, &input, repeats);

    let mut csv = String::from("difficulty,eval_seconds,verify_seconds\n");
    for p in &points {
        writeln!(
            csv,
            "{},{:.6},{:.9}",
            p.difficulty, p.eval_seconds, p.verify_seconds
        )?;
    }
    write_artifact(cli, out, &csv)?;

    let xs: Vec<f64> = points.iter().map(|p| p.difficulty as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.eval_seconds).collect();
    if points.len() >= 2 {
        let (slope, _, r2) = vdf::linear_fit(&xs, &ys);
        println!(
            "eval time vs difficulty: {:.3} ns/step, r^2 = {:.6}",
            slope * 1e9,
            r2
        );
    }
    println!("benchmarked {} difficulties", points.len());
    Ok(())
}

fn sim_run(cli: &Cli, config_path: &Path, override_seed: bool, real_vdf: bool) -> Result<()> {
    let raw = fs::read_to_string(config_path)
        .with_context(|| format!("reading sim config {}", config_path.display()))?;
    let mut config: SimConfig = serde_json::from_str(&raw).context("parsing sim config")?;
    if override_seed {
        config.seed = cli.seed;
    }
    if real_vdf {
        config.real_vdf = true;
    }
    let report = run_simulation(&config)?;
    write_artifact(cli, "sim_report.csv", &report.records_csv())?;
    let mut aggregate = report.aggregate_json();
    aggregate.push('\n');
    write_artifact(cli, "sim_report.json", &aggregate)?;
    println!(
        "simulated {} tx over {} blocks: {} victims, frontrun rate {:.6}",
        report.submitted,
        report.blocks.len(),
        report.victim_count,
        report.frontrun_rate
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| anyhow!("bad list entry {s:?}: {e}"))
        })
        .collect()
}

fn load_trace(trace: &Path, strict: bool) -> Result<analytics::IngestReport> {
    let mode = if strict {
        IngestMode::Strict
    } else {
        IngestMode::Lenient
    };
    let report = ingest_trace(trace, mode)?;
    if !report.skipped.is_empty() {
        println!("skipped {} malformed row(s)", report.skipped.len());
        for row in &report.skipped {
            println!("  line {}: {}", row.line, row.reason);
        }
    }
    Ok(report)
}

fn tip_grid(tips: Option<&str>) -> Result<Vec<f64>> {
    match tips {
        Some(raw) => parse_list::<f64>(raw),
        None => Ok(default_tip_grid()),
    }
}

fn analyze_grid(
    cli: &Cli,
    trace: &Path,
    tips: Option<&str>,
    delays: &str,
    strict: bool,
    out: &str,
) -> Result<()> {
    let report = load_trace(trace, strict)?;
    let tips = tip_grid(tips)?;
    let delays = parse_list::<f64>(delays)?;
    let grid = grid_report(&report.records, &tips, &delays)?;
    write_artifact(cli, out, &grid.to_csv())?;
    println!(
        "grid over {} records: {} tips x {} delays",
        report.records.len(),
        tips.len(),
        delays.len()
    );
    Ok(())
}

fn analyze_recommend(
    cli: &Cli,
    trace: &Path,
    target: f64,
    tips: Option<&str>,
    delays: &str,
    strict: bool,
    out: &str,
) -> Result<()> {
    let report = load_trace(trace, strict)?;
    let tips = tip_grid(tips)?;
    let delays = parse_list::<f64>(delays)?;
    let recommendation = recommend_epoch(&report.records, target, &tips, &delays)?;
    write_json(cli, out, &recommendation)?;
    println!(
        "recommend tip {:.1}% with delay {:.0}s: exposure {}/{} = {:.6}",
        recommendation.tip_pct,
        recommendation.vdf_delay_s,
        recommendation.probability.hits,
        recommendation.probability.total,
        recommendation.probability.value()
    );
    Ok(())
}
