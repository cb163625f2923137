use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{exit, Command, Stdio};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dpcert::bench::{
    check_resolution_trace, emit_drat, emit_resolution_trace, gen_php, gen_random_kcnf,
    rows_to_csv, run_experiment, ExperimentConfig,
};
use dpcert::dp::{choose_order, run_with_deadline, DpError, OrderPolicy, Trace, Verdict};
use dpcert::formula::{parse_dimacs, Formula};
use dpcert::protocol::{
    drive_prover, drive_verifier, run_protocol, Outcome, ProtocolParams, ProverKind,
    VerifierRandomness,
};
use dpcert::wire::StreamTransport;

const EXIT_ACCEPT: i32 = 0;
const EXIT_REJECT: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_TIMEOUT: i32 = 3;

#[derive(Parser)]
#[command(name = "dpcert", version, about = "Decide UNSAT and certify it interactively")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide satisfiability of a DIMACS CNF file.
    Solve(SolveArgs),
    /// Decide and then certify an UNSAT verdict interactively.
    Certify(CertifyArgs),
    /// Measure acceptance rates of adversarial provers.
    Attack(AttackArgs),
    /// Run instance families through solve + certify and emit a CSV.
    Bench(BenchArgs),
    /// Internal: verifier endpoint over stdin/stdout (used by --transport stream).
    #[command(hide = true)]
    Child(ChildArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// DIMACS CNF input file.
    file: PathBuf,
    /// Variable ordering: lexi | random:SEED | greedy | unit.
    #[arg(long, default_value = "greedy")]
    order: String,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Print every intermediate formula.
    #[arg(long)]
    dump_trace: bool,
}

#[derive(Args)]
struct CertifyArgs {
    /// DIMACS CNF input file.
    file: PathBuf,
    #[arg(long, default_value = "greedy")]
    order: String,
    /// Bit length of the protocol prime.
    #[arg(long, default_value_t = 62, value_parser = clap::value_parser!(u32).range(8..=62))]
    prime_bits: u32,
    /// Independent protocol repetitions; all must accept.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repetitions: u32,
    #[arg(long, default_value_t = 1)]
    seed_prover: u64,
    #[arg(long, default_value_t = 2)]
    seed_verifier: u64,
    /// inproc (threads + queues) or stream (verifier subprocess over pipes).
    #[arg(long, default_value = "inproc")]
    transport: String,
    /// Write the message transcript as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Prover behaviour: honest | tamper:ROUND:COEFF:OFFSET | degree:ROUND | flip.
    #[arg(long, default_value = "honest")]
    adversary: String,
    /// Pin the protocol prime instead of sampling it.
    #[arg(long)]
    force_prime: Option<u64>,
}

#[derive(Args)]
struct AttackArgs {
    /// DIMACS CNF input file (must be unsatisfiable).
    file: PathBuf,
    /// honest | tamper:ROUND:COEFF:OFFSET | degree:ROUND | flip.
    #[arg(long)]
    strategy: String,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(8..=62))]
    prime_bits: u32,
    #[arg(long, default_value = "greedy")]
    order: String,
    #[arg(long)]
    force_prime: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Instances: php:P, rand:N:M:K:SEED, or a DIMACS file path.
    #[arg(required = true)]
    instances: Vec<String>,
    /// Comma-separated ordering policies to compare.
    #[arg(long, default_value = "lexi,greedy,unit")]
    orders: String,
    #[arg(long, default_value_t = 62, value_parser = clap::value_parser!(u32).range(8..=62))]
    prime_bits: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repetitions: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Also emit resolution/DRAT proofs and record their sizes.
    #[arg(long)]
    emit_proofs: bool,
    /// Write proofs next to this prefix (<prefix>.<instance>.<policy>.res / .drat).
    #[arg(long)]
    proof_prefix: Option<String>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChildArgs {
    file: PathBuf,
    #[arg(long)]
    seed: u64,
}

fn parse_order(s: &str) -> Result<OrderPolicy> {
    match s {
        "lexi" => Ok(OrderPolicy::Lexi),
        "greedy" => Ok(OrderPolicy::Greedy),
        "unit" => Ok(OrderPolicy::Unit),
        _ => {
            if let Some(seed) = s.strip_prefix("random:") {
                Ok(OrderPolicy::Random(seed.parse().context("bad random seed")?))
            } else if s == "random" {
                Ok(OrderPolicy::Random(0))
            } else {
                bail!("unknown order policy {s:?}")
            }
        }
    }
}

fn parse_adversary(s: &str) -> Result<ProverKind> {
    if s == "honest" {
        return Ok(ProverKind::Honest);
    }
    if s == "flip" {
        return Ok(ProverKind::FlipFinalClaim);
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["tamper", round, coeff, offset] => {
            let coeff: usize = coeff.parse().context("bad coefficient index")?;
            if coeff > 6 {
                bail!("coefficient index must be 0..=6");
            }
            Ok(ProverKind::TamperRound {
                round: round.parse().context("bad round")?,
                coeff,
                offset: offset.parse().context("bad offset")?,
            })
        }
        ["degree", round] => Ok(ProverKind::DegreeViolation {
            round: round.parse().context("bad round")?,
        }),
        _ => bail!("unknown adversary {s:?}"),
    }
}

fn load_formula(path: &Path) -> Result<Formula> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let parsed = parse_dimacs(BufReader::new(file))?;
    if let Some(warning) = parsed.clause_count_warning {
        eprintln!("warning: {warning}");
    }
    Ok(parsed.formula)
}

fn solve_with_timeout(phi: &Formula, policy: OrderPolicy, timeout: u64) -> Result<Trace, DpError> {
    let deadline = Instant::now() + Duration::from_secs(timeout);
    let order = choose_order(phi, policy);
    run_with_deadline(phi, &order, Some(deadline))
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    };
    exit(code);
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Certify(args) => cmd_certify(args),
        Cmd::Attack(args) => cmd_attack(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Child(args) => cmd_child(args),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    let phi = load_formula(&args.file)?.preprocess();
    let policy = parse_order(&args.order)?;
    let trace = match solve_with_timeout(&phi, policy, args.timeout) {
        Ok(t) => t,
        Err(DpError::Timeout) => {
            println!("s TIMEOUT");
            return Ok(EXIT_TIMEOUT);
        }
        Err(e) => return Err(e.into()),
    };
    if args.dump_trace {
        print!("{}", trace.dump());
    }
    println!(
        "c order {:?}  rounds {}",
        trace.order,
        trace.rounds()
    );
    match trace.verdict {
        Verdict::Unsatisfiable => {
            println!("s UNSATISFIABLE");
            Ok(EXIT_ACCEPT)
        }
        Verdict::Satisfiable => {
            println!("s SATISFIABLE");
            Ok(EXIT_REJECT)
        }
    }
}

fn cmd_certify(args: CertifyArgs) -> Result<i32> {
    let phi = load_formula(&args.file)?.preprocess();
    let policy = parse_order(&args.order)?;
    let kind = parse_adversary(&args.adversary)?;
    let trace = match solve_with_timeout(&phi, policy, args.timeout) {
        Ok(t) => t,
        Err(DpError::Timeout) => {
            println!("s TIMEOUT");
            return Ok(EXIT_TIMEOUT);
        }
        Err(e) => return Err(e.into()),
    };
    if trace.verdict == Verdict::Satisfiable {
        println!("s SATISFIABLE");
        println!("r REJECT nothing-to-certify");
        return Ok(EXIT_REJECT);
    }
    let params = ProtocolParams {
        prime_bits: args.prime_bits,
        repetitions: args.repetitions,
        forced_prime: args.force_prime,
        force_start: false,
    };
    match args.transport.as_str() {
        "inproc" => {
            let report = run_protocol(&trace, kind, &params, args.seed_prover, args.seed_verifier)
                .map_err(|e| anyhow!("{e}"))?;
            if let Some(path) = &args.transcript {
                let mut out = BufWriter::new(File::create(path)?);
                for entry in report.transcript.as_deref().unwrap_or(&[]) {
                    writeln!(out, "{}", serde_json::to_string(entry)?)?;
                }
            }
            println!(
                "c rounds {}  p2v_bytes {}  v2p_bytes {}  prover_ms {:.3}  verifier_ms {:.3}",
                report.metrics.rounds,
                report.metrics.p2v_bytes,
                report.metrics.v2p_bytes,
                report.metrics.prover_time.as_secs_f64() * 1e3,
                report.metrics.verifier_time.as_secs_f64() * 1e3,
            );
            match report.outcome {
                Outcome::Accept => {
                    println!("r ACCEPT");
                    Ok(EXIT_ACCEPT)
                }
                Outcome::Reject(reason) => {
                    println!("r REJECT {reason:?}");
                    Ok(EXIT_REJECT)
                }
            }
        }
        "stream" => {
            let exe = std::env::current_exe()?;
            let mut child = Command::new(exe)
                .arg("child")
                .arg(&args.file)
                .arg("--seed")
                .arg(args.seed_verifier.to_string())
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .context("spawning verifier subprocess")?;
            let reader = BufReader::new(child.stdout.take().unwrap());
            let writer = BufWriter::new(child.stdin.take().unwrap());
            let mut transport = StreamTransport::new(reader, writer);
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed_prover);
            let mut outcome = Outcome::Accept;
            for _ in 0..params.repetitions {
                let (o, _) = drive_prover(&trace, &params, kind, &mut rng, &mut transport)
                    .map_err(|e| anyhow!("{e}"))?;
                if let Outcome::Reject(_) = o {
                    outcome = o;
                    break;
                }
            }
            drop(transport);
            let status = child.wait()?;
            if !status.success() {
                bail!("verifier subprocess failed: {status}");
            }
            match outcome {
                Outcome::Accept => {
                    println!("r ACCEPT");
                    Ok(EXIT_ACCEPT)
                }
                Outcome::Reject(reason) => {
                    println!("r REJECT {reason:?}");
                    Ok(EXIT_REJECT)
                }
            }
        }
        other => bail!("unknown transport {other:?}"),
    }
}

fn cmd_attack(args: AttackArgs) -> Result<i32> {
    let phi = load_formula(&args.file)?.preprocess();
    let policy = parse_order(&args.order)?;
    let kind = parse_adversary(&args.strategy)?;
    let trace = solve_with_timeout(&phi, policy, 600).map_err(|e| anyhow!("{e}"))?;
    if trace.verdict == Verdict::Satisfiable {
        bail!("instance is satisfiable; nothing to attack");
    }
    let params = ProtocolParams {
        prime_bits: args.prime_bits,
        repetitions: 1,
        forced_prime: args.force_prime,
        force_start: false,
    };
    let mut accepted = 0u64;
    for trial in 0..args.trials {
        let report = run_protocol(
            &trace,
            kind,
            &params,
            args.seed.wrapping_add(2 * trial),
            args.seed.wrapping_add(2 * trial + 1),
        )
        .map_err(|e| anyhow!("{e}"))?;
        if report.outcome == Outcome::Accept {
            accepted += 1;
        }
    }
    println!(
        "trials {}  accepted {}  rate {:.6}",
        args.trials,
        accepted,
        accepted as f64 / args.trials as f64
    );
    Ok(EXIT_ACCEPT)
}

fn parse_instance(spec: &str) -> Result<(String, Formula)> {
    if let Some(p) = spec.strip_prefix("php:") {
        let p: u32 = p.parse().context("bad pigeonhole size")?;
        return Ok((format!("php({p})"), gen_php(p)));
    }
    if let Some(rest) = spec.strip_prefix("rand:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [n, m, k, seed] = parts.as_slice() else {
            bail!("expected rand:N:M:K:SEED");
        };
        let (n, m, k, seed) = (n.parse()?, m.parse()?, k.parse()?, seed.parse()?);
        return Ok((format!("rand({n},{m},{k},{seed})"), gen_random_kcnf(n, m, k, seed)));
    }
    let path = PathBuf::from(spec);
    let phi = load_formula(&path)?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    Ok((name, phi))
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    let mut instances = Vec::new();
    for spec in &args.instances {
        instances.push(parse_instance(spec)?);
    }
    let mut policies = Vec::new();
    for s in args.orders.split(',') {
        policies.push(parse_order(s.trim())?);
    }
    let cfg = ExperimentConfig {
        policies,
        prime_bits: args.prime_bits,
        repetitions: args.repetitions,
        seed: args.seed,
        timeout: Duration::from_secs(args.timeout),
        emit_proofs: args.emit_proofs || args.proof_prefix.is_some(),
    };
    let rows = run_experiment(&instances, &cfg);
    if let Some(prefix) = &args.proof_prefix {
        for (name, raw) in &instances {
            let phi = raw.preprocess();
            for policy in &cfg.policies {
                let order = choose_order(&phi, *policy);
                let deadline = Instant::now() + cfg.timeout;
                let Ok(trace) = run_with_deadline(&phi, &order, Some(deadline)) else {
                    continue;
                };
                if trace.verdict != Verdict::Unsatisfiable {
                    continue;
                }
                let res = emit_resolution_trace(&trace).map_err(|e| anyhow!("{e}"))?;
                check_resolution_trace(&res, trace.initial()).map_err(|e| anyhow!("{e}"))?;
                let base = format!("{prefix}.{}.{}", name.replace(['(', ')', ','], "_"), policy.name());
                std::fs::write(format!("{base}.res"), &res)?;
                std::fs::write(format!("{base}.drat"), emit_drat(&trace).map_err(|e| anyhow!("{e}"))?)?;
            }
        }
    }
    let csv = rows_to_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(EXIT_ACCEPT)
}

fn cmd_child(args: ChildArgs) -> Result<i32> {
    let phi = load_formula(&args.file)?.preprocess();
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut transport = StreamTransport::new(stdin.lock(), BufWriter::new(stdout.lock()));
    let mut seed = args.seed;
    // serve repeated runs until the prover closes the pipe
    loop {
        let randomness = VerifierRandomness::seeded(seed);
        match drive_verifier(&phi, randomness, &mut transport) {
            Ok(run) => {
                if let Outcome::Reject(_) = run.outcome {
                    return Ok(EXIT_ACCEPT);
                }
            }
            Err(_) => return Ok(EXIT_ACCEPT), // pipe closed
        }
        seed = seed.wrapping_add(1);
    }
}
