mod files;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use vfhe_core::bgv::{keygen, Plaintext};
use vfhe_core::encoding::{encode_bench, EncodingParams};
use vfhe_core::offload::{offload_bench, LimbPolicy};
use vfhe_core::protocol::{self, flip_coefficient, sample_inputs, soundness_experiment, Strategy, Target, VfheOracle};
use vfhe_core::r1cs::{compile, CompileContext, Schedule};
use vfhe_core::ring::derive_rng;
use vfhe_core::workload::{
    compile_workload, demo, report_compare, run_workload, sub_seed, Attack, Mode, ParamSpec, RunOptions, Workload,
};

use files::KeyDir;

const EXIT_REJECTED: u8 = 2;
const EXIT_PARAMS: u8 = 3;

#[derive(Parser)]
#[command(name = "vfhe", version, about = "Verifiable BGV evaluation toolkit")]
struct Cli {
    /// Root seed; every role derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Preset name (desk, paper) or path to a params JSON file.
    #[arg(long, global = true, default_value = "desk")]
    params: String,
    /// Output path (a directory for key and ciphertext verbs, a JSON file otherwise).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Plain BGV keys (sk.bin, pk.bin, rk.bin) into --out.
    Keygen,
    /// Keys and compiled constraint system for a workload into --out.
    Kgen {
        #[arg(long, default_value = "toy")]
        workload: Workload,
    },
    /// Encrypts client inputs (JSON list of coefficient lists; random if omitted).
    Enc {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Evaluates the registered circuit and writes the result with its tag.
    Eval {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        /// Server inputs as a JSON list of signed coefficient lists; random if omitted.
        #[arg(long)]
        server: Option<PathBuf>,
        /// Perturb one output coefficient before tagging.
        #[arg(long)]
        tamper: bool,
    },
    /// Checks a result against its inputs; exits 2 on rejection.
    Verify {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        result: PathBuf,
    },
    /// Decrypts a ciphertext file without any check.
    Dec {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        ct: PathBuf,
    },
    /// Verify-then-decrypt; prints ⊥ and exits 2 on refusal.
    Oracle {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        result: PathBuf,
    },
    /// Runs adversarial servers against the oracle.
    Experiment {
        #[arg(long, default_value = "small")]
        workload: Workload,
        /// A strategy name or "all".
        #[arg(long, default_value = "all")]
        strategy: String,
        #[arg(long, default_value_t = 100)]
        trials: u64,
    },
    /// Runs, compiles and compares the toy, small and medium workloads.
    #[command(subcommand)]
    Workload(WorkloadCmd),
    /// Attack transcript against an unchecked decryptor and against the oracle.
    Demo { attack: Attack },
    /// Outsourced tensoring with a randomized check.
    Offload {
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, value_enum, default_value_t = TamperArg::None)]
        tamper: TamperArg,
        #[arg(long, value_enum, default_value_t = PolicyArg::First)]
        limbs: PolicyArg,
    },
    /// Encodes, combines and decodes a full budget of ring elements.
    EncodeBench {
        #[arg(long, default_value_t = 8)]
        degree: usize,
        #[arg(long, default_value_t = 17)]
        modulus: u64,
        #[arg(long, default_value_t = 16)]
        budget: usize,
    },
}

#[derive(Subcommand)]
enum WorkloadCmd {
    /// Runs a workload end to end and reports timings, constraints and verdicts.
    Run {
        name: Workload,
        #[arg(long, default_value = "vfhe")]
        mode: Mode,
        #[arg(long)]
        tamper: bool,
        /// Treat rejection as success and acceptance as failure.
        #[arg(long)]
        expect_reject: bool,
    },
    /// Counts constraints without running encryption.
    Compile {
        name: Workload,
        /// Also write the constraint system here (not for count-only presets).
        #[arg(long)]
        r1cs: Option<PathBuf>,
    },
    /// Diffs a report against a reference; exits 1 on any regression.
    Compare {
        report: PathBuf,
        reference: PathBuf,
        /// Allowed timing drift in percent.
        #[arg(long, default_value_t = 25.0)]
        timing_tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TamperArg {
    None,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    First,
    All,
}

struct Ctx {
    seed: u64,
    params: String,
    out: Option<PathBuf>,
    json: bool,
}

impl Ctx {
    fn spec(&self) -> Result<ParamSpec> {
        Ok(ParamSpec::resolve(&self.params)?)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }

    /// JSON to --out and/or stdout; otherwise the human text.
    fn emit(&self, value: &impl Serialize, human: impl FnOnce() -> String) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        if let Some(p) = &self.out {
            files::write(p, format!("{text}\n"))?;
        }
        // A closed stdout (as with `| head`) is not an error worth reporting.
        let mut stdout = std::io::stdout().lock();
        let _ = if self.json { writeln!(stdout, "{text}") } else { write!(stdout, "{}", human()) };
        Ok(())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&files::read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARAMS } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = Ctx { seed: cli.seed, params: cli.params, out: cli.out, json: cli.json };
    match run(&ctx, cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let params = matches!(
                e.downcast_ref::<vfhe_core::Error>(),
                Some(vfhe_core::Error::InvalidParams(_) | vfhe_core::Error::FieldTooSmall(_))
            );
            ExitCode::from(if params { EXIT_PARAMS } else { 1 })
        }
    }
}

fn run(ctx: &Ctx, cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Keygen => {
            let spec = ctx.spec()?;
            let params = spec.bgv()?;
            let dir = ctx.out_dir()?;
            let (sk, pk, rk) = keygen(&params, sub_seed(ctx.seed, "kgen"));
            std::fs::create_dir_all(dir)?;
            files::write(&dir.join("sk.bin"), sk.to_bytes())?;
            files::write(&dir.join("pk.bin"), pk.to_bytes())?;
            files::write(&dir.join("rk.bin"), rk.to_bytes())?;
            println!("wrote keys for {} to {}", spec.name, dir.display());
            Ok(0)
        }
        Cmd::Kgen { workload } => {
            let kd = KeyDir::create(ctx.out_dir()?, workload, ctx.spec()?, ctx.seed)?;
            let stats = kd.keys.verify.stats(Target::Circuit);
            let info = json!({ "workload": workload, "fingerprint": kd.manifest.fingerprint, "constraints": stats });
            println!(
                "{}",
                if ctx.json {
                    serde_json::to_string_pretty(&info)?
                } else {
                    format!("keys for {workload} in {} ({} constraints)", kd.path.display(), stats.constraints_total)
                }
            );
            Ok(0)
        }
        Cmd::Enc { keys, input } => {
            let kd = KeyDir::open(&keys)?;
            let params = kd.keys.eval.params().clone();
            let (n, t) = (params.degree(), params.plain_modulus());
            let circuit = kd.keys.eval.circuit();
            let xs: Vec<Plaintext> = match input {
                Some(p) => read_json::<Vec<Vec<u64>>>(&p)?
                    .into_iter()
                    .map(|c| Ok(Plaintext::new(c, t)?))
                    .collect::<Result<_>>()?,
                None => {
                    let mut rng = derive_rng(ctx.seed, "cli-inputs");
                    sample_inputs(circuit, n, t, &mut rng).0
                }
            };
            if xs.len() != circuit.ct_inputs {
                bail!("circuit takes {} client inputs, got {}", circuit.ct_inputs, xs.len());
            }
            let (cts, tag) = protocol::enc(kd.keys.eval.public_key(), &xs, sub_seed(ctx.seed, "enc"))?;
            files::write_inputs(ctx.out_dir()?, &cts)?;
            kd.record_issued(&tag)?;
            println!("encrypted {} inputs, tag {}", cts.len(), hex::encode(tag.digest()));
            Ok(0)
        }
        Cmd::Eval { keys, inputs, server, tamper } => {
            let kd = KeyDir::open(&keys)?;
            let ek = &kd.keys.eval;
            let tau_x = files::read_inputs(&inputs)?;
            let circuit = ek.circuit();
            let params = ek.params();
            let ws: Vec<Vec<i64>> = match server {
                Some(p) => read_json(&p)?,
                None => {
                    let mut rng = derive_rng(ctx.seed, "cli-inputs");
                    sample_inputs(circuit, params.degree(), params.plain_modulus(), &mut rng).1
                }
            };
            let seed = sub_seed(ctx.seed, "eval");
            let mut trace = circuit.evaluate(ek.public_key(), Some(ek.relin_key()), &tau_x.0, &ws, seed)?;
            if tamper {
                trace.output = flip_coefficient(&trace.output, &mut derive_rng(ctx.seed, "server"))?;
            }
            let tag = protocol::prove(ek, Target::Circuit, &trace)?;
            files::write_result(ctx.out_dir()?, &trace.output, &tag)?;
            println!("wrote result and tag ({} witness values)", tag.witness.len());
            Ok(0)
        }
        Cmd::Verify { keys, inputs, result } => {
            let kd = KeyDir::open(&keys)?;
            let tau_x = files::read_inputs(&inputs)?;
            let (c_y, tau_y) = files::read_result(&result)?;
            let ok = protocol::verify(&kd.keys.verify, &c_y, &tau_x, &tau_y);
            println!("{}", if ctx.json { json!({ "verified": ok }).to_string() } else { format!("verified: {ok}") });
            Ok(if ok { 0 } else { EXIT_REJECTED })
        }
        Cmd::Dec { keys, ct } => {
            let kd = KeyDir::open(&keys)?;
            let c = vfhe_core::bgv::Ciphertext::from_bytes(&files::read(&ct)?)?;
            let m = protocol::dec(kd.keys.verify.secret_key(), &c);
            println!("{}", serde_json::to_string(m.coeffs())?);
            Ok(0)
        }
        Cmd::Oracle { keys, inputs, result } => {
            let kd = KeyDir::open(&keys)?;
            let tau_x = files::read_inputs(&inputs)?;
            let (c_y, tau_y) = files::read_result(&result)?;
            let mut oracle = VfheOracle::with_issued(kd.keys.verify.clone(), kd.issued()?);
            match oracle.oracle_dec(&c_y, &tau_x, &tau_y) {
                Some(m) => {
                    println!("{}", serde_json::to_string(m.coeffs())?);
                    Ok(0)
                }
                None => {
                    println!("⊥");
                    Ok(EXIT_REJECTED)
                }
            }
        }
        Cmd::Experiment { workload, strategy, trials } => {
            let spec = ctx.spec()?;
            let params = spec.bgv()?;
            let circuit = workload.circuit();
            let keys = protocol::kgen(&circuit, &params, &spec.field_params()?, sub_seed(ctx.seed, "kgen"))?;
            let strategies: Vec<Strategy> = if strategy == "all" {
                Strategy::ADVERSARIAL
                    .into_iter()
                    .filter(|s| *s != Strategy::OversizedInput || circuit.pt_inputs > 0)
                    .collect()
            } else {
                vec![Strategy::parse(&strategy).with_context(|| format!("unknown strategy {strategy}"))?]
            };
            let (n, t) = (params.degree(), params.plain_modulus());
            let mut reports = Vec::new();
            for s in strategies {
                let mut sampler = |rng: &mut rand_chacha::ChaCha20Rng| sample_inputs(&circuit, n, t, rng);
                reports.push(soundness_experiment(&keys, s, trials, sub_seed(ctx.seed, s.name()), &mut sampler)?);
            }
            ctx.emit(&reports, || {
                reports
                    .iter()
                    .map(|r| {
                        format!(
                            "{:<16} trials {:>5}  accepted-wrong {:>3}  rejected {:>5}  leaked {:>3}\n",
                            r.strategy.name(),
                            r.trials,
                            r.accepted_wrong,
                            r.rejected,
                            r.leaked_bits
                        )
                    })
                    .collect()
            })?;
            Ok(0)
        }
        Cmd::Workload(WorkloadCmd::Run { name, mode, tamper, expect_reject }) => {
            let report = run_workload(name, &ctx.spec()?, mode, RunOptions { seed: ctx.seed, tamper })?;
            let v = &report.verdicts;
            ctx.emit(&report, || {
                format!(
                    "{name} on {} ({}): verified {:?}, decrypted correctly {:?}, {} constraints\n\
                     setup {:.4}s  prover {:.4}s  verifier {:.4}s\n",
                    report.preset,
                    mode.name(),
                    v.verified,
                    v.decrypted_correct,
                    report.constraints.constraints_total,
                    report.timings.setup,
                    report.timings.prover,
                    report.timings.verifier
                )
            })?;
            let rejected = v.verified == Some(false);
            Ok(if rejected != expect_reject { EXIT_REJECTED } else { 0 })
        }
        Cmd::Workload(WorkloadCmd::Compile { name, r1cs }) => {
            let spec = ctx.spec()?;
            let counts = compile_workload(name, &spec)?;
            if let Some(path) = r1cs {
                if spec.count_only {
                    bail!(vfhe_core::Error::InvalidParams(format!("preset {} is count-only", spec.name)));
                }
                let params = spec.bgv()?;
                let (_, pk, rk) = keygen(&params, sub_seed(ctx.seed, "kgen"));
                let cctx = CompileContext {
                    field: spec.field_params()?,
                    params,
                    pk: Some(pk),
                    rk: Some(rk),
                    schedule: Schedule::Lazy,
                };
                compile(&name.circuit(), &cctx)?.system.export(&path)?;
            }
            let report = json!({
                "workload": name,
                "preset": spec.name,
                "stats": counts.stats,
                "constraints_emitted": counts.constraints_emitted,
                "stream_digest": counts.stream_digest,
            });
            ctx.emit(&report, || {
                format!(
                    "{name} on {}: {} constraints ({} emitted), {} reductions, digest {}\n",
                    spec.name,
                    counts.stats.constraints_total,
                    counts.constraints_emitted,
                    counts.stats.reductions_count,
                    counts.stream_digest
                )
            })?;
            Ok(0)
        }
        Cmd::Workload(WorkloadCmd::Compare { report, reference, timing_tolerance }) => {
            let diff = report_compare(&read_json(&report)?, &read_json(&reference)?, timing_tolerance)?;
            ctx.emit(&diff, || {
                if diff.is_empty() {
                    "no differences\n".into()
                } else {
                    diff.entries.iter().map(|d| format!("{}: {} -> {}\n", d.path, d.reference, d.current)).collect()
                }
            })?;
            Ok(if diff.is_empty() { 0 } else { 1 })
        }
        Cmd::Demo { attack } => {
            let tr = demo(attack, &ctx.spec()?, ctx.seed)?;
            ctx.emit(&tr, || tr.to_string())?;
            Ok(if tr.baseline_broken && tr.vfhe_blocked { 0 } else { 1 })
        }
        Cmd::Offload { k, tamper, limbs } => {
            let params = ctx.spec()?.bgv()?;
            let policy = match limbs {
                PolicyArg::First => LimbPolicy::First,
                PolicyArg::All => LimbPolicy::All,
            };
            let report = offload_bench(k, &params, matches!(tamper, TamperArg::Random), policy, ctx.seed)?;
            ctx.emit(&report, || {
                format!(
                    "k={} N={}: verdict {}, ledger A×R {} R+R {} R×R {}, recompute R×R {} (ratio {}), {:.1} bits\n\
                     untrusted {:.4}s  verify {:.4}s  recompute {:.4}s\n",
                    report.k,
                    report.degree,
                    if report.verdict { "accept" } else { "reject" },
                    report.ledger.a_times_r,
                    report.ledger.r_plus_r,
                    report.ledger.r_times_r,
                    report.recompute_ledger.r_times_r,
                    report.rxr_ratio,
                    report.soundness_bits,
                    report.timings.untrusted,
                    report.timings.verify,
                    report.timings.recompute
                )
            })?;
            Ok(if report.verdict { 0 } else { EXIT_REJECTED })
        }
        Cmd::EncodeBench { degree, modulus, budget } => {
            let params = EncodingParams::new(degree, modulus, budget)?;
            let b = encode_bench(&params, ctx.seed)?;
            ctx.emit(&b, || {
                let e = &b.expansion;
                format!(
                    "budget {} correct {}: encode {:.4}s combine {:.4}s decode {:.4}s\n\
                     expansion analytic {:.3} measured single {:.3} pair {:.3} (gap {}), scalar {:.3}, improvement {}\n",
                    b.k_max,
                    b.correct,
                    b.encode_seconds,
                    b.combine_seconds,
                    b.decode_seconds,
                    e.analytic,
                    e.measured_single,
                    e.measured_pair,
                    e.pair_gap,
                    e.scalar_regev,
                    e.improvement
                )
            })?;
            Ok(if b.correct { 0 } else { 1 })
        }
    }
}
