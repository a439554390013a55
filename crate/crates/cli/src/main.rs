use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cbv_core::bench::{
    self, acceptance, emit_report, seeded_rng, ExperimentReport, ReportFormat, SyntheticUserModel, TrialConfig,
};
use cbv_core::cryptanalysis::{
    count_exact_preimages, count_nearby_preimages, count_nearby_preimages_exact, enumerate_preimages, forge_preimage,
    link_biocodes, recover_key, recover_key_modified, DEFAULT_BUDGET,
};
use cbv_core::{
    authenticate, enroll, key_bind, key_release, Biocode, BitString, Error, FakePolicy, Geometry, Key, PublicParams,
    Release, VaultRecord,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "cbv",
    version,
    about = "Cancelable biometrics vault: binding, release, attacks and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bind a key to a template and write the vault.
    Bind(BindArgs),
    /// Release the key from a vault with a fresh template.
    Release(ReleaseArgs),
    /// Enroll a template and write its biocode.
    Enroll(EnrollArgs),
    /// Compare a template against a biocode.
    Verify(VerifyArgs),
    #[command(subcommand)]
    Attack(AttackCommand),
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct TemplateArgs {
    /// Template as hex, least significant bit of each byte first.
    #[arg(long, conflicts_with = "template")]
    template_hex: Option<String>,
    /// Template as a 0/1 string, first character is bit 1.
    #[arg(long)]
    template: Option<String>,
}

impl TemplateArgs {
    fn read(&self, n: Option<usize>) -> Result<BitString> {
        let x = match (&self.template_hex, &self.template, n) {
            (Some(hex), _, Some(n)) => BitString::from_hex(hex, n)?,
            (Some(_), _, None) => bail!("--template-hex needs --n"),
            (None, Some(bits), _) => bits.parse()?,
            (None, None, _) => bail!("give --template-hex or --template"),
        };
        if let Some(n) = n {
            if x.len() != n {
                bail!("template has {} bits, expected {n}", x.len());
            }
        }
        Ok(x)
    }
}

#[derive(Args)]
struct GeometryArgs {
    /// Template length; defaults to the length of a 0/1 template.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 3)]
    m1: usize,
    #[arg(long, default_value_t = 5)]
    m2: usize,
}

impl GeometryArgs {
    fn geometry(&self, x: &BitString) -> Result<Geometry> {
        Ok(Geometry::new(self.n.unwrap_or(x.len()), self.m1, self.m2)?)
    }
}

#[derive(Args)]
struct BindArgs {
    #[arg(long, requires = "key_bits", conflicts_with = "key")]
    key_hex: Option<String>,
    #[arg(long)]
    key_bits: Option<usize>,
    /// Key as a 0/1 string.
    #[arg(long)]
    key: Option<String>,
    #[command(flatten)]
    template: TemplateArgs,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Release threshold; defaults to a quarter of the expected word count.
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, default_value = "shared-random")]
    fake_policy: FakePolicy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReleaseArgs {
    #[arg(long)]
    vault: PathBuf,
    #[command(flatten)]
    template: TemplateArgs,
    /// Defaults to the threshold stored in the vault.
    #[arg(long)]
    tau: Option<usize>,
}

#[derive(Args)]
struct EnrollArgs {
    #[command(flatten)]
    template: TemplateArgs,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    biocode: PathBuf,
    #[command(flatten)]
    template: TemplateArgs,
    #[arg(long, default_value_t = 0)]
    tau: usize,
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Recover the key bound in a vault.
    Recover {
        #[arg(long)]
        vault: PathBuf,
        /// Use the attack on per-bit fake templates.
        #[arg(long)]
        modified: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decide whether two biocodes come from the same template.
    Link {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Count, forge or list templates accepted by a biocode.
    Preimage {
        #[arg(long)]
        biocode: PathBuf,
        #[arg(long, group = "mode")]
        count: bool,
        #[arg(long, group = "mode")]
        forge: bool,
        #[arg(long, group = "mode")]
        enumerate: bool,
        #[arg(long, default_value_t = 0)]
        tau: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Fmr,
    Rec,
    Link,
    Auth,
}

#[derive(Args)]
struct SizeArgs {
    #[arg(long, default_value_t = 128)]
    l: usize,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    m1: usize,
    #[arg(long, default_value_t = 5)]
    m2: usize,
    /// Defaults to a quarter of the expected word count.
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, default_value = "shared-random")]
    fake_policy: FakePolicy,
}

impl SizeArgs {
    fn params(&self) -> Result<PublicParams> {
        let g = Geometry::new(self.n, self.m1, self.m2)?;
        Ok(match self.tau {
            Some(tau) => PublicParams::new(g, tau)?,
            None => PublicParams::with_default_tau(g),
        })
    }

    fn config(&self, trials: usize) -> Result<TrialConfig> {
        let mut cfg = TrialConfig::new(self.params()?, self.l, self.fake_policy, trials, self.seed);
        cfg.budget = self.budget;
        Ok(cfg)
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Estimate an attack-game success rate.
    Rates {
        #[arg(long, value_enum)]
        which: Which,
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Per-bit flip rate of fresh captures.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = u64::MAX)]
        population: u64,
        /// Linkability pairs share one selector.
        #[arg(long)]
        same_p: bool,
        /// Record wall-clock times (reports are then not reproducible).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Time binding, release and both attacks.
    Timing {
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the acceptance checks and print one line per criterion.
    Acceptance {
        /// Run a single criterion.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=9))]
        criterion: Option<u8>,
    },
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn read_vault(path: &Path) -> Result<VaultRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(VaultRecord::from_json(&text)?)
}

fn read_biocode(path: &Path) -> Result<Biocode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn key_summary(key: &Key) -> serde_json::Value {
    json!({"bits": key.bits().to_string(), "hex": key.bits().to_hex(), "len": key.len()})
}

fn emit(report: &ExperimentReport, output: &OutputArgs) -> Result<()> {
    match &output.out {
        Some(path) => bench::write_report(report, output.format, path)?,
        None => emit_report(report, output.format, io::stdout().lock())?,
    }
    Ok(())
}

fn bind(args: &BindArgs) -> Result<ExitCode> {
    let key = match (&args.key_hex, args.key_bits, &args.key) {
        (Some(hex), Some(bits), _) => Key::from_hex(hex, bits)?,
        (None, _, Some(bits)) => bits.parse()?,
        _ => bail!("give --key-hex with --key-bits, or --key"),
    };
    let x = args.template.read(args.geometry.n)?;
    let g = args.geometry.geometry(&x)?;
    let params = match args.tau {
        Some(tau) => PublicParams::new(g, tau)?,
        None => PublicParams::with_default_tau(g),
    };
    let vault = key_bind(&x, &key, &params, args.fake_policy, &mut seeded_rng(args.seed))?;
    write_out(args.out.as_deref(), &vault.to_json()?)?;
    Ok(ExitCode::SUCCESS)
}

fn release(args: &ReleaseArgs) -> Result<ExitCode> {
    let vault = read_vault(&args.vault)?;
    let x = args.template.read(Some(vault.params.n()))?;
    let tau = args.tau.unwrap_or(vault.params.tau);
    match key_release(&x, &vault, tau)? {
        Release::Released(key) => {
            write_out(None, &json!({"released": true, "key": key_summary(&key)}).to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Release::Rejected { winnowed } => {
            write_out(
                None,
                &json!({"released": false, "winnowed": winnowed.to_string()}).to_string(),
            )?;
            Ok(ExitCode::from(1))
        }
    }
}

fn attack(cmd: &AttackCommand) -> Result<ExitCode> {
    match cmd {
        AttackCommand::Recover {
            vault,
            modified,
            budget,
            report,
        } => {
            let vault = read_vault(vault)?;
            let view = vault.public_view();
            let attempt = if *modified {
                recover_key_modified(&view, *budget)
            } else {
                recover_key(&view, *budget)
            };
            let (body, code) = match attempt {
                Ok(r) => (serde_json::to_value(&r)?, 0),
                Err(Error::BudgetExceeded { tested }) => (
                    json!({"recovered_key": null, "candidates_tested": tested, "error": "budget exceeded"}),
                    2,
                ),
                Err(Error::NoCandidateMatched { tested }) => (
                    json!({"recovered_key": null, "candidates_tested": tested, "error": "no candidate matched"}),
                    3,
                ),
                Err(e) => return Err(e.into()),
            };
            let text = serde_json::to_string_pretty(&body)?;
            if let Some(path) = report {
                write_out(Some(path), &text)?;
            }
            write_out(None, &text)?;
            Ok(ExitCode::from(code))
        }
        AttackCommand::Link { a, b } => {
            let verdict = link_biocodes(&read_biocode(a)?, &read_biocode(b)?)?;
            write_out(None, &serde_json::to_string(&verdict)?)?;
            Ok(ExitCode::SUCCESS)
        }
        AttackCommand::Preimage {
            biocode,
            count,
            forge,
            enumerate,
            tau,
        } => {
            let bc = read_biocode(biocode)?;
            let (n, d2) = (bc.geometry().n, bc.d2());
            let body = if *forge {
                let x = forge_preimage(&bc);
                json!({"template": x.to_string(), "hex": x.to_hex(), "distance": authenticate(&x, &bc, 0)?.1})
            } else if *enumerate {
                let found: Vec<String> = enumerate_preimages(&bc, *tau)?.iter().map(|x| x.to_string()).collect();
                json!({"tau": tau, "count": found.len(), "templates": found})
            } else {
                let _ = count;
                json!({
                    "n": n,
                    "d2": d2,
                    "tau": tau,
                    "exact_preimages": count_exact_preimages(n, d2)?.to_string(),
                    "nearby_summed": count_nearby_preimages(n, d2, *tau)?.to_string(),
                    "nearby_exact": count_nearby_preimages_exact(n, d2, *tau)?.to_string(),
                })
            };
            write_out(None, &serde_json::to_string_pretty(&body)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn bench_cmd(cmd: &BenchCommand) -> Result<ExitCode> {
    match cmd {
        BenchCommand::Rates {
            which,
            size,
            trials,
            noise,
            population,
            same_p,
            timing,
            output,
        } => {
            let params = size.params()?;
            let model = || SyntheticUserModel::new(size.n, *population, *noise, size.seed);
            let report = match which {
                Which::Fmr => bench::estimate_fmr(&model()?, &params, params.tau, *trials)?,
                Which::Rec => {
                    let mut cfg = size.config(*trials)?;
                    cfg.noise_rate = *noise;
                    cfg.timing = *timing;
                    bench::estimate_rate_rec(&cfg)?
                }
                Which::Link => bench::estimate_rate_link(&model()?, &params, *trials, *same_p)?,
                Which::Auth => bench::estimate_rate_auth(&model()?, &params, params.tau, *trials)?,
            };
            emit(&report, output)?;
            Ok(ExitCode::SUCCESS)
        }
        BenchCommand::Timing { size, trials, output } => {
            let mut cfg = size.config(*trials)?;
            cfg.timing = true;
            emit(&bench::run_timing_bench(&cfg)?, output)?;
            Ok(ExitCode::SUCCESS)
        }
        BenchCommand::Acceptance { criterion } => {
            let ids: Vec<usize> = match criterion {
                Some(id) => vec![usize::from(*id)],
                None => (1..=9).collect(),
            };
            let mut all_passed = true;
            for id in ids {
                let result = acceptance::check(id)?;
                all_passed &= result.passed;
                println!("{result}");
            }
            Ok(if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    bench::configure_threads()?;
    match &cli.command {
        Command::Bind(args) => bind(args),
        Command::Release(args) => release(args),
        Command::Enroll(args) => {
            let x = args.template.read(args.geometry.n)?;
            let bc = enroll(&x, &args.geometry.geometry(&x)?, &mut seeded_rng(args.seed))?;
            write_out(args.out.as_deref(), &serde_json::to_string_pretty(&bc)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let bc = read_biocode(&args.biocode)?;
            let x = args.template.read(Some(bc.geometry().n))?;
            let (decision, distance) = authenticate(&x, &bc, args.tau)?;
            write_out(None, &json!({"decision": decision, "distance": distance}).to_string())?;
            Ok(ExitCode::from(if distance <= args.tau { 0 } else { 1 }))
        }
        Command::Attack(cmd) => attack(cmd),
        Command::Bench(cmd) => bench_cmd(cmd),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(64)
        }
    }
}
