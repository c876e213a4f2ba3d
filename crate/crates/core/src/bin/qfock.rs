use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qfock::cli::{parse_list, print_summary, run, RunConfig, Suite};
use qfock::export::{write_gram_csv, write_series};
use qfock::op::{build_particle_number, level_spectrum, Side};
use qfock::{DecaySeries, FockError, GramFamily, Result};

#[derive(Parser)]
#[command(
    name = "qfock",
    version,
    about = "Truncated q-deformed Fock space experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured suites and write a manifest.
    Run(Common),
    /// Dump Gram matrices as CSV.
    Gram(Common),
    /// Single commutator-decay experiment.
    Decay(Common),
    /// Dump the spectrum of rho_L per level.
    Spectrum(Common),
    /// Relations suite only.
    Verify(Common),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// One value or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    suites: Option<String>,
    #[arg(long = "k-max")]
    k_max: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(q) = &self.q {
            cfg.set("q_list", q)?;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some(s) = &self.suites {
            cfg.suites = parse_list(s)
                .iter()
                .map(|x| x.parse())
                .collect::<Result<_>>()?;
        }
        if let Some(k) = self.k_max {
            cfg.k_max = k;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run(c) => summarize(&c.config()?),
        Command::Verify(c) => {
            let mut cfg = c.config()?;
            cfg.suites = vec![Suite::Relations];
            summarize(&cfg)
        }
        Command::Gram(c) => {
            let cfg = c.config()?;
            for &q in &cfg.q_list {
                let gram = GramFamily::build(&cfg.context(q)?)?;
                let dir = cfg.output_dir.join(format!("gram_q{q}"));
                for p in write_gram_csv(&dir, &gram)? {
                    println!("{}", p.display());
                }
                for w in gram.warnings() {
                    eprintln!("warning: {w}");
                }
            }
            Ok(true)
        }
        Command::Decay(c) => {
            let cfg = c.config()?;
            for &q in &cfg.q_list {
                let gram = GramFamily::build(&cfg.context(q)?)?;
                let s = qfock::asymptotic::measure_commutator_decay(&gram, 0, 0, cfg.k_max)?;
                let (csv, _) = write_series(&cfg.output_dir, &format!("decay_q{q}"), &s)?;
                print!("{}", s.to_csv());
                println!("fit_rate = {:?}, log|q| = {}", s.fit_rate, q.abs().ln());
                eprintln!("wrote {}", csv.display());
            }
            Ok(true)
        }
        Command::Spectrum(c) => {
            let cfg = c.config()?;
            for &q in &cfg.q_list {
                let gram = GramFamily::build(&cfg.context(q)?)?;
                let rho = build_particle_number(&gram, Side::Left)?;
                let mut s = DecaySeries::new("rho_L_min_eigenvalue", "level");
                println!("q = {q}");
                for k in 0..=cfg.levels {
                    let ev = level_spectrum(&rho, &gram, k)?;
                    let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    println!("  level {k}: min {:.6e} max {:.6e}", ev[0], max);
                    s.push(k, ev[0].max(0.0), (k, k));
                }
                write_series(&cfg.output_dir, &format!("spectrum_q{q}"), &s)?;
            }
            Ok(true)
        }
    }
}

fn summarize(cfg: &RunConfig) -> Result<bool> {
    let manifest = run(cfg)?;
    print!("{}", print_summary(&manifest));
    if manifest.runs.is_empty() {
        return Err(FockError::InvalidParameter("no suites ran".into()));
    }
    Ok(manifest.pass)
}
