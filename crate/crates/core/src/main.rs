use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use brw_llt::exact_dist::{cf_invert_box, LatticeDist};
use brw_llt::harness::output::{write_header, write_outputs};
use brw_llt::harness::{self, ExperimentConfig};
use brw_llt::llt::ExpansionConstants;
use brw_llt::Error;

#[derive(Parser)]
#[command(
    name = "brwllt",
    version,
    about = "Local limit expansions for random walks and branching random walks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print the derived law constants.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the configured experiment and write its CSV.
    Run {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write the exact n-step distribution of the config's step law.
    DumpDist {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, short)]
        steps: u64,
        /// Use characteristic-function inversion instead of convolution.
        #[arg(long)]
        cf: bool,
        /// Output file (stdout if absent).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the tool version.
    Version,
}

fn validate(config: &Path, overrides: &[String]) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let law = cfg.law()?;
    let off = cfg.offspring_law()?;
    let m = law.moments();
    let c = ExpansionConstants::new(&m, law.class());
    println!("config_hash  {}", cfg.hash());
    println!("experiment   {}", cfg.experiment.tag());
    println!("dimension    {}", law.dim());
    println!("class        {:?} (factor {})", law.class(), law.class().factor());
    println!("gamma2       {:?}", m.gamma2);
    println!("gamma4       {:?}", m.gamma4);
    println!("gamma6       {:?}", m.gamma6);
    println!("tau_d        {}", c.tau_d);
    println!("lambda_d     {:?}", c.lambda_d);
    println!("chi_d        {}", c.chi_d);
    if let Some(off) = off {
        println!("offspring m  {}", off.mean());
    }
    for w in law.warnings() {
        eprintln!("warning: {w}");
    }
    println!("output       {}", cfg.output_path().display());
    Ok(())
}

fn run(config: &Path, overrides: &[String]) -> Result<bool, Error> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    for w in cfg.law()?.warnings() {
        eprintln!("warning: {w}");
    }
    let report = harness::run(&cfg)?;
    for path in write_outputs(&cfg, &report)? {
        println!("wrote {}", path.display());
    }
    for a in &report.assertions {
        println!(
            "{} {} observed={:e} reference={:e}",
            if a.passed { "PASS" } else { "FAIL" },
            a.name,
            a.observed,
            a.reference
        );
    }
    Ok(report.all_passed())
}

fn dump_dist(config: &Path, overrides: &[String], steps: u64, cf: bool, out: Option<&PathBuf>) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let law = cfg.law()?;
    let dist = if cf {
        cf_invert_box(&law, steps)
    } else {
        LatticeDist::after_steps(&law, steps, cfg.element_budget)?
    };
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    write_header(&mut sink, &cfg)?;
    writeln!(sink, "# steps: {steps}")?;
    dist.write_csv(&mut sink)?;
    sink.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config, overrides } => validate(config, overrides).map(|_| true),
        Command::Run { config, overrides } => run(config, overrides),
        Command::DumpDist {
            config,
            overrides,
            steps,
            cf,
            out,
        } => dump_dist(config, overrides, *steps, *cf, out.as_ref()).map(|_| true),
        Command::Version => {
            println!("brwllt {}", brw_llt::VERSION);
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
