use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thermal_nrm::config::{ExperimentConfig, DEFAULT_CONFIG};
use thermal_nrm::excitation::{informativity_check, relevant_columns, spectrum};
use thermal_nrm::experiment::{compare, load_or_simulate, run_baseline, run_mpc, train_models, write_summary};
use thermal_nrm::regressors::Structure;
use thermal_nrm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "thermal-nrm",
    version,
    about = "Zone simulation, identification and MPC experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hysteresis-controlled plant and write dataset.csv.
    Simulate(Common),
    /// Train the zone and radiator models; write error traces and parameters.
    Identify(Common),
    /// Spectra and excitation order of the model's input columns.
    ExciteCheck(Common),
    /// Closed-loop MPC episode plus the hysteresis baseline.
    MpcRun(Common),
    /// Train and run MPC for several structures; write summary.csv.
    Compare(Common),
    /// Print the built-in configuration.
    PrintDefaults,
}

#[derive(Args)]
struct Common {
    /// Configuration file; the built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides sim.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Model structure, e.g. NRM_MI; repeatable.
    #[arg(long = "spec")]
    specs: Vec<Structure>,
    /// Read this dataset instead of simulating.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

struct Context {
    cfg: ExperimentConfig,
    out_dir: PathBuf,
    specs: Vec<Structure>,
}

impl Common {
    fn context(self, default_specs: impl FnOnce(&ExperimentConfig) -> Vec<Structure>) -> Result<Context> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        if self.dataset.is_some() {
            cfg.paths.dataset = self.dataset;
        }
        let out_dir = self
            .out_dir
            .or_else(|| cfg.paths.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io {
            path: out_dir.display().to_string(),
            source,
        })?;
        let specs = if self.specs.is_empty() {
            default_specs(&cfg)
        } else {
            self.specs
        };
        if let Some(s) = specs.iter().find(|s| **s == Structure::NrmFiRh) {
            return Err(Error::Config(format!("{s} is not a zone model")));
        }
        Ok(Context { cfg, out_dir, specs })
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PrintDefaults => {
            print!("{DEFAULT_CONFIG}");
        }
        Command::Simulate(c) => {
            let ctx = c.context(|_| Vec::new())?;
            let ds = thermal_nrm::sim::run_experiment(&ctx.cfg.plant, &ctx.cfg.sim)?;
            ds.write_csv(create(&ctx.out_dir, "dataset.csv")?)?;
            println!(
                "wrote {} samples to {}",
                ds.len(),
                ctx.out_dir.join("dataset.csv").display()
            );
        }
        Command::Identify(c) => {
            let ctx = c.context(|cfg| vec![cfg.model.structure])?;
            let ds = load_or_simulate(&ctx.cfg)?;
            for s in &ctx.specs {
                let m = train_models(&ctx.cfg, &ds, *s)?;
                m.zone.write_csv(create(&ctx.out_dir, &format!("train_{s}.csv"))?)?;
                m.zone
                    .theta
                    .write_text(create(&ctx.out_dir, &format!("theta_{s}.txt"))?)?;
                println!("{s}: final rolling RMSE {:.4} °C", m.zone.final_rmse());
                if s == &ctx.specs[0] {
                    m.rh.write_csv(create(&ctx.out_dir, "train_NRM_FI_RH.csv")?)?;
                    m.rh.theta.write_text(create(&ctx.out_dir, "theta_NRM_FI_RH.txt")?)?;
                    println!("NRM_FI_RH: final rolling RMSE {:.4} °C", m.rh.final_rmse());
                }
            }
        }
        Command::ExciteCheck(c) => {
            let ctx = c.context(|cfg| vec![cfg.model.structure])?;
            let ds = load_or_simulate(&ctx.cfg)?;
            for &s in &ctx.specs {
                let spec = ctx.cfg.spec(s)?;
                for col in relevant_columns(&spec) {
                    let values = ds
                        .column(&col)
                        .ok_or_else(|| Error::Config(format!("no column {col}")))?;
                    spectrum(values)?.write_csv(create(&ctx.out_dir, &format!("spectrum_{col}.csv"))?)?;
                }
                let rep = informativity_check(&ds, &spec)?;
                for c in &rep.columns {
                    println!(
                        "{s} {:<8} lines {:>4} dc {:<5} order {:>4} required {:>2} {}",
                        c.column,
                        c.lines,
                        c.has_dc,
                        c.order,
                        c.required,
                        if c.pass { "pass" } else { "FAIL" }
                    );
                }
                println!("{s}: informative = {}", rep.pass);
            }
        }
        Command::MpcRun(c) => {
            let ctx = c.context(|cfg| vec![cfg.model.structure])?;
            let ds = load_or_simulate(&ctx.cfg)?;
            let base = run_baseline(&ctx.cfg)?;
            base.write_csv(create(&ctx.out_dir, "episode_hysteresis.csv")?)?;
            let (c0, h0, p0) = base.final_costs();
            println!("hysteresis: comfort {c0:.4e} heating {h0:.4e} pump {p0:.4e}");
            for &s in &ctx.specs {
                let m = train_models(&ctx.cfg, &ds, s)?;
                let ep = run_mpc(&ctx.cfg, &m)?;
                ep.write_csv(create(&ctx.out_dir, &format!("episode_{s}.csv"))?)?;
                let (c, h, p) = ep.final_costs();
                println!("{s}: comfort {c:.4e} heating {h:.4e} pump {p:.4e}");
            }
        }
        Command::Compare(c) => {
            let ctx = c.context(|cfg| cfg.model.compare.clone())?;
            let ds = load_or_simulate(&ctx.cfg)?;
            let results = compare(&ctx.cfg, &ds, &ctx.specs)?;
            let mut rows = Vec::new();
            for r in &results {
                let s = r.models.zone.spec.structure;
                r.models
                    .zone
                    .write_csv(create(&ctx.out_dir, &format!("train_{s}.csv"))?)?;
                r.models
                    .zone
                    .theta
                    .write_text(create(&ctx.out_dir, &format!("theta_{s}.txt"))?)?;
                r.episode
                    .write_csv(create(&ctx.out_dir, &format!("episode_{s}.csv"))?)?;
                let row = r.summary_row();
                println!(
                    "{s}: rmse {:.4} comfort {:.4e} heating {:.4e} pump {:.4e}",
                    row.final_rmse, row.comfort, row.heating, row.pump
                );
                rows.push(row);
            }
            write_summary(&rows, create(&ctx.out_dir, "summary.csv")?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
