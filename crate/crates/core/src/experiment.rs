//! End-to-end pipelines shared by the command-line tool and the tests.

use crate::config::ExperimentConfig;
use crate::dataset::TimeSeriesDataset;
use crate::error::Result;
use crate::identify::{train, TrainReport};
use crate::mpc::{closed_loop_run, Controller, EpisodeReport, Predictor};
use crate::regressors::Structure;
use crate::sim::run_experiment;

/// Zone model and the radiator model it is paired with.
#[derive(Clone, Debug)]
pub struct TrainedModels {
    pub zone: TrainReport,
    pub rh: TrainReport,
}

impl TrainedModels {
    pub fn predictor(&self) -> Result<Predictor> {
        Predictor::new(self.zone.spec, self.zone.theta.clone(), self.rh.theta.clone())
    }
}

/// Reads `paths.dataset` if set, otherwise simulates.
pub fn load_or_simulate(cfg: &ExperimentConfig) -> Result<TimeSeriesDataset> {
    match &cfg.paths.dataset {
        Some(path) => {
            let f = std::fs::File::open(path).map_err(|source| crate::Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            TimeSeriesDataset::read_csv(f)
        }
        None => run_experiment(&cfg.plant, &cfg.sim),
    }
}

pub fn train_models(cfg: &ExperimentConfig, ds: &TimeSeriesDataset, structure: Structure) -> Result<TrainedModels> {
    let zone = train(ds, &cfg.spec(structure)?, &cfg.model.rls)?;
    let rh = train(ds, &cfg.spec(Structure::NrmFiRh)?, &cfg.model.rls)?;
    Ok(TrainedModels { zone, rh })
}

/// Identification and closed-loop outcome for one structure.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub models: TrainedModels,
    pub episode: EpisodeReport,
}

impl Comparison {
    pub fn summary_row(&self) -> SummaryRow {
        let (comfort, heating, pump) = self.episode.final_costs();
        SummaryRow {
            spec: self.models.zone.spec.structure,
            final_rmse: self.models.zone.final_rmse(),
            comfort,
            heating,
            pump,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub spec: Structure,
    pub final_rmse: f64,
    pub comfort: f64,
    pub heating: f64,
    pub pump: f64,
}

pub fn run_mpc(cfg: &ExperimentConfig, models: &TrainedModels) -> Result<EpisodeReport> {
    let predictor = models.predictor()?;
    closed_loop_run(&cfg.plant, &cfg.sim, &cfg.mpc, Controller::Mpc(&predictor))
}

pub fn run_baseline(cfg: &ExperimentConfig) -> Result<EpisodeReport> {
    closed_loop_run(&cfg.plant, &cfg.sim, &cfg.mpc, Controller::Hysteresis)
}

/// Trains every structure on the same data and runs the same episode with each.
pub fn compare(cfg: &ExperimentConfig, ds: &TimeSeriesDataset, structures: &[Structure]) -> Result<Vec<Comparison>> {
    structures
        .iter()
        .map(|&s| {
            let models = train_models(cfg, ds, s)?;
            let episode = run_mpc(cfg, &models)?;
            Ok(Comparison { models, episode })
        })
        .collect()
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    use crate::dataset::fmt_f64;
    let mut wr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| crate::Error::Csv(e.to_string());
    wr.write_record(["spec", "final_rmse", "comfort", "heating", "pump"])
        .map_err(csv_err)?;
    for r in rows {
        wr.write_record([
            r.spec.to_string(),
            fmt_f64(r.final_rmse),
            fmt_f64(r.comfort),
            fmt_f64(r.heating),
            fmt_f64(r.pump),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(|e| crate::Error::Csv(e.to_string()))
}
