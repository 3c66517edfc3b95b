//! Experiment presets, CSV emission and run manifests.

mod config;
mod csv;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use config::{parse_config, Averaging, ExperimentConfig, InitialState, KickedSettings, Preset, RawConfig};
pub use csv::CsvTable;

use crate::ensemble::{
    ensemble_density_at, run_trajectories, time_average, Accumulator, EnsembleResult, Experiment,
};
use crate::error::{Error, Result};
use crate::hilbert::{annihilation, number, Operator, StateVector, C64, LEAKAGE_TOL};
use crate::master::{evolve, trace_distance, DensityMatrix};
use crate::models::{
    apply_scaling, damping_channel, dephasing_channel, squeezing_ode_oracle, KickedHamiltonian, SqueezingTrack,
};
use crate::sde::{ChannelSet, CorrelationPolicy, Observable, RecordOptions, Scheme, SdeConfig};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// What a finished run wrote.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub max_edge_population: f64,
    pub warnings: Vec<String>,
}

/// Initial state and trajectory setup of a non-driven preset for one policy.
pub fn build_experiment(config: &ExperimentConfig, policy: CorrelationPolicy) -> Result<(StateVector, Experiment)> {
    if config.preset.is_kicked() {
        return Err(Error::Domain(format!("preset {} has no fixed-time ensemble", config.preset)));
    }
    let dim = config.dim;
    let psi0 = config.initial.build(dim)?;
    let (channel, tracked) = match config.preset {
        Preset::HermitianRates => (dephasing_channel(dim, config.kappa, policy)?, number(dim)),
        _ => (damping_channel(dim, config.kappa, policy)?, annihilation(dim)),
    };
    let mut observables = vec![Observable::Deviation("sigma2_a".into(), tracked.clone())];
    if config.preset == Preset::SqueezingDecay {
        observables.push(Observable::CrossCovarianceAbs("abs_sigma_adag_a".into(), tracked));
    }
    let experiment = Experiment {
        hamiltonian: Arc::new(Operator::zeros(dim)),
        channels: ChannelSet::single(channel),
        config: SdeConfig::new(config.dt)?,
        t_final: config.t_final,
        observables,
        record: RecordOptions {
            every: config.record_every(),
            keep_states: matches!(config.preset, Preset::OracleCheck),
        },
    };
    Ok((psi0, experiment))
}

fn csv_name(config: &ExperimentConfig, policy: CorrelationPolicy, suffix: &str) -> String {
    format!("{}_{}{}.csv", config.preset, policy.label(), suffix)
}

/// Per-time ensemble table: t, mean_sigma2_a, var_sigma2_a, ci95 and any further observables.
fn ensemble_table(result: &EnsembleResult) -> CsvTable {
    let mut header = vec!["t".to_string(), "mean_sigma2_a".into(), "var_sigma2_a".into(), "ci95".into()];
    for name in &result.names[1..] {
        header.push(format!("mean_{name}"));
        header.push(format!("var_{name}"));
        header.push(format!("ci95_{name}"));
    }
    let mut table = CsvTable::new(header);
    for (i, t) in result.times.iter().enumerate() {
        let mut row = vec![*t, result.mean[0][i], result.variance[0][i], result.ci95[0][i]];
        for k in 1..result.names.len() {
            row.extend([result.mean[k][i], result.variance[k][i], result.ci95[k][i]]);
        }
        table.push(row);
    }
    table
}

fn note_truncation(summary: &mut RunSummary, what: &str, edge: f64) {
    summary.max_edge_population = summary.max_edge_population.max(edge);
    if edge > LEAKAGE_TOL {
        summary.warnings.push(format!(
            "{what}: population {edge:e} reached the top two basis states (limit {LEAKAGE_TOL:e}); increase dim"
        ));
    }
}

fn run_ensemble_preset(config: &ExperimentConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    for &policy in &config.policies {
        let (psi0, experiment) = build_experiment(config, policy)?;
        let records = run_trajectories(&psi0, &experiment, config.n_traj, config.seed)?;
        let result = EnsembleResult::from_records(&records, experiment.observable_names())?;
        // the two-level oracle system is exact, not a truncated oscillator
        if config.preset != Preset::OracleCheck {
            note_truncation(summary, &policy.to_string(), result.max_edge_population);
        }

        let mut table = ensemble_table(&result);
        if config.preset == Preset::OracleCheck {
            let distances = oracle_distances(config, &psi0, &records, &result.times)?;
            table.add_column("trace_distance", &distances)?;
        }
        summary.files.push(table.write(&out.join(csv_name(config, policy, "")))?);

        if config.preset == Preset::SqueezingDecay {
            summary
                .files
                .push(gamma_table(config, policy, &psi0, &experiment)?.write(&out.join(csv_name(config, policy, "_gamma")))?);
        }
    }
    Ok(())
}

/// Trace distance between the ensemble density and the master-equation solution at each record time.
fn oracle_distances(
    config: &ExperimentConfig,
    psi0: &StateVector,
    records: &[crate::sde::TrajectoryRecord],
    times: &[f64],
) -> Result<Vec<f64>> {
    let l = annihilation(config.dim).scale(C64::new(config.kappa.sqrt(), 0.0));
    let oracle = evolve(
        &DensityMatrix::pure(psi0),
        config.t_final,
        &Operator::zeros(config.dim),
        &[l],
        config.dt,
        config.record_every(),
    )?;
    (0..times.len())
        .map(|i| trace_distance(&ensemble_density_at(records, i)?, &oracle[i].1))
        .collect()
}

/// Squeezing parameter along trajectory 0 next to the deterministic prediction.
fn gamma_table(
    config: &ExperimentConfig,
    policy: CorrelationPolicy,
    psi0: &StateVector,
    experiment: &Experiment,
) -> Result<CsvTable> {
    let mut single = experiment.clone();
    single.observables.clear();
    single.record.keep_states = true;
    let record = run_trajectories(psi0, &single, 1, config.seed)?.remove(0);
    let track = SqueezingTrack::from_states(&record.states)?;
    let oracle = squeezing_ode_oracle(track.gamma[0], config.kappa, policy, &record.times)?;
    let mut table = CsvTable::new(
        ["t", "gamma_re", "gamma_im", "residual", "oracle_gamma_re", "oracle_gamma_im"]
            .map(String::from)
            .to_vec(),
    );
    for (i, t) in record.times.iter().enumerate() {
        table.push(vec![
            *t,
            track.gamma[i].re,
            track.gamma[i].im,
            track.residual[i],
            oracle[i].re,
            oracle[i].im,
        ]);
    }
    Ok(table)
}

/// Stationary statistics of sigma^2(a) for the driven oscillator at one scaling and step size.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryStats {
    pub lambda: f64,
    pub dim: usize,
    pub dt: f64,
    pub mean: f64,
    pub variance: f64,
    /// Statistical uncertainty of `mean` and `variance`.
    pub mean_err: f64,
    pub variance_err: f64,
    /// Means over the first and second half of the stationary window.
    pub half_window_means: (f64, f64),
    pub mean_photons: f64,
    pub max_edge_population: f64,
    /// Ensemble statistics of sigma^2(a) and the photon number along the whole run.
    pub series: EnsembleResult,
}

/// Basis size used at scaling `lambda`.
pub fn scaled_dim(config: &ExperimentConfig, lambda: f64) -> usize {
    (config.dim as f64 * lambda).ceil() as usize
}

/// Integrates the driven oscillator at scaling `lambda` with base step `dt` and
/// reduces sigma^2(a) over the stationary window.
pub fn kicked_stationary(
    config: &ExperimentConfig,
    policy: CorrelationPolicy,
    lambda: f64,
    dt: f64,
) -> Result<StationaryStats> {
    let settings = config
        .kicked
        .as_ref()
        .ok_or_else(|| Error::Domain(format!("preset {} is not a driven preset", config.preset)))?;
    let params = apply_scaling(&settings.params(config.kappa)?, lambda)?;
    let dim = scaled_dim(config, lambda);
    let step = dt * lambda;
    let period = params.period();
    let t_final = crate::sde::step_count(settings.periods as f64 * period, step)? as f64 * step;
    let every = (config.output_stride / dt).round().max(1.0) as usize;
    let experiment = Experiment {
        hamiltonian: Arc::new(KickedHamiltonian::new(params, dim, step)?),
        channels: ChannelSet::single(damping_channel(dim, params.kappa, policy)?),
        config: SdeConfig::new(step)?.with_scheme(Scheme::ExactUnitary),
        t_final,
        observables: vec![
            Observable::sigma2_a(dim),
            Observable::ExpectationRe("photons".into(), number(dim)),
        ],
        record: RecordOptions {
            every,
            keep_states: false,
        },
    };
    let psi0 = config.initial.build(dim)?;
    let n_traj = match settings.averaging {
        Averaging::Time => 1,
        Averaging::Ensemble => config.n_traj,
    };
    let records = run_trajectories(&psi0, &experiment, n_traj, config.seed)?;

    let start = settings.discard_periods as f64 * period;
    let mid = 0.5 * (start + t_final);
    let window = (start, t_final);
    let times = records[0].times.clone();
    let edge = records.iter().map(|r| r.max_edge_population).fold(0.0, f64::max);

    let mut per_traj = Accumulator::new(2);
    let mut pooled = Accumulator::new(2);
    let mut halves = (Accumulator::new(2), Accumulator::new(2));
    for r in &records {
        let s2 = r.series(0);
        let n = r.series(1);
        let (m, v) = time_average(&times, &s2, window)?;
        per_traj.push(&[m, v])?;
        for ((t, x), p) in times.iter().zip(&s2).zip(&n) {
            if *t >= start - 1e-9 {
                pooled.push(&[*x, *p])?;
                let half = if *t < mid { &mut halves.0 } else { &mut halves.1 };
                half.push(&[*x, 0.0])?;
            }
        }
    }
    let (h1, h2) = (halves.0.mean()[0], halves.1.mean()[0]);
    let (mean, variance, mean_err, variance_err) = match settings.averaging {
        Averaging::Time => {
            let (m1, v1) = (h1, halves.0.variance()[0]);
            let (m2, v2) = (h2, halves.1.variance()[0]);
            (pooled.mean()[0], pooled.variance()[0], (m1 - m2).abs(), (v1 - v2).abs())
        }
        Averaging::Ensemble => {
            let se = per_traj.variance();
            let n = n_traj as f64;
            (
                pooled.mean()[0],
                pooled.variance()[0],
                1.96 * (se[0] / n).sqrt(),
                1.96 * (se[1] / n).sqrt(),
            )
        }
    };
    Ok(StationaryStats {
        lambda,
        dim,
        dt,
        mean,
        variance,
        mean_err,
        variance_err,
        half_window_means: (h1, h2),
        max_edge_population: edge,
        series: ensemble_series(&records, experiment.observable_names(), edge)?,
        mean_photons: pooled.mean()[1],
    })
}

/// Like [`EnsembleResult::from_records`] but also accepts a single trajectory (zero spread).
fn ensemble_series(records: &[crate::sde::TrajectoryRecord], names: Vec<String>, edge: f64) -> Result<EnsembleResult> {
    if records.len() > 1 {
        return EnsembleResult::from_records(records, names);
    }
    let r = &records[0];
    let mut acc = Accumulator::new(r.values.len() * names.len());
    acc.push(&r.values.concat())?;
    Ok(EnsembleResult::from_accumulator(r.times.clone(), names, &acc, edge))
}

/// Stationary statistics at `dt` together with the change observed when `dt` is halved.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryComparison {
    pub coarse: StationaryStats,
    pub fine: StationaryStats,
}

impl StationaryComparison {
    pub fn dt_error_mean(&self) -> f64 {
        (self.coarse.mean - self.fine.mean).abs()
    }

    pub fn dt_error_variance(&self) -> f64 {
        (self.coarse.variance - self.fine.variance).abs()
    }

    /// Statistical and step-size uncertainties of the mean, added in quadrature.
    pub fn mean_uncertainty(&self) -> f64 {
        self.coarse.mean_err.hypot(self.dt_error_mean())
    }

    pub fn variance_uncertainty(&self) -> f64 {
        self.coarse.variance_err.hypot(self.dt_error_variance())
    }
}

pub fn kicked_comparison(config: &ExperimentConfig, policy: CorrelationPolicy, lambda: f64) -> Result<StationaryComparison> {
    Ok(StationaryComparison {
        coarse: kicked_stationary(config, policy, lambda, config.dt)?,
        fine: kicked_stationary(config, policy, lambda, 0.5 * config.dt)?,
    })
}

fn run_kicked_preset(config: &ExperimentConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let settings = config.kicked.as_ref().expect("driven preset");
    for &policy in &config.policies {
        let mut table = CsvTable::new(
            [
                "lambda",
                "mean_sigma2_a",
                "var_sigma2_a",
                "stat_err_mean",
                "stat_err_var",
                "dt_err_mean",
                "dt_err_var",
                "mean_photons",
                "dim",
            ]
            .map(String::from)
            .to_vec(),
        );
        for &lambda in &settings.lambdas {
            let cmp = kicked_comparison(config, policy, lambda)?;
            let s = &cmp.coarse;
            note_truncation(summary, &format!("{policy} lambda={lambda}"), s.max_edge_population);
            note_truncation(summary, &format!("{policy} lambda={lambda} dt/2"), cmp.fine.max_edge_population);
            table.push(vec![
                lambda,
                s.mean,
                s.variance,
                s.mean_err,
                s.variance_err,
                cmp.dt_error_mean(),
                cmp.dt_error_variance(),
                s.mean_photons,
                s.dim as f64,
            ]);
            let name = csv_name(config, policy, &format!("_lambda{lambda}"));
            summary.files.push(ensemble_table(&s.series).write(&out.join(name))?);
        }
        summary.files.push(table.write(&out.join(csv_name(config, policy, "_stationary")))?);
    }
    Ok(())
}

/// Manifest text: the resolved configuration followed by generated `run_` fields.
pub fn manifest_text(config: &ExperimentConfig, summary: &RunSummary) -> String {
    let mut text = config.to_config_text();
    text.push_str(&format!("run_version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("run_seed = {}\n", config.seed));
    text.push_str(&format!("run_max_edge_population = {:e}\n", summary.max_edge_population));
    let names: Vec<String> = summary
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    text.push_str(&format!("run_files = {}\n", names.join(" ")));
    text
}

/// Runs the experiment on the current rayon pool and writes CSVs plus the manifest into `output_path`.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    let out = PathBuf::from(&config.output_path);
    fs::create_dir_all(&out)?;
    let mut summary = RunSummary::default();
    if config.preset.is_kicked() {
        run_kicked_preset(config, &out, &mut summary)?;
    } else {
        run_ensemble_preset(config, &out, &mut summary)?;
    }
    fs::write(out.join(MANIFEST_NAME), manifest_text(config, &summary))?;
    Ok(summary)
}
