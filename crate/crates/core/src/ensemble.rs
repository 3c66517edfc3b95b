//! Parallel trajectory ensembles and their statistics.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::hilbert::{StateVector, C64};
use crate::master::DensityMatrix;
use crate::noise::RngStream;
use crate::sde::{run_trajectory, ChannelSet, Hamiltonian, Observable, RecordOptions, SdeConfig, TrajectoryRecord};

/// Everything needed to integrate one trajectory except the initial state and noise stream.
#[derive(Clone)]
pub struct Experiment {
    pub hamiltonian: Arc<dyn Hamiltonian>,
    pub channels: ChannelSet,
    pub config: SdeConfig,
    pub t_final: f64,
    pub observables: Vec<Observable>,
    pub record: RecordOptions,
}

impl Experiment {
    pub fn observable_names(&self) -> Vec<String> {
        self.observables.iter().map(Observable::name).collect()
    }
}

/// Runs trajectories `0..n_traj` on the current rayon pool; trajectory `i`
/// uses stream `i` of `seed`. Results come back in index order.
pub fn run_trajectories(
    psi0: &StateVector,
    experiment: &Experiment,
    n_traj: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let results: Vec<Result<TrajectoryRecord>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64);
            run_trajectory(
                psi0,
                experiment.t_final,
                experiment.hamiltonian.as_ref(),
                &experiment.channels,
                &experiment.config,
                &mut rng,
                &experiment.observables,
                experiment.record,
            )
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Trajectory {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Ensemble statistics of the recorded observables.
pub fn run_ensemble(psi0: &StateVector, experiment: &Experiment, n_traj: usize, seed: u64) -> Result<EnsembleResult> {
    check_ensemble_size(n_traj)?;
    let records = run_trajectories(psi0, experiment, n_traj, seed)?;
    EnsembleResult::from_records(&records, experiment.observable_names())
}

fn check_ensemble_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("an ensemble needs at least 2 trajectories, got {n}")));
    }
    Ok(())
}

/// Streaming mean and sum of squared deviations for a fixed-length vector of quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct Accumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        check_dim(self.mean.len(), values.len())?;
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
        Ok(())
    }

    /// Combines two partial accumulators (parallel variance formula).
    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        check_dim(self.mean.len(), other.mean.len())?;
        if other.n == 0 {
            return Ok(());
        }
        if self.n == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance (zero for fewer than two samples).
    pub fn variance(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        let d = (self.n - 1) as f64;
        self.m2.iter().map(|s| (s / d).max(0.0)).collect()
    }
}

/// Per-time ensemble mean, variance and 95% confidence half-width of each observable.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `mean[k][i]`: observable `k` at `times[i]`.
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    pub ci95: Vec<Vec<f64>>,
    pub n_traj: usize,
    /// Largest edge-of-basis population over all trajectories.
    pub max_edge_population: f64,
}

impl EnsembleResult {
    /// Reduces records sequentially in index order.
    pub fn from_records(records: &[TrajectoryRecord], names: Vec<String>) -> Result<Self> {
        check_ensemble_size(records.len())?;
        let times = records[0].times.clone();
        let n_obs = names.len();
        let mut acc = Accumulator::new(times.len() * n_obs);
        let mut flat = Vec::with_capacity(times.len() * n_obs);
        let mut edge = 0.0f64;
        for r in records {
            check_dim(times.len(), r.times.len())?;
            flat.clear();
            for row in &r.values {
                check_dim(n_obs, row.len())?;
                flat.extend_from_slice(row);
            }
            acc.push(&flat)?;
            edge = edge.max(r.max_edge_population);
        }
        Ok(Self::from_accumulator(times, names, &acc, edge))
    }

    pub fn from_accumulator(times: Vec<f64>, names: Vec<String>, acc: &Accumulator, max_edge: f64) -> Self {
        let n_obs = names.len();
        let var = acc.variance();
        let n = acc.count();
        let column = |v: &[f64], k: usize| -> Vec<f64> { (0..times.len()).map(|i| v[i * n_obs + k]).collect() };
        let mean: Vec<Vec<f64>> = (0..n_obs).map(|k| column(acc.mean(), k)).collect();
        let variance: Vec<Vec<f64>> = (0..n_obs).map(|k| column(&var, k)).collect();
        let ci95 = variance
            .iter()
            .map(|vs| vs.iter().map(|v| 1.96 * (v / n as f64).sqrt()).collect())
            .collect();
        Self {
            times,
            names,
            mean,
            variance,
            ci95,
            n_traj: n,
            max_edge_population: max_edge,
        }
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Domain(format!("no observable named '{name}'")))
    }

    /// Standard error of the mean of observable `k` at each time.
    pub fn stderr(&self, k: usize) -> Vec<f64> {
        self.variance[k].iter().map(|v| (v / self.n_traj as f64).sqrt()).collect()
    }
}

/// rho = M(|psi><psi|)
pub fn ensemble_density(states: &[&StateVector]) -> Result<DensityMatrix> {
    if states.len() < 2 {
        return Err(Error::Domain("ensemble density needs at least 2 states".into()));
    }
    let dim = states[0].dim();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for psi in states {
        check_dim(dim, psi.dim())?;
        let v = psi.amplitudes();
        m += v * v.adjoint();
    }
    m /= C64::new(states.len() as f64, 0.0);
    // exact hermiticity; the diagonal is already real
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(m)
}

/// Ensemble density at record index `i` of trajectories recorded with `keep_states`.
pub fn ensemble_density_at(records: &[TrajectoryRecord], i: usize) -> Result<DensityMatrix> {
    let states = records
        .iter()
        .map(|r| {
            r.states
                .get(i)
                .ok_or(Error::IndexOutOfRange { index: i, dim: r.states.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    ensemble_density(&states)
}

/// Exponential decay rate fitted to a series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub stderr: f64,
    pub window: (f64, f64),
}

/// Least-squares line through the points with `t` in `window`: (slope, intercept, slope stderr).
pub fn linear_fit(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<(f64, f64, f64)> {
    check_dim(times.len(), values.len())?;
    let eps = 1e-9 * window.1.abs().max(1.0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 - eps && **t <= window.1 + eps)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Fit(format!(
            "window [{}, {}] holds {} points, need at least 3",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok((slope, intercept, (ssr / (n - 2.0) / sxx).sqrt()))
}

/// Decay rate of `values` from a log-linear least-squares fit over `window`.
pub fn fit_rate_series(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateEstimate> {
    check_dim(times.len(), values.len())?;
    let mut logs = Vec::with_capacity(values.len());
    for (t, v) in times.iter().zip(values) {
        let inside = *t >= window.0 - 1e-9 && *t <= window.1 + 1e-9;
        if inside && !(*v > 0.0) {
            return Err(Error::Fit(format!(
                "non-positive value {v} at t = {t}; localization is complete, shrink the window"
            )));
        }
        logs.push(if *v > 0.0 { v.ln() } else { f64::NAN });
    }
    let (slope, _, stderr) = linear_fit(times, &logs, window)?;
    Ok(RateEstimate {
        rate: -slope,
        stderr,
        window,
    })
}

/// Decay rate of the ensemble mean of observable `k`.
pub fn fit_rate(result: &EnsembleResult, k: usize, window: (f64, f64)) -> Result<RateEstimate> {
    if k >= result.mean.len() {
        return Err(Error::IndexOutOfRange { index: k, dim: result.mean.len() });
    }
    fit_rate_series(&result.times, &result.mean[k], window)
}

/// Mean and unbiased variance of the samples with `t` in `window` (single-trajectory time average).
pub fn time_average(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    check_dim(times.len(), values.len())?;
    let mut acc = Accumulator::new(1);
    for (t, v) in times.iter().zip(values) {
        if *t >= window.0 - 1e-9 && *t <= window.1 + 1e-9 {
            acc.push(&[*v])?;
        }
    }
    if acc.count() < 2 {
        return Err(Error::Domain(format!("window [{}, {}] holds fewer than 2 samples", window.0, window.1)));
    }
    Ok((acc.mean()[0], acc.variance()[0]))
}
