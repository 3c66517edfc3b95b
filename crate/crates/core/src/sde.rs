//! Ito stochastic Schrodinger equation for the continuous norm-preserving
//! unravelings of the Lindblad equation:
//!
//! ```text
//! |dpsi> = -i H |psi> dt
//!          - 1/2 sum_j (L_j^dag L_j + <L_j^dag><L_j> - 2 <L_j^dag> L_j) |psi> dt
//!          + sum_j (L_j - <L_j>) |psi> dzeta_j
//! ```
//!
//! with `E dzeta_j dzeta_k^* = delta_jk dt` and `E dzeta_j^2 = c_j dt`. Every
//! choice of the correlation factors `c_j` in the unit disk reproduces the same
//! master equation on average; the policies below pick `c_j` per step.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::hilbert::{
    covariance, expectation, mean_square_deviation, unitary_propagator, Ladder, Operator, StateVector, C64,
};
use crate::models::squeezing_extract_with;
use crate::noise::{increment_from_normals, is_unitary, CorrelatedNoise, CorrelationFactor, RngStream};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Default threshold on |sigma(L^dag, L)| below which adaptive policies fall back to QSD.
pub const DEFAULT_ADAPTIVE_FLOOR: f64 = 1e-10;

/// Rule producing the correlation factor of one channel at each step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorrelationPolicy {
    /// Constant factor: 0 is QSD, 1 real noise, -1 imaginary noise.
    Fixed(CorrelationFactor),
    /// `c = r sigma(L^dag, L)^* / |sigma(L^dag, L)|`, evaluated on the current state.
    CovariancePhase(f64),
    /// `c = r gamma^* / |gamma|` with gamma the fitted squeezing parameter.
    SqueezedPhase(f64),
}

impl CorrelationPolicy {
    pub fn fixed(c: C64) -> Result<Self> {
        Ok(Self::Fixed(CorrelationFactor::new(c)?))
    }

    pub fn qsd() -> Self {
        Self::Fixed(CorrelationFactor::QSD)
    }

    pub fn covariance_phase(r: f64) -> Result<Self> {
        check_modulus_scale(r)?;
        Ok(Self::CovariancePhase(r))
    }

    pub fn squeezed_phase(r: f64) -> Result<Self> {
        check_modulus_scale(r)?;
        Ok(Self::SqueezedPhase(r))
    }

    pub fn is_adaptive(&self) -> bool {
        !matches!(self, Self::Fixed(_))
    }

    /// File-name friendly label, e.g. `cov_1`, `fixed_0_1`.
    pub fn label(&self) -> String {
        self.to_string().replace([':', ','], "_")
    }
}

fn check_modulus_scale(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::Domain(format!("correlation modulus scale must lie in [0, 1], got {r}")))
    }
}

impl fmt::Display for CorrelationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(c) => {
                let v = c.value();
                if v.im == 0.0 {
                    write!(f, "fixed:{}", v.re)
                } else {
                    write!(f, "fixed:{},{}", v.re, v.im)
                }
            }
            Self::CovariancePhase(r) => write!(f, "cov:{r}"),
            Self::SqueezedPhase(r) => write!(f, "sq:{r}"),
        }
    }
}

impl FromStr for CorrelationPolicy {
    type Err = Error;

    /// Parses `fixed:<re>[,<im>]`, `cov:<r>` or `sq:<r>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("cannot parse correlation policy '{s}'"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        match kind.trim() {
            "fixed" => {
                let (re, im) = match arg.split_once(',') {
                    Some((re, im)) => (num(re)?, num(im)?),
                    None => (num(arg)?, 0.0),
                };
                Self::fixed(C64::new(re, im))
            }
            "cov" => Self::covariance_phase(num(arg)?),
            "sq" => Self::squeezed_phase(num(arg)?),
            _ => Err(bad()),
        }
    }
}

/// One environment channel: Lindblad operator (rate prefactor included) and its noise policy.
#[derive(Clone, Debug)]
pub struct LindbladChannel {
    op: Operator,
    op_dag: Operator,
    policy: CorrelationPolicy,
}

impl LindbladChannel {
    pub fn new(op: Operator, policy: CorrelationPolicy) -> Self {
        let op_dag = op.adjoint();
        Self { op, op_dag, policy }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn adjoint(&self) -> &Operator {
        &self.op_dag
    }

    pub fn policy(&self) -> CorrelationPolicy {
        self.policy
    }

    pub fn with_policy(mut self, policy: CorrelationPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

/// The channels of one system, optionally with a joint correlation matrix
/// that replaces the per-channel policies.
#[derive(Clone, Debug, Default)]
pub struct ChannelSet {
    channels: Vec<LindbladChannel>,
    joint: Option<CorrelatedNoise>,
}

impl ChannelSet {
    pub fn new(channels: Vec<LindbladChannel>) -> Result<Self> {
        if let Some(first) = channels.first() {
            for ch in &channels[1..] {
                check_dim(first.dim(), ch.dim())?;
            }
        }
        Ok(Self { channels, joint: None })
    }

    pub fn single(channel: LindbladChannel) -> Self {
        Self {
            channels: vec![channel],
            joint: None,
        }
    }

    /// Uses the cross-channel correlation matrix of `noise` for every step.
    pub fn with_joint_noise(mut self, noise: CorrelatedNoise) -> Result<Self> {
        check_dim(self.channels.len(), noise.channels())?;
        self.joint = Some(noise);
        Ok(self)
    }

    pub fn channels(&self) -> &[LindbladChannel] {
        &self.channels
    }

    pub fn joint_noise(&self) -> Option<&CorrelatedNoise> {
        self.joint.as_ref()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn operators(&self) -> Vec<Operator> {
        self.channels.iter().map(|c| c.op.clone()).collect()
    }
}

/// Integration scheme for the Hamiltonian part of the step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Plain Euler-Maruyama on the full drift.
    #[default]
    EulerMaruyama,
    /// Euler-Maruyama for the environment terms followed by the exact
    /// propagator exp(-i H dt) supplied by the Hamiltonian.
    ExactUnitary,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    pub renormalize_every_step: bool,
    pub adaptive_floor: f64,
    pub scheme: Scheme,
}

impl SdeConfig {
    pub fn new(dt: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            renormalize_every_step: true,
            adaptive_floor: DEFAULT_ADAPTIVE_FLOOR,
            scheme: Scheme::EulerMaruyama,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.adaptive_floor > 0.0) {
            return Err(Error::Domain("adaptive_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Time-dependent Hamiltonian H(t), hbar = 1.
pub trait Hamiltonian: Send + Sync {
    fn at(&self, t: f64) -> &Operator;

    /// exp(-i H dt) for the interval starting near `t`, when precomputed for this `dt`.
    fn propagator(&self, _t: f64, _dt: f64) -> Option<&Operator> {
        None
    }
}

impl Hamiltonian for Operator {
    fn at(&self, _t: f64) -> &Operator {
        self
    }
}

/// Constant Hamiltonian with a precomputed propagator for one step size.
#[derive(Clone, Debug)]
pub struct StaticHamiltonian {
    op: Operator,
    dt: f64,
    propagator: Operator,
}

impl StaticHamiltonian {
    pub fn new(op: Operator, dt: f64) -> Result<Self> {
        let propagator = unitary_propagator(&op, dt)?;
        Ok(Self { op, dt, propagator })
    }
}

impl Hamiltonian for StaticHamiltonian {
    fn at(&self, _t: f64) -> &Operator {
        &self.op
    }

    fn propagator(&self, _t: f64, dt: f64) -> Option<&Operator> {
        same_step(self.dt, dt).then_some(&self.propagator)
    }
}

pub(crate) fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Drift vector |v> of the Ito equation.
pub fn drift(psi: &StateVector, h: &Operator, channels: &[LindbladChannel]) -> Result<DVector<C64>> {
    let amps = psi.amplitudes();
    let mut v = h.apply(amps)? * C64::new(0.0, -1.0);
    for ch in channels {
        let l_psi = ch.op.apply(amps)?;
        let mean = amps.dotc(&l_psi);
        let ldl_psi = ch.op_dag.apply(&l_psi)?;
        v.axpy(C64::new(-0.5, 0.0), &ldl_psi, ONE);
        v.axpy(C64::new(-0.5 * mean.norm_sqr(), 0.0), amps, ONE);
        v.axpy(mean.conj(), &l_psi, ONE);
    }
    Ok(v)
}

/// (L - <L>) |psi>
pub fn diffusion_vector(psi: &StateVector, channel: &LindbladChannel) -> Result<DVector<C64>> {
    let amps = psi.amplitudes();
    let mut l_psi = channel.op.apply(amps)?;
    let mean = amps.dotc(&l_psi);
    l_psi.axpy(-mean, amps, ONE);
    Ok(l_psi)
}

/// Correlation factor of `channel` at state `psi`.
pub fn evaluate_policy(
    policy: CorrelationPolicy,
    psi: &StateVector,
    channel: &LindbladChannel,
    adaptive_floor: f64,
) -> Result<CorrelationFactor> {
    match policy {
        CorrelationPolicy::Fixed(c) => Ok(c),
        CorrelationPolicy::CovariancePhase(r) | CorrelationPolicy::SqueezedPhase(r) => {
            let cross = covariance(&channel.op_dag, &channel.op, psi)?;
            let spread = mean_square_deviation(&channel.op, psi)?;
            Ok(adaptive_factor(policy, r, cross, spread, adaptive_floor))
        }
    }
}

/// Adaptive factor from `cross = sigma(L^dag, L)` and `spread = sigma^2(L)`.
fn adaptive_factor(policy: CorrelationPolicy, r: f64, cross: C64, spread: f64, floor: f64) -> CorrelationFactor {
    if r == 0.0 {
        return CorrelationFactor::QSD;
    }
    let phase = match policy {
        CorrelationPolicy::SqueezedPhase(_) => {
            // gamma = sigma^2(L) / sigma(L^dag, L)^*
            if cross.norm() < floor {
                return CorrelationFactor::QSD;
            }
            let gamma = spread / cross.conj();
            if gamma.norm() < floor {
                return CorrelationFactor::QSD;
            }
            gamma.conj() / gamma.norm()
        }
        _ => {
            if cross.norm() < floor {
                return CorrelationFactor::QSD;
            }
            cross.conj() / cross.norm()
        }
    };
    // |phase| = 1 only up to rounding
    let mut c = phase * r;
    if c.norm() > 1.0 {
        c /= c.norm();
    }
    CorrelationFactor::new(c).unwrap_or(CorrelationFactor::QSD)
}

struct Workspace {
    next: DVector<C64>,
    l_psi: DVector<C64>,
    ldl_psi: DVector<C64>,
    ld_psi: DVector<C64>,
    factors: Vec<C64>,
    diffusions: Vec<DVector<C64>>,
}

impl Workspace {
    fn new(dim: usize, channels: usize) -> Self {
        let zero = || DVector::from_element(dim, ZERO);
        Self {
            next: zero(),
            l_psi: zero(),
            ldl_psi: zero(),
            ld_psi: zero(),
            factors: vec![ZERO; channels],
            diffusions: (0..channels).map(|_| zero()).collect(),
        }
    }
}

fn check_system(psi: &StateVector, h: &dyn Hamiltonian, t: f64, channels: &ChannelSet) -> Result<()> {
    check_dim(h.at(t).dim(), psi.dim())?;
    for ch in channels.channels() {
        check_dim(ch.dim(), psi.dim())?;
    }
    Ok(())
}

/// One Euler-Maruyama step; the correlation factors are evaluated on the pre-step state.
pub fn step(
    psi: &StateVector,
    t: f64,
    h: &dyn Hamiltonian,
    channels: &ChannelSet,
    config: &SdeConfig,
    rng: &mut RngStream,
) -> Result<StateVector> {
    config.validate()?;
    check_system(psi, h, t, channels)?;
    let mut ws = Workspace::new(psi.dim(), channels.len());
    let mut amps = psi.amplitudes().clone();
    step_in_place(&mut amps, t, h, channels, config, rng, &mut ws)?;
    Ok(StateVector::from_normalized(amps))
}

fn step_in_place(
    amps: &mut DVector<C64>,
    t: f64,
    h: &dyn Hamiltonian,
    channels: &ChannelSet,
    config: &SdeConfig,
    rng: &mut RngStream,
    ws: &mut Workspace,
) -> Result<()> {
    let dt = config.dt;
    let mid = t + 0.5 * dt;
    ws.next.copy_from(amps);

    if config.scheme == Scheme::EulerMaruyama {
        h.at(mid).apply_into(amps, &mut ws.l_psi);
        ws.next.axpy(C64::new(0.0, -dt), &ws.l_psi, ONE);
    }

    for (k, ch) in channels.channels().iter().enumerate() {
        ch.op.apply_into(amps, &mut ws.l_psi);
        let mean = amps.dotc(&ws.l_psi);
        ch.op_dag.apply_into(&ws.l_psi, &mut ws.ldl_psi);

        // drift: -1/2 (L^dag L + |<L>|^2 - 2 <L>^* L) psi
        ws.next.axpy(C64::new(-0.5 * dt, 0.0), &ws.ldl_psi, ONE);
        ws.next.axpy(C64::new(-0.5 * dt * mean.norm_sqr(), 0.0), amps, ONE);
        ws.next.axpy(mean.conj() * dt, &ws.l_psi, ONE);

        ws.factors[k] = match ch.policy {
            CorrelationPolicy::Fixed(c) => c.value(),
            policy @ (CorrelationPolicy::CovariancePhase(r) | CorrelationPolicy::SqueezedPhase(r)) => {
                ch.op_dag.apply_into(amps, &mut ws.ld_psi);
                let cross = ws.ld_psi.dotc(&ws.l_psi) - mean * mean;
                let spread = ws.l_psi.norm_squared() - mean.norm_sqr();
                adaptive_factor(policy, r, cross, spread, config.adaptive_floor).value()
            }
        };

        let diff = &mut ws.diffusions[k];
        diff.copy_from(&ws.l_psi);
        diff.axpy(-mean, amps, ONE);
    }

    match channels.joint_noise() {
        Some(noise) => {
            for (k, dz) in noise.sample(dt, rng)?.into_iter().enumerate() {
                ws.next.axpy(dz.0, &ws.diffusions[k], ONE);
            }
        }
        None => {
            for k in 0..channels.len() {
                let g1 = rng.standard_normal();
                let g2 = rng.standard_normal();
                let dz = increment_from_normals(ws.factors[k], dt, g1, g2);
                ws.next.axpy(dz, &ws.diffusions[k], ONE);
            }
        }
    }

    if config.scheme == Scheme::ExactUnitary {
        let u = h.propagator(mid, dt).ok_or_else(|| {
            Error::Domain("exact-unitary scheme needs a Hamiltonian with a propagator for this dt".into())
        })?;
        u.apply_into(&ws.next, amps);
    } else {
        amps.copy_from(&ws.next);
    }

    let norm = amps.norm();
    let tolerance = 10.0 * dt.sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > tolerance {
        return Err(Error::Instability { t, norm, tolerance });
    }
    if config.renormalize_every_step {
        amps.unscale_mut(norm);
    }
    Ok(())
}

/// Squeezing quantities extracted from the state with respect to the ladder `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqueezingPart {
    GammaRe,
    GammaIm,
    GammaAbs,
    Residual,
}

/// Scalar quantity recorded along a trajectory.
#[derive(Clone, Debug)]
pub enum Observable {
    ExpectationRe(String, Operator),
    ExpectationIm(String, Operator),
    /// sigma^2(O)
    Deviation(String, Operator),
    /// |sigma(O^dag, O)|
    CrossCovarianceAbs(String, Operator),
    Population(usize),
    Norm,
    Squeezing(SqueezingPart, Ladder),
}

impl Observable {
    pub fn sigma2_a(dim: usize) -> Self {
        Self::Deviation("sigma2_a".into(), crate::hilbert::annihilation(dim))
    }

    pub fn cross_a(dim: usize) -> Self {
        Self::CrossCovarianceAbs("abs_sigma_adag_a".into(), crate::hilbert::annihilation(dim))
    }

    pub fn name(&self) -> String {
        match self {
            Self::ExpectationRe(n, _) => format!("re_{n}"),
            Self::ExpectationIm(n, _) => format!("im_{n}"),
            Self::Deviation(n, _) | Self::CrossCovarianceAbs(n, _) => n.clone(),
            Self::Population(k) => format!("p{k}"),
            Self::Norm => "norm".into(),
            Self::Squeezing(part, _) => match part {
                SqueezingPart::GammaRe => "gamma_re",
                SqueezingPart::GammaIm => "gamma_im",
                SqueezingPart::GammaAbs => "gamma_abs",
                SqueezingPart::Residual => "squeezing_residual",
            }
            .into(),
        }
    }

    pub fn evaluate(&self, psi: &StateVector) -> Result<f64> {
        Ok(match self {
            Self::ExpectationRe(_, op) => expectation(op, psi)?.re,
            Self::ExpectationIm(_, op) => expectation(op, psi)?.im,
            Self::Deviation(_, op) => mean_square_deviation(op, psi)?,
            Self::CrossCovarianceAbs(_, op) => covariance(&op.adjoint(), op, psi)?.norm(),
            Self::Population(k) => psi.population(*k)?,
            Self::Norm => psi.norm(),
            Self::Squeezing(part, ladder) => {
                let fit = squeezing_extract_with(ladder, psi)?;
                match part {
                    SqueezingPart::GammaRe => fit.gamma.re,
                    SqueezingPart::GammaIm => fit.gamma.im,
                    SqueezingPart::GammaAbs => fit.gamma.norm(),
                    SqueezingPart::Residual => fit.residual,
                }
            }
        })
    }
}

/// Recording options for [`run_trajectory`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordOptions {
    /// Record every this many steps (>= 1).
    pub every: usize,
    /// Keep the full state at every record point.
    pub keep_states: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            every: 1,
            keep_states: false,
        }
    }
}

/// Observables recorded along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `values[i][k]`: observable `k` at `times[i]`.
    pub values: Vec<Vec<f64>>,
    pub states: Vec<StateVector>,
    /// Largest population seen in the two highest basis states.
    pub max_edge_population: f64,
}

impl TrajectoryRecord {
    pub fn series(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }
}

/// Number of `dt` steps covering `t_final`; errors unless `t_final` is a multiple of `dt`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!("t_final must be non-negative, got {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::Domain(format!(
            "t_final = {t_final} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Integrates one trajectory from `psi0` to `t_final`, recording `observables`.
pub fn run_trajectory(
    psi0: &StateVector,
    t_final: f64,
    h: &dyn Hamiltonian,
    channels: &ChannelSet,
    config: &SdeConfig,
    rng: &mut RngStream,
    observables: &[Observable],
    options: RecordOptions,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    check_system(psi0, h, 0.0, channels)?;
    if options.every == 0 {
        return Err(Error::Domain("record stride must be at least one step".into()));
    }
    let n_steps = step_count(t_final, config.dt)?;
    let mut record = TrajectoryRecord {
        times: Vec::with_capacity(n_steps / options.every + 1),
        values: Vec::with_capacity(n_steps / options.every + 1),
        states: Vec::new(),
        max_edge_population: psi0.edge_population(),
    };
    let mut ws = Workspace::new(psi0.dim(), channels.len());
    let mut psi = psi0.clone();

    let capture = |psi: &StateVector, t: f64, record: &mut TrajectoryRecord| -> Result<()> {
        record.times.push(t);
        record.values.push(
            observables
                .iter()
                .map(|o| o.evaluate(psi))
                .collect::<Result<Vec<_>>>()?,
        );
        if options.keep_states {
            record.states.push(psi.clone());
        }
        Ok(())
    };

    capture(&psi, 0.0, &mut record)?;
    for k in 0..n_steps {
        let t = k as f64 * config.dt;
        let mut amps = psi.into_amplitudes();
        step_in_place(&mut amps, t, h, channels, config, rng, &mut ws)?;
        psi = StateVector::from_normalized(amps);
        record.max_edge_population = record.max_edge_population.max(psi.edge_population());
        if (k + 1) % options.every == 0 {
            capture(&psi, (k + 1) as f64 * config.dt, &mut record)?;
        }
    }
    Ok(record)
}

/// Channels after a unitary mixing and shift, together with the Hamiltonian
/// correction that keeps the master equation unchanged.
#[derive(Clone, Debug)]
pub struct TransformedChannels {
    pub channels: Vec<LindbladChannel>,
    /// Add to H: `-(i/2) sum_j (lambda_j^* L_j - lambda_j L_j^dag)`.
    pub hamiltonian_shift: Operator,
}

/// Inverts `L_j = sum_k u_jk L~_k - lambda_j`: `L~_k = sum_j u_jk^* (L_j + lambda_j)`.
///
/// Channel `k` of the result keeps the policy of input channel `k`.
pub fn transform_channels(
    channels: &[LindbladChannel],
    u: &DMatrix<C64>,
    lambdas: &[C64],
) -> Result<TransformedChannels> {
    let j = channels.len();
    if j == 0 {
        return Err(Error::Domain("no channels to transform".into()));
    }
    if u.nrows() != j || !is_unitary(u, 1e-10) {
        return Err(Error::Domain("channel mixing matrix must be a J x J unitary".into()));
    }
    check_dim(j, lambdas.len())?;
    let dim = channels[0].dim();
    for ch in channels {
        check_dim(dim, ch.dim())?;
    }
    let shifted: Vec<Operator> = channels
        .iter()
        .zip(lambdas)
        .map(|(ch, &l)| ch.op.shifted(l))
        .collect();
    let mut out = Vec::with_capacity(j);
    for k in 0..j {
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (jj, op) in shifted.iter().enumerate() {
            m += op.matrix() * u[(jj, k)].conj();
        }
        out.push(LindbladChannel::new(Operator::from_matrix(m)?, channels[k].policy));
    }
    let mut shift = DMatrix::<C64>::zeros(dim, dim);
    for (ch, &l) in channels.iter().zip(lambdas) {
        shift += ch.op.matrix() * l.conj() - ch.op_dag.matrix() * l;
    }
    Ok(TransformedChannels {
        channels: out,
        hamiltonian_shift: Operator::from_matrix(shift * C64::new(0.0, -0.5))?,
    })
}
