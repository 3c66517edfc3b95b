//! Model systems and derived observables: damped oscillator, hermitian
//! dephasing, the kicked anharmonic oscillator, squeezing extraction and the
//! deterministic localization-rate predictions.

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, covariance, creation, expectation, mean_square_deviation, number, squeezing_residual,
    unitary_propagator, Ladder, Operator, StateVector, C64,
};
use crate::sde::{same_step, CorrelationPolicy, Hamiltonian, LindbladChannel};

/// |sigma(a^dag, a)| below which the state is treated as unsqueezed.
pub const SQUEEZING_FLOOR: f64 = 1e-10;

/// Damping channel `sqrt(kappa) a`.
pub fn damping_channel(dim: usize, kappa: f64, policy: CorrelationPolicy) -> Result<LindbladChannel> {
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("kappa must be non-negative, got {kappa}")));
    }
    Ok(LindbladChannel::new(annihilation(dim).scale(C64::new(kappa.sqrt(), 0.0)), policy))
}

/// Dephasing channel `sqrt(kappa) n`.
pub fn dephasing_channel(dim: usize, kappa: f64, policy: CorrelationPolicy) -> Result<LindbladChannel> {
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("kappa must be non-negative, got {kappa}")));
    }
    Ok(LindbladChannel::new(number(dim).scale(C64::new(kappa.sqrt(), 0.0)), policy))
}

/// Pulsed drive `i beta(t) (a^dag - a)` plus Kerr term `chi/2 a^dag^2 a^2`, damped at rate kappa.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KickedOscillatorParams {
    pub beta0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub chi: f64,
    pub kappa: f64,
    pub lambda_scale: f64,
}

impl KickedOscillatorParams {
    pub fn new(beta0: f64, tau1: f64, tau2: f64, chi: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            beta0,
            tau1,
            tau2,
            chi,
            kappa,
            lambda_scale: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// chi = 1, beta0 = 2, kappa = 0.5, tau1 = 0.98, tau2 = 1.
    pub fn chaotic() -> Self {
        Self {
            beta0: 2.0,
            tau1: 0.98,
            tau2: 1.0,
            chi: 1.0,
            kappa: 0.5,
            lambda_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau2 > 0.0) {
            return Err(Error::Domain("pulse length and separation must be positive".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Domain("kappa must be non-negative".into()));
        }
        if !(self.lambda_scale >= 1.0) {
            return Err(Error::Domain("lambda_scale must be at least 1".into()));
        }
        if !(self.beta0.is_finite() && self.chi.is_finite()) {
            return Err(Error::Domain("beta0 and chi must be finite".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.tau1 + self.tau2
    }

    pub fn pulse_on(&self, t: f64) -> bool {
        t.rem_euclid(self.period()) < self.tau1
    }

    pub fn beta(&self, t: f64) -> f64 {
        if self.pulse_on(t) {
            self.beta0
        } else {
            0.0
        }
    }
}

/// Rescales towards the classical limit: times times lambda, kappa / lambda, chi / lambda^3.
pub fn apply_scaling(params: &KickedOscillatorParams, lambda: f64) -> Result<KickedOscillatorParams> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("scaling parameter must be >= 1, got {lambda}")));
    }
    Ok(KickedOscillatorParams {
        beta0: params.beta0,
        tau1: params.tau1 * lambda,
        tau2: params.tau2 * lambda,
        chi: params.chi / lambda.powi(3),
        kappa: params.kappa / lambda,
        lambda_scale: params.lambda_scale * lambda,
    })
}

fn drive_operator(dim: usize, beta: f64) -> Operator {
    creation(dim)
        .plus(&annihilation(dim).scale(C64::new(-1.0, 0.0)))
        .expect("same dimension")
        .scale(C64::new(0.0, beta))
}

fn kerr_operator(dim: usize, chi: f64) -> Operator {
    let diag: Vec<C64> = (0..dim)
        .map(|n| C64::new(0.5 * chi * (n as f64) * (n as f64 - 1.0), 0.0))
        .collect();
    Operator::from_diagonal(&diag).expect("dim >= 2")
}

/// H(t) = i beta(t) (a^dag - a) + chi/2 a^dag^2 a^2.
pub fn kicked_hamiltonian(params: &KickedOscillatorParams, dim: usize, t: f64) -> Operator {
    let kerr = kerr_operator(dim, params.chi);
    let beta = params.beta(t);
    if beta == 0.0 {
        kerr
    } else {
        kerr.plus(&drive_operator(dim, beta)).expect("same dimension")
    }
}

/// Piecewise-constant kicked Hamiltonian with propagators precomputed for one step size.
#[derive(Clone, Debug)]
pub struct KickedHamiltonian {
    params: KickedOscillatorParams,
    dt: f64,
    on: Operator,
    off: Operator,
    on_propagator: Operator,
    off_propagator: Operator,
}

impl KickedHamiltonian {
    /// Errors unless `tau1` and `tau2` are integer multiples of `dt`, so pulse edges sit on the grid.
    pub fn new(params: KickedOscillatorParams, dim: usize, dt: f64) -> Result<Self> {
        params.validate()?;
        for (name, tau) in [("tau1", params.tau1), ("tau2", params.tau2)] {
            let n = (tau / dt).round();
            if n < 1.0 || (n * dt - tau).abs() > 1e-9 * tau {
                return Err(Error::Domain(format!("{name} = {tau} is not an integer multiple of dt = {dt}")));
            }
        }
        let off = kerr_operator(dim, params.chi);
        let on = off.plus(&drive_operator(dim, params.beta0))?;
        Ok(Self {
            params,
            dt,
            on_propagator: unitary_propagator(&on, dt)?,
            off_propagator: unitary_propagator(&off, dt)?,
            on,
            off,
        })
    }

    pub fn params(&self) -> &KickedOscillatorParams {
        &self.params
    }
}

impl Hamiltonian for KickedHamiltonian {
    fn at(&self, t: f64) -> &Operator {
        if self.params.pulse_on(t) {
            &self.on
        } else {
            &self.off
        }
    }

    fn propagator(&self, t: f64, dt: f64) -> Option<&Operator> {
        if !same_step(self.dt, dt) {
            return None;
        }
        Some(if self.params.pulse_on(t) {
            &self.on_propagator
        } else {
            &self.off_propagator
        })
    }
}

/// Squeezed-state fit `(a - gamma a^dag - alpha) psi ~ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingFit {
    pub gamma: C64,
    pub alpha: C64,
    pub residual: f64,
}

pub fn squeezing_extract(psi: &StateVector) -> Result<SqueezingFit> {
    squeezing_extract_with(&Ladder::new(psi.dim()), psi)
}

/// gamma = sigma^2(a) / sigma(a^dag, a)^*, alpha = <a> - gamma <a^dag>.
pub fn squeezing_extract_with(ladder: &Ladder, psi: &StateVector) -> Result<SqueezingFit> {
    let cross = covariance(&ladder.a_dag, &ladder.a, psi)?;
    let spread = mean_square_deviation(&ladder.a, psi)?;
    let gamma = if cross.norm() < SQUEEZING_FLOOR {
        C64::new(0.0, 0.0)
    } else {
        spread / cross.conj()
    };
    let mean = expectation(&ladder.a, psi)?;
    let alpha = mean - gamma * mean.conj();
    Ok(SqueezingFit {
        gamma,
        alpha,
        residual: squeezing_residual(psi, gamma, alpha),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SqueezingTrack {
    pub gamma: Vec<C64>,
    pub alpha: Vec<C64>,
    pub residual: Vec<f64>,
}

impl SqueezingTrack {
    pub fn from_states(states: &[StateVector]) -> Result<Self> {
        let mut track = Self::default();
        if let Some(first) = states.first() {
            let ladder = Ladder::new(first.dim());
            for psi in states {
                let fit = squeezing_extract_with(&ladder, psi)?;
                track.gamma.push(fit.gamma);
                track.alpha.push(fit.alpha);
                track.residual.push(fit.residual);
            }
        }
        Ok(track)
    }
}

fn squeezing_ode_factor(policy: CorrelationPolicy, gamma: C64) -> C64 {
    match policy {
        CorrelationPolicy::Fixed(c) => c.value(),
        // for squeezed states sigma(a^dag, a)^* has the phase of gamma^*
        CorrelationPolicy::CovariancePhase(r) | CorrelationPolicy::SqueezedPhase(r) => {
            if gamma.norm() < SQUEEZING_FLOOR {
                C64::new(0.0, 0.0)
            } else {
                gamma.conj() / gamma.norm() * r
            }
        }
    }
}

/// RK4 solution of d gamma / dt = -kappa gamma (1 + c gamma) on `t_grid` (starting at t = 0).
pub fn squeezing_ode_oracle(gamma0: C64, kappa: f64, policy: CorrelationPolicy, t_grid: &[f64]) -> Result<Vec<C64>> {
    if !(gamma0.norm() < 1.0) {
        return Err(Error::Domain(format!("|gamma0| must be < 1, got {}", gamma0.norm())));
    }
    let rhs = |g: C64| -kappa * g * (C64::new(1.0, 0.0) + squeezing_ode_factor(policy, g) * g);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    let mut g = gamma0;
    for &target in t_grid {
        if target < t {
            return Err(Error::Domain("time grid must be non-decreasing and start at t >= 0".into()));
        }
        let span = target - t;
        let n = (span / 1e-3).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for _ in 0..n {
            let k1 = rhs(g);
            let k2 = rhs(g + k1 * (0.5 * h));
            let k3 = rhs(g + k2 * (0.5 * h));
            let k4 = rhs(g + k3 * h);
            g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        t = target;
        out.push(g);
    }
    Ok(out)
}

/// Ensemble drift of sigma^2(L) at a pure state for hermitian L: -2 (1 + Re c) sigma^2(L)^2.
pub fn hermitian_rate_prediction(c: C64, psi: &StateVector, l: &Operator) -> Result<f64> {
    if !l.is_hermitian() {
        return Err(Error::Domain("localization rate prediction needs a hermitian operator".into()));
    }
    if c.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("|c| must be <= 1, got {}", c.norm())));
    }
    let s2 = mean_square_deviation(l, psi)?;
    Ok(-2.0 * (1.0 + c.re) * s2 * s2)
}

/// The three non-negative terms whose sum, times -kappa, is the deterministic part of d sigma^2(a):
/// `sigma^2`, `(sigma^2 - |s|)^2` and `2 sigma^2 |s| (1 + Re(c s / |s|))` with `s = sigma(a^dag, a)`.
pub fn annihilation_drift_decomposition(psi: &StateVector, c: C64) -> Result<(f64, f64, f64)> {
    if c.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("|c| must be <= 1, got {}", c.norm())));
    }
    let ladder = Ladder::new(psi.dim());
    let s2 = mean_square_deviation(&ladder.a, psi)?;
    let s = covariance(&ladder.a_dag, &ladder.a, psi)?;
    let m = s.norm();
    let term3 = if m == 0.0 {
        0.0
    } else {
        2.0 * s2 * m * (1.0 + (c * s / m).re)
    };
    Ok((s2, (s2 - m).powi(2), term3))
}

/// `sigma^2 + sigma^4 + |s|^2 + 2 sigma^2 Re(c s)`, the same drift written without the decomposition.
pub fn annihilation_drift_bracket(psi: &StateVector, c: C64) -> Result<f64> {
    let ladder = Ladder::new(psi.dim());
    let s2 = mean_square_deviation(&ladder.a, psi)?;
    let s = covariance(&ladder.a_dag, &ladder.a, psi)?;
    Ok(s2 + s2 * s2 + s.norm_sqr() + 2.0 * s2 * (c * s).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_state, fock_state, squeezed_state, SqueezedParams};
    use crate::noise::{increment_from_normals, RngStream};
    use crate::sde::{drift, diffusion_vector, run_trajectory, ChannelSet, Observable, RecordOptions, SdeConfig};
    use nalgebra::{DMatrix, DVector, SymmetricEigen};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn squeezed(dim: usize, gamma: C64, alpha: C64) -> StateVector {
        squeezed_state(dim, SqueezedParams::new(gamma, alpha).unwrap()).unwrap()
    }

    #[test]
    fn kicked_hamiltonian_examples() {
        let p = KickedOscillatorParams::chaotic();
        let dim = 12;
        let on = kicked_hamiltonian(&p, dim, 0.5);
        assert!(on.is_hermitian());
        assert!(!on.is_diagonal());
        assert!((on.matrix()[(1, 0)] - c(0.0, 2.0)).norm() < 1e-15);
        let off = kicked_hamiltonian(&p, dim, 1.5);
        assert!(off.is_diagonal());
        assert!((off.matrix()[(3, 3)] - c(3.0, 0.0)).norm() < 1e-15);
        assert!(p.pulse_on(1.98 + 0.1));
        assert!(!p.pulse_on(0.98));
        let quiet = KickedOscillatorParams { beta0: 0.0, chi: 0.0, ..p };
        assert_eq!(kicked_hamiltonian(&quiet, dim, 0.5), Operator::zeros(dim));
    }

    #[test]
    fn kicked_propagators_follow_pulses() {
        let p = KickedOscillatorParams::chaotic();
        let h = KickedHamiltonian::new(p, 10, 0.01).unwrap();
        assert!(h.at(0.005).nnz() > h.at(0.985).nnz());
        assert!(h.propagator(0.005, 0.02).is_none());
        let u = h.propagator(0.985, 0.01).unwrap();
        assert!(u.is_diagonal());
        assert!(KickedHamiltonian::new(p, 10, 0.03).is_err());
    }

    #[test]
    fn scaling_examples() {
        let p = KickedOscillatorParams::chaotic();
        assert_eq!(apply_scaling(&p, 1.0).unwrap(), p);
        let s = apply_scaling(&p, 2.0).unwrap();
        assert!((s.kappa - 0.25).abs() < 1e-15);
        assert!((s.chi - 0.125).abs() < 1e-15);
        assert!((s.tau1 - 1.96).abs() < 1e-15);
        assert_eq!(s.beta0, 2.0);
        assert_eq!(s.lambda_scale, 2.0);
        assert!(apply_scaling(&p, 0.5).is_err());
    }

    #[test]
    fn squeezing_extract_examples() {
        let fit = squeezing_extract(&squeezed(80, c(0.6, 0.0), c(0.0, 0.0))).unwrap();
        assert!((fit.gamma - c(0.6, 0.0)).norm() < 1e-8, "{}", fit.gamma);
        assert!(fit.residual < 1e-8, "{}", fit.residual);

        let fit = squeezing_extract(&coherent_state(40, c(2.0, 0.0)).unwrap()).unwrap();
        assert_eq!(fit.gamma, c(0.0, 0.0));
        assert!((fit.alpha - c(2.0, 0.0)).norm() < 1e-8);
        assert!(fit.residual < 1e-8);

        let fit = squeezing_extract(&fock_state(30, 24).unwrap()).unwrap();
        assert!(fit.residual > 1.0, "{}", fit.residual);

        let gamma = C64::from_polar(0.45, -0.8);
        let alpha = c(0.7, 0.4);
        let fit = squeezing_extract(&squeezed(80, gamma, alpha)).unwrap();
        assert!((fit.gamma - gamma).norm() < 1e-8);
        assert!((fit.alpha - alpha).norm() < 1e-8);
    }

    #[test]
    fn squeezing_ode_examples() {
        let g = squeezing_ode_oracle(c(0.5, 0.0), 1.0, CorrelationPolicy::qsd(), &[1.0]).unwrap();
        assert!((g[0] - c(0.5 * (-1.0f64).exp(), 0.0)).norm() < 1e-10);

        let grid: Vec<f64> = (0..=20).map(|k| 0.1 * k as f64).collect();
        let g = squeezing_ode_oracle(c(0.5, 0.0), 1.3, CorrelationPolicy::SqueezedPhase(1.0), &grid).unwrap();
        for (t, gt) in grid.iter().zip(&g) {
            let e = (-1.3 * t).exp();
            let exact = 0.5 * e / (1.0 + 0.5 - 0.5 * e);
            assert!((gt - c(exact, 0.0)).norm() < 1e-8);
        }

        let g = squeezing_ode_oracle(c(0.0, 0.0), 1.0, CorrelationPolicy::SqueezedPhase(1.0), &grid).unwrap();
        assert!(g.iter().all(|x| *x == c(0.0, 0.0)));
        assert!(squeezing_ode_oracle(c(1.0, 0.0), 1.0, CorrelationPolicy::qsd(), &grid).is_err());
    }

    #[test]
    fn hermitian_rate_examples() {
        let plus = StateVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let n = number(3);
        assert!((hermitian_rate_prediction(c(0.0, 0.0), &plus, &n).unwrap() + 0.125).abs() < 1e-14);
        assert!((hermitian_rate_prediction(c(1.0, 0.0), &plus, &n).unwrap() + 0.25).abs() < 1e-14);
        assert!(hermitian_rate_prediction(c(-1.0, 0.0), &plus, &n).unwrap().abs() < 1e-14);
        assert!(hermitian_rate_prediction(c(0.0, 0.0), &plus, &annihilation(3)).is_err());

        let cs: Vec<f64> = (0..=40).map(|k| -1.0 + 0.05 * k as f64).collect();
        let rates: Vec<f64> = cs
            .iter()
            .map(|&x| hermitian_rate_prediction(c(x, 0.0), &plus, &n).unwrap().abs())
            .collect();
        let argmax = (0..rates.len()).max_by(|&i, &j| rates[i].total_cmp(&rates[j])).unwrap();
        let argmin = (0..rates.len()).min_by(|&i, &j| rates[i].total_cmp(&rates[j])).unwrap();
        assert_eq!(cs[argmax], 1.0);
        assert_eq!(cs[argmin], -1.0);
    }

    #[test]
    fn decomposition_examples() {
        let (t1, t2, t3) = annihilation_drift_decomposition(&coherent_state(40, c(1.5, -0.5)).unwrap(), c(0.3, 0.2))
            .unwrap();
        assert!(t1.abs() < 1e-10 && t2.abs() < 1e-10 && t3.abs() < 1e-10);

        let fock = fock_state(30, 24).unwrap();
        for cc in [c(0.0, 0.0), c(1.0, 0.0), c(0.0, -1.0)] {
            let (t1, t2, t3) = annihilation_drift_decomposition(&fock, cc).unwrap();
            assert!((t1 - 24.0).abs() < 1e-10 && (t2 - 576.0).abs() < 1e-9 && t3 == 0.0);
        }

        let sq = squeezed(60, c(0.6, 0.0), c(0.0, 0.0));
        let ladder = Ladder::new(60);
        let s2 = mean_square_deviation(&ladder.a, &sq).unwrap();
        let s = covariance(&ladder.a_dag, &ladder.a, &sq).unwrap().norm();
        let (_, _, t3) = annihilation_drift_decomposition(&sq, c(1.0, 0.0)).unwrap();
        assert!((t3 - 4.0 * s2 * s).abs() < 1e-8);
        let scan: Vec<f64> = (0..360)
            .map(|k| {
                let cc = C64::from_polar(1.0, (k as f64).to_radians());
                annihilation_drift_decomposition(&sq, cc).unwrap().2
            })
            .collect();
        let argmax = (0..360).max_by(|&i, &j| scan[i].total_cmp(&scan[j])).unwrap();
        assert_eq!(argmax, 0);
        assert!(annihilation_drift_decomposition(&sq, c(1.0, 1.0)).is_err());
    }

    fn random_state(dim: usize, parts: &[f64]) -> StateVector {
        StateVector::new(DVector::from_fn(dim, |i, _| c(parts[2 * i], parts[2 * i + 1]))).unwrap()
    }

    proptest! {
        #[test]
        fn decomposition_matches_bracket(
            parts in proptest::collection::vec(-1.0f64..1.0, 24),
            r in 0.0f64..=1.0,
            phi in 0.0f64..std::f64::consts::TAU,
        ) {
            let psi = random_state(12, &parts);
            let cc = C64::from_polar(r, phi);
            let (t1, t2, t3) = annihilation_drift_decomposition(&psi, cc).unwrap();
            let bracket = annihilation_drift_bracket(&psi, cc).unwrap();
            prop_assert!(t1 >= -1e-10 && t2 >= -1e-10 && t3 >= -1e-10);
            prop_assert!((t1 + t2 + t3 - bracket).abs() <= 1e-10 * bracket.abs().max(1.0));
        }
    }

    /// Nodes and weights of the n-point Gauss rule for the standard normal density.
    fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        (0..n)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect()
    }

    /// Expected change per unit time of `f` over one Euler-Maruyama step with renormalization,
    /// integrated over the two Gaussian draws by quadrature.
    fn expected_rate(
        psi: &StateVector,
        channel: &LindbladChannel,
        cc: C64,
        dt: f64,
        f: impl Fn(&StateVector) -> f64,
    ) -> f64 {
        let v = drift(psi, &Operator::zeros(psi.dim()), std::slice::from_ref(channel)).unwrap();
        let b = diffusion_vector(psi, channel).unwrap();
        let rule = gauss_hermite(12);
        let mut mean = 0.0;
        for &(g1, w1) in &rule {
            for &(g2, w2) in &rule {
                let dz = increment_from_normals(cc, dt, g1, g2);
                let next = psi.amplitudes() + &v * C64::new(dt, 0.0) + &b * dz;
                mean += w1 * w2 * f(&StateVector::new(next).unwrap());
            }
        }
        (mean - f(psi)) / dt
    }

    #[test]
    fn bracket_is_the_ensemble_drift_of_sigma2() {
        let dim = 40;
        let a = annihilation(dim);
        let channel = LindbladChannel::new(a.clone(), CorrelationPolicy::qsd());
        let states = [
            squeezed(dim, C64::from_polar(0.3, 0.7), c(0.5, -0.2)),
            StateVector::superposition(&[
                (c(1.0, 0.0), &fock_state(dim, 3).unwrap()),
                (c(0.5, 0.5), &fock_state(dim, 5).unwrap()),
            ])
            .unwrap(),
        ];
        for psi in &states {
            for cc in [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), C64::from_polar(0.6, 2.0)] {
                let measured =
                    expected_rate(psi, &channel, cc, 1e-6, |p| mean_square_deviation(&a, p).unwrap());
                let predicted = -annihilation_drift_bracket(psi, cc).unwrap();
                assert!(
                    (measured - predicted).abs() < 1e-3 * predicted.abs(),
                    "c = {cc}: {measured} vs {predicted}"
                );
            }
        }
    }

    #[test]
    fn hermitian_prediction_is_the_ensemble_drift() {
        let n = number(8);
        let channel = LindbladChannel::new(n.clone(), CorrelationPolicy::qsd());
        let psi = StateVector::from_vec(
            [0.5, 0.3, 0.6, 0.1, 0.2, 0.0, 0.4, 0.1].iter().map(|&x| c(x, 0.1 * x)).collect(),
        )
        .unwrap();
        let scale = hermitian_rate_prediction(c(0.0, 0.0), &psi, &n).unwrap().abs();
        for cc in [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0)] {
            let measured = expected_rate(&psi, &channel, cc, 1e-6, |p| mean_square_deviation(&n, p).unwrap());
            let predicted = hermitian_rate_prediction(cc, &psi, &n).unwrap();
            assert!(
                (measured - predicted).abs() < 1e-4 * scale,
                "c = {cc}: {measured} vs {predicted}"
            );
        }
    }

    #[test]
    fn squeezed_states_stay_squeezed() {
        let dim = 40;
        let kappa = 1.0;
        let psi0 = squeezed(dim, C64::from_polar(0.4, 0.5), c(0.6, 0.2));
        let ladder = Ladder::new(dim);
        let obs = [Observable::Squeezing(crate::sde::SqueezingPart::Residual, ladder)];
        let cfg = SdeConfig::new(1e-3 / kappa).unwrap();
        for policy in [
            CorrelationPolicy::qsd(),
            CorrelationPolicy::fixed(c(0.0, 1.0)).unwrap(),
            CorrelationPolicy::fixed(c(-1.0, 0.0)).unwrap(),
            CorrelationPolicy::CovariancePhase(1.0),
            CorrelationPolicy::SqueezedPhase(1.0),
        ] {
            let set = ChannelSet::single(damping_channel(dim, kappa, policy).unwrap());
            let mut rng = RngStream::new(8, 1);
            let opts = RecordOptions { every: 20, keep_states: false };
            let rec =
                run_trajectory(&psi0, 2.0, &Operator::zeros(dim), &set, &cfg, &mut rng, &obs, opts).unwrap();
            let worst = rec.series(0).into_iter().fold(0.0f64, f64::max);
            assert!(worst < 1e-3, "{policy}: residual {worst}");
        }
    }

    #[test]
    fn extracted_gamma_follows_ode() {
        let dim = 30;
        let kappa = 1.0;
        let gamma0 = c(0.5, 0.0);
        let psi0 = squeezed(dim, gamma0, c(0.0, 0.0));
        let cfg = SdeConfig::new(1e-3).unwrap();
        let policy = CorrelationPolicy::SqueezedPhase(1.0);
        let set = ChannelSet::single(damping_channel(dim, kappa, policy).unwrap());
        let mut rng = RngStream::new(21, 0);
        let opts = RecordOptions { every: 100, keep_states: true };
        let rec = run_trajectory(&psi0, 2.0, &Operator::zeros(dim), &set, &cfg, &mut rng, &[], opts).unwrap();
        let track = SqueezingTrack::from_states(&rec.states).unwrap();
        let oracle = squeezing_ode_oracle(gamma0, kappa, policy, &rec.times).unwrap();
        for ((g, o), t) in track.gamma.iter().zip(&oracle).zip(&rec.times) {
            assert!((g - o).norm() <= 2e-2 * o.norm(), "t = {t}: {g} vs {o}");
        }
    }
}
