//! Density-matrix integration of the Lindblad master equation, used as the
//! reference for ensemble averages of the unravelings.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::hilbert::{Operator, StateVector, C64};
use crate::sde::Hamiltonian;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = -1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::Domain("density matrix must be square with dim >= 2".into()));
        }
        let rho = Self { matrix };
        rho.validate().map_err(Error::Integrator)?;
        Ok(rho)
    }

    pub fn pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self {
            matrix: v * v.adjoint(),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let m = &self.matrix;
        let asym = (m - m.adjoint()).camax();
        if !(asym <= HERMITIAN_TOL) {
            return Err(format!("density matrix not hermitian (deviation {asym:e})"));
        }
        let tr = m.trace();
        if !((tr - C64::new(1.0, 0.0)).norm() <= TRACE_TOL) {
            return Err(format!("density matrix trace {tr} differs from 1"));
        }
        let min = self.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min < POSITIVITY_TOL {
            return Err(format!("density matrix has negative eigenvalue {min:e}"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.component_mul(&self.matrix.transpose()).sum().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// tr(rho O)
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        check_dim(self.dim(), op.dim())?;
        Ok(op.left_mul(&self.matrix)?.trace())
    }

    pub fn population(&self, n: usize) -> Result<f64> {
        if n >= self.dim() {
            return Err(Error::IndexOutOfRange { index: n, dim: self.dim() });
        }
        Ok(self.matrix[(n, n)].re)
    }
}

fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().cloned().collect()
}

/// `-i[H, rho] + sum_j (L_j rho L_j^dag - 1/2 {L_j^dag L_j, rho})`
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Operator, channels: &[Operator]) -> Result<DMatrix<C64>> {
    let system = LindbladSystem::new(rho.dim(), channels)?;
    check_dim(rho.dim(), h.dim())?;
    system.rhs(&rho.matrix, h)
}

struct LindbladSystem<'a> {
    channels: &'a [Operator],
    adjoints: Vec<Operator>,
    decay: Vec<Operator>,
}

impl<'a> LindbladSystem<'a> {
    fn new(dim: usize, channels: &'a [Operator]) -> Result<Self> {
        let mut adjoints = Vec::with_capacity(channels.len());
        let mut decay = Vec::with_capacity(channels.len());
        for l in channels {
            check_dim(dim, l.dim())?;
            let ld = l.adjoint();
            decay.push(ld.compose(l)?);
            adjoints.push(ld);
        }
        Ok(Self { channels, adjoints, decay })
    }

    fn rhs(&self, rho: &DMatrix<C64>, h: &Operator) -> Result<DMatrix<C64>> {
        let mi = C64::new(0.0, -1.0);
        let mut out = (h.left_mul(rho)? - h.right_mul(rho)?) * mi;
        for ((l, ld), ldl) in self.channels.iter().zip(&self.adjoints).zip(&self.decay) {
            out += ld.right_mul(&l.left_mul(rho)?)?;
            out -= (ldl.left_mul(rho)? + ldl.right_mul(rho)?) * C64::new(0.5, 0.0);
        }
        Ok(out)
    }
}

/// Classical RK4 on the master equation, with H sampled at t, t + dt/2 and t + dt.
///
/// Returns `(t, rho)` at t = 0 and after every `record_every` steps; the
/// density-matrix invariants are checked at each output point.
pub fn evolve(
    rho0: &DensityMatrix,
    t_final: f64,
    h: &dyn Hamiltonian,
    channels: &[Operator],
    dt: f64,
    record_every: usize,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if record_every == 0 {
        return Err(Error::Domain("record stride must be at least one step".into()));
    }
    let n_steps = crate::sde::step_count(t_final, dt)?;
    check_dim(rho0.dim(), h.at(0.0).dim())?;
    let system = LindbladSystem::new(rho0.dim(), channels)?;

    let mut out = vec![(0.0, rho0.clone())];
    let mut rho = rho0.matrix.clone();
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let h0 = h.at(t);
        let hm = h.at(t + 0.5 * dt);
        let h1 = h.at(t + dt);
        let k1 = system.rhs(&rho, h0)?;
        let k2 = system.rhs(&(&rho + &k1 * half), hm)?;
        let k3 = system.rhs(&(&rho + &k2 * half), hm)?;
        let k4 = system.rhs(&(&rho + &k3 * full), h1)?;
        rho += (k1 + (k2 + k3) * two + k4) * sixth;
        if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Integrator(format!("non-finite density matrix at t = {t}")));
        }
        if (k + 1) % record_every == 0 {
            let state = DensityMatrix { matrix: rho.clone() };
            let t_out = (k + 1) as f64 * dt;
            state
                .validate()
                .map_err(|e| Error::Integrator(format!("at t = {t_out}: {e}")))?;
            out.push((t_out, state));
        }
    }
    Ok(out)
}

/// Trace distance between the final states integrated with `dt` and `dt / 2`.
pub fn halving_error(
    rho0: &DensityMatrix,
    t_final: f64,
    h: &dyn Hamiltonian,
    channels: &[Operator],
    dt: f64,
) -> Result<f64> {
    let n = crate::sde::step_count(t_final, dt)?.max(1);
    let coarse = evolve(rho0, t_final, h, channels, dt, n)?;
    let fine = evolve(rho0, t_final, h, channels, 0.5 * dt, 2 * n)?;
    let last = |v: Vec<(f64, DensityMatrix)>| v.into_iter().last().map(|(_, r)| r);
    let (a, b) = (last(coarse), last(fine));
    match (a, b) {
        (Some(a), Some(b)) => trace_distance(&a, &b),
        _ => Ok(0.0),
    }
}

/// `1/2 sum |eigenvalues(rho1 - rho2)|`
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    check_dim(rho1.dim(), rho2.dim())?;
    let diff = &rho1.matrix - &rho2.matrix;
    let d = 0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}
