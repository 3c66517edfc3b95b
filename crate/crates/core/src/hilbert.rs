//! Truncated Fock-space toolkit: state vectors, dense operators, expectation
//! values, quantum covariances and the initial states used by the experiments.
//!
//! All Hamiltonians are stored with hbar = 1. Operators keep their dense
//! matrix and a compressed row list of the nonzero entries; products with
//! vectors and matrices go through the compressed form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex64;

/// Tolerance of the hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Largest probability weight a constructed state may lose to truncation.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Largest population tolerated in the two highest Fock levels along a trajectory.
pub const LEAKAGE_TOL: f64 = 1e-6;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Normalized pure state |psi> over a truncated basis of dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::Domain(format!(
                "state dimension must be at least 2, got {}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Domain("state amplitudes have zero or non-finite norm".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn from_vec(amplitudes: Vec<C64>) -> Result<Self> {
        Self::new(DVector::from_vec(amplitudes))
    }

    /// Wraps amplitudes that the caller has already normalized.
    pub(crate) fn from_normalized(amplitudes: DVector<C64>) -> Self {
        Self { amplitudes }
    }

    /// Normalized superposition `sum_k w_k |psi_k>`.
    pub fn superposition(terms: &[(C64, &StateVector)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Domain("empty superposition".into()))?;
        let dim = first.1.dim();
        let mut acc = DVector::from_element(dim, ZERO);
        for (w, psi) in terms {
            check_dim(dim, psi.dim())?;
            acc.axpy(*w, &psi.amplitudes, ONE);
        }
        Self::new(acc)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&mut self) {
        let norm = self.amplitudes.norm();
        if norm > 0.0 {
            self.amplitudes.unscale_mut(norm);
        }
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn population(&self, n: usize) -> Result<f64> {
        self.amplitudes
            .get(n)
            .map(|c| c.norm_sqr())
            .ok_or(Error::IndexOutOfRange { index: n, dim: self.dim() })
    }

    /// Population of the two highest basis states (truncation leakage monitor).
    pub fn edge_population(&self) -> f64 {
        let dim = self.dim();
        self.amplitudes.rows(dim - 2, 2).iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Dense complex operator on the truncated basis.
#[derive(Clone, Debug)]
pub struct Operator {
    matrix: DMatrix<C64>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl Operator {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Domain(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::Domain("operator must have positive dimension".into()));
        }
        Ok(Self::compress(matrix))
    }

    fn compress(matrix: DMatrix<C64>) -> Self {
        let dim = matrix.nrows();
        let mut row_start = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = matrix[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self {
            matrix,
            row_start,
            cols,
            vals,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::compress(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::compress(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Number of stored nonzero entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn adjoint(&self) -> Operator {
        Self::compress(self.matrix.adjoint())
    }

    /// True iff max |O - O^dagger| < 1e-12.
    pub fn is_hermitian(&self) -> bool {
        let dim = self.dim();
        (0..dim).all(|i| {
            (i..dim).all(|j| (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm() < HERMITIAN_TOL)
        })
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim()).all(|i| {
            self.cols[self.row_start[i]..self.row_start[i + 1]]
                .iter()
                .all(|&j| j == i)
        })
    }

    pub fn apply(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        check_dim(self.dim(), v.len())?;
        let mut out = DVector::from_element(v.len(), ZERO);
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = O v`; dimensions must already agree.
    pub(crate) fn apply_into(&self, v: &DVector<C64>, out: &mut DVector<C64>) {
        for i in 0..self.dim() {
            let mut acc = ZERO;
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    pub fn apply_state(&self, psi: &StateVector) -> Result<DVector<C64>> {
        self.apply(psi.amplitudes())
    }

    /// `O m`
    pub fn left_mul(&self, m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        check_dim(self.dim(), m.nrows())?;
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..self.dim() {
            for k in self.row_start[i]..self.row_start[i + 1] {
                let (v, r) = (self.vals[k], self.cols[k]);
                for j in 0..m.ncols() {
                    out[(i, j)] += v * m[(r, j)];
                }
            }
        }
        Ok(out)
    }

    /// `m O`
    pub fn right_mul(&self, m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        check_dim(self.dim(), m.ncols())?;
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for r in 0..self.dim() {
            for k in self.row_start[r]..self.row_start[r + 1] {
                let (v, j) = (self.vals[k], self.cols[k]);
                for i in 0..m.nrows() {
                    out[(i, j)] += m[(i, r)] * v;
                }
            }
        }
        Ok(out)
    }

    /// `self * other`
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        Ok(Self::compress(self.left_mul(&other.matrix)?))
    }

    pub fn scale(&self, c: C64) -> Operator {
        Self::compress(self.matrix.map(|x| x * c))
    }

    pub fn plus(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self::compress(&self.matrix + &other.matrix))
    }

    /// `O + lambda * 1`
    pub fn shifted(&self, lambda: C64) -> Operator {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        Self::compress(m)
    }
}

/// exp(-i H dt) for hermitian `h`.
pub fn unitary_propagator(h: &Operator, dt: f64) -> Result<Operator> {
    if !h.is_hermitian() {
        return Err(Error::Domain("propagator requires a hermitian generator".into()));
    }
    if h.is_diagonal() {
        let diag: Vec<C64> = (0..h.dim())
            .map(|i| (C64::new(0.0, -dt) * h.matrix[(i, i)].re).exp())
            .collect();
        return Operator::from_diagonal(&diag);
    }
    let eig = SymmetricEigen::new(h.matrix.clone());
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| (C64::new(0.0, -dt) * e).exp()));
    let v = &eig.eigenvectors;
    Operator::from_matrix(v * phases * v.adjoint())
}

/// Ladder operator `a` with `a[n-1, n] = sqrt(n)`.
pub fn annihilation(dim: usize) -> Operator {
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::compress(m)
}

pub fn creation(dim: usize) -> Operator {
    annihilation(dim).adjoint()
}

pub fn number(dim: usize) -> Operator {
    Operator::compress(DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            ZERO
        }
    }))
}

/// The ladder operators of one truncated oscillator, built once and shared.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub a: Operator,
    pub a_dag: Operator,
    pub n: Operator,
}

impl Ladder {
    pub fn new(dim: usize) -> Self {
        Self {
            a: annihilation(dim),
            a_dag: creation(dim),
            n: number(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

/// Parameters of the squeezed state annihilated by `a - gamma a^dagger - alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezedParams {
    pub gamma: C64,
    pub alpha: C64,
}

impl SqueezedParams {
    pub fn new(gamma: C64, alpha: C64) -> Result<Self> {
        if !(gamma.norm() < 1.0) {
            return Err(Error::Domain(format!(
                "squeezing parameter must satisfy |gamma| < 1, got {gamma}"
            )));
        }
        Ok(Self { gamma, alpha })
    }
}

fn check_dim_at_least_two(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::Domain(format!("dimension must be at least 2, got {dim}")))
    } else {
        Ok(())
    }
}

pub fn fock_state(dim: usize, n: usize) -> Result<StateVector> {
    check_dim_at_least_two(dim)?;
    if n >= dim {
        return Err(Error::IndexOutOfRange { index: n, dim });
    }
    let mut amps = DVector::from_element(dim, ZERO);
    amps[n] = ONE;
    Ok(StateVector::from_normalized(amps))
}

/// Unnormalized amplitudes e^{-|alpha|^2/2} alpha^n / sqrt(n!) for n < dim, and
/// the probability weight at n >= dim.
fn coherent_amplitudes(dim: usize, alpha: C64) -> (Vec<C64>, f64) {
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        let mut amps = vec![ZERO; dim];
        amps[0] = ONE;
        return (amps, 0.0);
    }
    let (ln_r2, phase) = (r2.ln(), alpha.arg());
    let mut ln_fact = 0.0;
    let mut amps = Vec::with_capacity(dim);
    let mut tail = 0.0;
    let mut n = 0usize;
    loop {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let ln_w = n as f64 * ln_r2 - ln_fact - r2;
        if n < dim {
            amps.push(C64::from_polar((0.5 * ln_w).exp(), n as f64 * phase));
        } else {
            let w = ln_w.exp();
            tail += w;
            if n as f64 > r2 && w < 1e-300 + 1e-18 * tail {
                break;
            }
        }
        n += 1;
    }
    (amps, tail)
}

fn truncation_check(tail: f64, what: &str, dim: usize) -> Result<()> {
    if tail > TRUNCATION_TOL {
        Err(Error::Truncation(format!(
            "{what} loses probability {tail:.3e} outside dim = {dim} (limit {TRUNCATION_TOL:e})"
        )))
    } else {
        Ok(())
    }
}

pub fn coherent_state(dim: usize, alpha: C64) -> Result<StateVector> {
    check_dim_at_least_two(dim)?;
    let (amps, tail) = coherent_amplitudes(dim, alpha);
    truncation_check(tail, "coherent state", dim)?;
    StateVector::from_vec(amps)
}

/// Even cat state (|alpha> + |-alpha>) normalized on the truncated basis.
pub fn cat_state(dim: usize, alpha: C64) -> Result<StateVector> {
    check_dim_at_least_two(dim)?;
    let (plus, tail) = coherent_amplitudes(dim, alpha);
    truncation_check(tail, "cat state", dim)?;
    let (minus, _) = coherent_amplitudes(dim, -alpha);
    StateVector::from_vec(plus.iter().zip(&minus).map(|(p, m)| p + m).collect())
}

/// Squeezed state from the amplitude recurrence
/// `sqrt(n+1) c_{n+1} = alpha c_n + gamma sqrt(n) c_{n-1}`.
///
/// The recurrence is continued past the basis to measure the probability the
/// exact state would put outside it.
pub fn squeezed_state(dim: usize, params: SqueezedParams) -> Result<StateVector> {
    check_dim_at_least_two(dim)?;
    let SqueezedParams { gamma, alpha } = SqueezedParams::new(params.gamma, params.alpha)?;
    const WINDOW: usize = 16;
    const MAX_TERMS: usize = 1_000_000;

    let mut amps = vec![ZERO; dim];
    amps[0] = ONE;
    let (mut prev, mut cur) = (ZERO, ONE);
    let (mut inside, mut outside) = (1.0f64, 0.0f64);
    let mut recent = [0.0f64; WINDOW];
    let mut n = 0usize;
    loop {
        let next = (alpha * cur + gamma * (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        n += 1;
        let w = next.norm_sqr();
        if n < dim {
            amps[n] = next;
            inside += w;
        } else {
            outside += w;
        }
        recent[n % WINDOW] = w;
        prev = cur;
        cur = next;

        let scale = inside + outside;
        if scale > 1e200 {
            // keep the running recurrence in range
            let s = scale.sqrt();
            amps.iter_mut().for_each(|c| *c /= s);
            prev /= s;
            cur /= s;
            inside /= scale;
            outside /= scale;
            recent.iter_mut().for_each(|r| *r /= scale);
        }
        if n >= dim + WINDOW && recent.iter().sum::<f64>() < 1e-24 * (inside + outside) {
            break;
        }
        if n >= MAX_TERMS {
            return Err(Error::Truncation(format!(
                "squeezed state amplitudes did not decay within {MAX_TERMS} terms"
            )));
        }
    }
    truncation_check(outside / (inside + outside), "squeezed state", dim)?;
    StateVector::from_vec(amps)
}

/// ||(a - gamma a^dagger - alpha) psi|| evaluated on the truncated basis.
pub fn squeezing_residual(psi: &StateVector, gamma: C64, alpha: C64) -> f64 {
    let c = psi.amplitudes();
    let dim = c.len();
    (0..dim)
        .map(|n| {
            let lower = if n + 1 < dim {
                ((n + 1) as f64).sqrt() * c[n + 1]
            } else {
                ZERO
            };
            let raise = if n > 0 { (n as f64).sqrt() * c[n - 1] } else { ZERO };
            (lower - gamma * raise - alpha * c[n]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// <psi|O|psi>
pub fn expectation(op: &Operator, psi: &StateVector) -> Result<C64> {
    let o_psi = op.apply_state(psi)?;
    Ok(psi.amplitudes().dotc(&o_psi))
}

/// Quantum covariance sigma(A, B) = <A^dagger B> - <A^dagger><B>.
pub fn covariance(a: &Operator, b: &Operator, psi: &StateVector) -> Result<C64> {
    let a_psi = a.apply_state(psi)?;
    let b_psi = b.apply_state(psi)?;
    let amps = psi.amplitudes();
    let mean_a = amps.dotc(&a_psi);
    let mean_b = amps.dotc(&b_psi);
    Ok(a_psi.dotc(&b_psi) - mean_a.conj() * mean_b)
}

/// Quantum mean square deviation sigma^2(L) = sigma(L, L), real and non-negative.
pub fn mean_square_deviation(op: &Operator, psi: &StateVector) -> Result<f64> {
    let l_psi = op.apply_state(psi)?;
    let mean = psi.amplitudes().dotc(&l_psi);
    Ok(l_psi.norm_squared() - mean.norm_sqr())
}
