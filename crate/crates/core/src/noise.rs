//! Complex noise increments with a prescribed correlation factor.
//!
//! A continuous unraveling is fixed by the second moments of its noise:
//! `E|dzeta|^2 = dt` and `E dzeta^2 = c dt` with `|c| <= 1`. One increment is
//! built from two independent standard normals, rotated so that its square
//! carries the phase of `c`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hilbert::C64;

const UNIT_DISK_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

/// Noise correlation factor `c`, `E dzeta^2 = c dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationFactor(C64);

impl CorrelationFactor {
    pub fn new(value: C64) -> Result<Self> {
        if !value.re.is_finite() || !value.im.is_finite() || value.norm() > 1.0 + UNIT_DISK_TOL {
            return Err(Error::Domain(format!(
                "correlation factor must lie in the closed unit disk, got {value}"
            )));
        }
        Ok(Self(value))
    }

    /// Quantum state diffusion, c = 0.
    pub const QSD: Self = Self(C64::new(0.0, 0.0));
    /// Real noise, c = 1.
    pub const REAL: Self = Self(C64::new(1.0, 0.0));
    /// Imaginary noise, c = -1.
    pub const IMAGINARY: Self = Self(C64::new(-1.0, 0.0));

    pub fn value(self) -> C64 {
        self.0
    }
}

/// One complex noise increment, in units of sqrt(time).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseIncrement(pub C64);

/// Per-trajectory random stream: ChaCha8 seeded with `seed`, stream `stream_id`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time step must be positive, got {dt}")))
    }
}

/// `dzeta = e^{i arg(c)/2} (sqrt((1+|c|)/2) g1 + i sqrt((1-|c|)/2) g2) sqrt(dt)`.
///
/// Two normals are always drawn so that streams stay aligned across policies.
pub fn sample_increment(c: CorrelationFactor, dt: f64, rng: &mut RngStream) -> Result<NoiseIncrement> {
    check_dt(dt)?;
    let g1 = rng.standard_normal();
    let g2 = rng.standard_normal();
    Ok(NoiseIncrement(increment_from_normals(c.value(), dt, g1, g2)))
}

pub(crate) fn increment_from_normals(c: C64, dt: f64, g1: f64, g2: f64) -> C64 {
    let modulus = c.norm().min(1.0);
    let rotation = if modulus > 0.0 {
        C64::from_polar(1.0, 0.5 * c.arg())
    } else {
        C64::new(1.0, 0.0)
    };
    let re = ((1.0 + modulus) / 2.0).sqrt() * g1;
    let im = ((1.0 - modulus) / 2.0).sqrt() * g2;
    rotation * C64::new(re, im) * dt.sqrt()
}

/// `c = sum alpha_n^2 / sum |alpha_n|^2` for `dzeta ~ sum alpha_n dW_n`.
pub fn correlation_from_alphas(alphas: &[C64]) -> Result<CorrelationFactor> {
    let denom: f64 = alphas.iter().map(|a| a.norm_sqr()).sum();
    if denom == 0.0 {
        return Err(Error::Domain("at least one Wiener coefficient must be nonzero".into()));
    }
    let num: C64 = alphas.iter().map(|a| a * a).sum();
    CorrelationFactor::new(num / denom)
}

pub fn is_unitary(m: &DMatrix<C64>, tol: f64) -> bool {
    m.is_square() && (m.adjoint() * m - DMatrix::identity(m.nrows(), m.ncols())).camax() < tol
}

/// `c_jk = sum_i beta_ij beta_ik c_i`.
pub fn correlation_matrix(betas: &DMatrix<C64>, cs: &[CorrelationFactor]) -> Result<DMatrix<C64>> {
    if !is_unitary(betas, UNITARY_TOL) {
        return Err(Error::Domain("mixing matrix beta is not unitary".into()));
    }
    let j = betas.nrows();
    if cs.len() != j {
        return Err(Error::DimensionMismatch { expected: j, found: cs.len() });
    }
    let mut out = DMatrix::zeros(j, j);
    for row in 0..j {
        for col in row..j {
            let v: C64 = (0..j).map(|i| betas[(i, row)] * betas[(i, col)] * cs[i].value()).sum();
            out[(row, col)] = v;
            out[(col, row)] = v;
        }
    }
    Ok(out)
}

/// True iff every correlation factor vanishes (to 1e-12), the necessary
/// condition for invariance under unitary mixing of the Lindblad operators.
pub fn check_unitary_invariance(cs: &[CorrelationFactor]) -> bool {
    cs.iter().all(|c| c.value().norm() < UNIT_DISK_TOL)
}

/// Sampler for J jointly correlated increments with `E dzeta_j dzeta_k^* = delta_jk dt`
/// and `E dzeta_j dzeta_k = c_jk dt`.
///
/// The real vector (Re dzeta, Im dzeta) has covariance
/// `[[Re(1+C), Im C], [Im C, Re(1-C)]] / 2`; it is factored through its
/// symmetric eigendecomposition so semidefinite cases (|c| = 1) are allowed.
#[derive(Clone, Debug)]
pub struct CorrelatedNoise {
    correlations: DMatrix<C64>,
    factor: DMatrix<f64>,
}

impl CorrelatedNoise {
    pub fn new(correlations: DMatrix<C64>) -> Result<Self> {
        let j = correlations.nrows();
        if !correlations.is_square() || j == 0 {
            return Err(Error::Domain("correlation matrix must be square and non-empty".into()));
        }
        if (&correlations - correlations.transpose()).camax() > UNIT_DISK_TOL {
            return Err(Error::Domain("correlation matrix must be symmetric".into()));
        }
        let mut cov = DMatrix::<f64>::zeros(2 * j, 2 * j);
        for r in 0..j {
            for s in 0..j {
                let c = correlations[(r, s)];
                let delta = if r == s { 1.0 } else { 0.0 };
                cov[(r, s)] = 0.5 * (delta + c.re);
                cov[(j + r, j + s)] = 0.5 * (delta - c.re);
                cov[(r, j + s)] = 0.5 * c.im;
                cov[(j + s, r)] = 0.5 * c.im;
            }
        }
        let eig = SymmetricEigen::new(cov);
        if eig.eigenvalues.min() < -1e-10 {
            return Err(Error::Domain(
                "correlation matrix is not realizable by Wiener increments".into(),
            ));
        }
        let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        Ok(Self {
            correlations,
            factor: &eig.eigenvectors * roots,
        })
    }

    /// Builds the sampler for `c_jk = sum_i beta_ij beta_ik c_i`.
    pub fn from_mixing(betas: &DMatrix<C64>, cs: &[CorrelationFactor]) -> Result<Self> {
        Self::new(correlation_matrix(betas, cs)?)
    }

    pub fn channels(&self) -> usize {
        self.correlations.nrows()
    }

    pub fn correlations(&self) -> &DMatrix<C64> {
        &self.correlations
    }

    pub fn sample(&self, dt: f64, rng: &mut RngStream) -> Result<Vec<NoiseIncrement>> {
        check_dt(dt)?;
        let j = self.channels();
        let g = DVector::from_fn(2 * j, |_, _| rng.standard_normal());
        let x = &self.factor * g;
        let sdt = dt.sqrt();
        Ok((0..j)
            .map(|k| NoiseIncrement(C64::new(x[k], x[j + k]) * sdt))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    struct Moments {
        mean: C64,
        abs2: f64,
        square: C64,
    }

    fn moments(cf: C64, dt: f64, n: usize, seed: u64) -> Moments {
        let cf = CorrelationFactor::new(cf).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let (mut mean, mut abs2, mut square) = (C64::new(0.0, 0.0), 0.0, C64::new(0.0, 0.0));
        for _ in 0..n {
            let NoiseIncrement(z) = sample_increment(cf, dt, &mut rng).unwrap();
            mean += z;
            abs2 += z.norm_sqr();
            square += z * z;
        }
        let n = n as f64;
        Moments {
            mean: mean / n,
            abs2: abs2 / n,
            square: square / n,
        }
    }

    #[test]
    fn real_noise_is_real_gaussian() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..100 {
            let z = sample_increment(CorrelationFactor::REAL, 0.01, &mut rng).unwrap().0;
            assert_eq!(z.im, 0.0);
        }
        let m = moments(c(1.0, 0.0), 0.01, 200_000, 11);
        assert!((m.abs2 - 0.01).abs() < 5e-3 * 0.01 * 2.0);
    }

    #[test]
    fn qsd_noise_uses_two_wiener_processes() {
        let mut a = RngStream::new(9, 4);
        let mut b = RngStream::new(9, 4);
        let dt = 0.04;
        let z = sample_increment(CorrelationFactor::QSD, dt, &mut a).unwrap().0;
        let (g1, g2) = (b.standard_normal(), b.standard_normal());
        let expect = c(g1, g2) * (dt / 2.0).sqrt();
        assert!((z - expect).norm() < 1e-15);
    }

    #[test]
    fn imaginary_unit_correlation() {
        let mut a = RngStream::new(5, 1);
        let mut b = RngStream::new(5, 1);
        let dt = 0.25;
        let z = sample_increment(CorrelationFactor::new(c(0.0, 1.0)).unwrap(), dt, &mut a).unwrap().0;
        let g1 = b.standard_normal();
        let expect = C64::from_polar(1.0, PI / 4.0) * g1 * dt.sqrt();
        assert!((z - expect).norm() < 1e-14);

        let n = 1_000_000;
        let m = moments(c(0.0, 1.0), 1.0, n, 21);
        assert!((m.square - c(0.0, 1.0)).norm() < 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn rejects_out_of_disk_and_bad_dt() {
        assert!(matches!(CorrelationFactor::new(c(1.0, 0.1)), Err(Error::Domain(_))));
        assert!(matches!(
            sample_increment(CorrelationFactor::QSD, 0.0, &mut RngStream::new(0, 0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn correlation_from_alpha_examples() {
        assert_eq!(correlation_from_alphas(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap().value(), c(1.0, 0.0));
        let qsd = correlation_from_alphas(&[c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        assert!(qsd.value().norm() < 1e-15);
        let s = 1.0 / 3f64.sqrt();
        let three = [
            c(s, 0.0),
            C64::from_polar(s, PI / 3.0),
            C64::from_polar(s, -PI / 3.0),
        ];
        let cf = correlation_from_alphas(&three).unwrap();
        assert!(cf.value().norm() < 1e-15, "{}", cf.value());
        assert!(check_unitary_invariance(&[cf]));
        assert!(matches!(correlation_from_alphas(&[c(0.0, 0.0); 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn correlation_matrix_examples() {
        let cs = [
            CorrelationFactor::new(c(0.3, 0.1)).unwrap(),
            CorrelationFactor::new(c(-0.5, 0.0)).unwrap(),
            CorrelationFactor::new(c(0.0, 0.9)).unwrap(),
        ];
        let id = DMatrix::<C64>::identity(3, 3);
        let m = correlation_matrix(&id, &cs).unwrap();
        assert_eq!(m, DMatrix::from_diagonal(&DVector::from_iterator(3, cs.iter().map(|c| c.value()))));

        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)])
            .map(|x| x * FRAC_1_SQRT_2);
        let ones = [CorrelationFactor::REAL; 2];
        let m = correlation_matrix(&h, &ones).unwrap();
        // brute-force loop over the defining sum
        let mut brute = DMatrix::<C64>::zeros(2, 2);
        for j in 0..2 {
            for k in 0..2 {
                for i in 0..2 {
                    brute[(j, k)] += h[(i, j)] * h[(i, k)] * ones[i].value();
                }
            }
        }
        assert!((&m - &brute).camax() < 1e-15);
        assert!((m - DMatrix::identity(2, 2)).camax() < 1e-15);

        let zeros = [CorrelationFactor::QSD; 2];
        let u = DMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.8), c(0.6, 0.0)]);
        assert_eq!(correlation_matrix(&u, &zeros).unwrap(), DMatrix::zeros(2, 2));

        let bad = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(correlation_matrix(&bad, &zeros), Err(Error::Domain(_))));
    }

    #[test]
    fn unitary_invariance_check() {
        assert!(check_unitary_invariance(&[CorrelationFactor::QSD; 2]));
        assert!(!check_unitary_invariance(&[CorrelationFactor::REAL]));
        let tiny = [
            CorrelationFactor::new(c(1e-15, 0.0)).unwrap(),
            CorrelationFactor::new(c(-1e-14, 0.0)).unwrap(),
        ];
        assert!(check_unitary_invariance(&tiny));
    }

    #[test]
    fn determinism_is_bit_exact() {
        let cf = CorrelationFactor::new(c(0.2, -0.7)).unwrap();
        let draw = |seed, id| {
            let mut rng = RngStream::new(seed, id);
            (0..64).map(|_| sample_increment(cf, 1e-3, &mut rng).unwrap().0).collect::<Vec<_>>()
        };
        assert_eq!(draw(42, 7), draw(42, 7));
        assert_ne!(draw(42, 7), draw(42, 8));
        assert_ne!(draw(42, 7), draw(43, 7));
    }

    #[test]
    fn moments_over_unit_disk_grid() {
        let n = 1_000_000;
        let dt = 0.01;
        let grid = [
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(-1.0, 0.0),
            c(0.0, 1.0),
            c(0.0, -1.0),
            C64::from_polar(1.0, 2.0),
            C64::from_polar(0.5, -1.0),
            c(0.3, 0.3),
        ];
        for (i, cf) in grid.into_iter().enumerate() {
            let m = moments(cf, dt, n, 100 + i as u64);
            assert!(m.mean.norm() < 5e-3 * dt.sqrt(), "{cf}: mean {}", m.mean);
            assert!((m.abs2 - dt).abs() < 5e-3 * dt, "{cf}: |dz|^2 {}", m.abs2);
            assert!((m.square - cf * dt).norm() < 5e-3 * dt, "{cf}: dz^2 {}", m.square);
        }
    }

    #[test]
    fn joint_sampler_reproduces_correlation_matrix() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)])
            .map(|x| x * FRAC_1_SQRT_2);
        let cs = [
            CorrelationFactor::new(c(0.0, 1.0)).unwrap(),
            CorrelationFactor::new(c(0.5, 0.0)).unwrap(),
        ];
        let sampler = CorrelatedNoise::from_mixing(&h, &cs).unwrap();
        let target = sampler.correlations().clone();
        let mut rng = RngStream::new(77, 0);
        let n = 400_000;
        let mut sq = DMatrix::<C64>::zeros(2, 2);
        let mut herm = DMatrix::<C64>::zeros(2, 2);
        for _ in 0..n {
            let z = sampler.sample(1.0, &mut rng).unwrap();
            for j in 0..2 {
                for k in 0..2 {
                    sq[(j, k)] += z[j].0 * z[k].0;
                    herm[(j, k)] += z[j].0 * z[k].0.conj();
                }
            }
        }
        let sq = sq / C64::new(n as f64, 0.0);
        let herm = herm / C64::new(n as f64, 0.0);
        assert!((sq - target).camax() < 0.01);
        assert!((herm - DMatrix::identity(2, 2)).camax() < 0.01);
    }

    #[test]
    fn joint_sampler_rejects_unrealizable_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)]);
        assert!(CorrelatedNoise::new(m).is_err());
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(CorrelatedNoise::new(diag).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn correlation_stays_in_unit_disk(
            alphas in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..=6)
        ) {
            let alphas: Vec<C64> = alphas.into_iter().map(|(a, b)| c(a, b)).collect();
            if alphas.iter().any(|a| a.norm_sqr() > 0.0) {
                let cf = correlation_from_alphas(&alphas).unwrap();
                prop_assert!(cf.value().norm() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn correlation_matrix_is_symmetric(
            theta in 0.0f64..6.3, phi in 0.0f64..6.3,
            c1 in (0.0f64..1.0, 0.0f64..6.3), c2 in (0.0f64..1.0, 0.0f64..6.3),
        ) {
            let u = DMatrix::from_row_slice(2, 2, &[
                C64::from_polar(theta.cos(), phi), C64::from_polar(theta.sin(), 0.0),
                C64::from_polar(-theta.sin(), 0.0), C64::from_polar(theta.cos(), -phi),
            ]);
            let cs = [
                CorrelationFactor::new(C64::from_polar(c1.0, c1.1)).unwrap(),
                CorrelationFactor::new(C64::from_polar(c2.0, c2.1)).unwrap(),
            ];
            let m = correlation_matrix(&u, &cs).unwrap();
            prop_assert_eq!(m[(0, 1)], m[(1, 0)]);
        }
    }
}
