//! Random input generators for the four benchmarks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::fft::Fft2;
use crate::error::{Error, Result};

/// Seeded generator for sample `index` of a run seeded with `seed`; every
/// sample gets its own stream so generation order does not matter.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GrfSpec {
    SquaredExponential { sigma: f64, length: f64 },
    PeriodicSpectral { tau: f64, alpha: f64 },
}

impl GrfSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::SquaredExponential { sigma, length } => sigma > 0.0 && length > 0.0,
            Self::PeriodicSpectral { tau, alpha } => tau > 0.0 && alpha.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid random field parameters {self:?}")));
        }
        Ok(())
    }
}

/// `(ζ, η)` of the Burgers initial condition, each uniform on `[0.5, 1.5]`.
pub fn sample_burgers_params(rng: &mut impl Rng) -> (f64, f64) {
    (rng.random_range(0.5..=1.5), rng.random_range(0.5..=1.5))
}

pub fn burgers_ic(zeta: f64, eta: f64, x: f64) -> f64 {
    (zeta * PI * x).cos() + (eta * PI * x).sin()
}

/// `u₀(x) = cos(ζπx) + sin(ηπx)` on `n` points of `[0, 1]`.
pub fn sample_burgers_ic(seed: u64, n: usize) -> (Vec<f64>, (f64, f64)) {
    let mut rng = sample_rng(seed, 0);
    let (z, e) = sample_burgers_params(&mut rng);
    let u = (0..n).map(|i| burgers_ic(z, e, i as f64 / (n - 1) as f64)).collect();
    (u, (z, e))
}

pub fn se_kernel(sigma: f64, length: f64, x: f64, y: f64) -> f64 {
    sigma * sigma * (-(x - y).powi(2) / (2.0 * length * length)).exp()
}

/// In-place lower Cholesky factor of a dense SPD matrix.
fn cholesky_dense(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// Squared-exponential Gaussian random field on fixed points, factored once.
#[derive(Clone, Debug)]
pub struct SeSampler {
    n: usize,
    factor: Vec<f64>,
    jitter: f64,
}

pub const JITTER_LADDER: [f64; 5] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

impl SeSampler {
    /// Factors `K + jσ²I`, trying each jitter `j` of the ladder in turn.
    pub fn new(points: &[f64], sigma: f64, length: f64) -> Result<Self> {
        GrfSpec::SquaredExponential { sigma, length }.validate()?;
        let n = points.len();
        for &j in &JITTER_LADDER {
            let mut k = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    k[a * n + b] = se_kernel(sigma, length, points[a], points[b]);
                }
                k[a * n + a] += j * sigma * sigma;
            }
            if cholesky_dense(&mut k, n) {
                return Ok(Self { n, factor: k, jitter: j });
            }
        }
        Err(Error::Factorization(*JITTER_LADDER.last().unwrap()))
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        (0..self.n)
            .map(|i| (0..=i).map(|k| self.factor[i * self.n + k] * z[k]).sum())
            .collect()
    }
}

/// One SE field on `n` equispaced points of `[0, 1]`.
pub fn sample_grf_se(n: usize, sigma: f64, length: f64, seed: u64) -> Result<Vec<f64>> {
    let pts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let s = SeSampler::new(&pts, sigma, length)?;
    Ok(s.sample(&mut sample_rng(seed, 0)))
}

/// `(α, β)` of the Poisson pair, each uniform on `[−2, 2]`.
pub fn sample_poisson_params(rng: &mut impl Rng) -> (f64, f64) {
    (rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0))
}

pub fn poisson_u(alpha: f64, beta: f64, x: f64, y: f64) -> f64 {
    alpha * (PI * x).sin() * (1.0 + (PI * y).cos()) + beta * (2.0 * PI * x).sin() * (1.0 - (2.0 * PI * y).cos())
}

/// Laplacian of [`poisson_u`].
pub fn poisson_f(alpha: f64, beta: f64, x: f64, y: f64) -> f64 {
    -alpha * PI * PI * (PI * x).sin() * (1.0 + 2.0 * (PI * y).cos())
        + 4.0 * beta * PI * PI * (2.0 * PI * x).sin() * (2.0 * (2.0 * PI * y).cos() - 1.0)
}

/// Source and solution on an `n × n` grid over `[−1, 1]²`, row-major in `x`.
pub fn sample_poisson_pair(alpha: f64, beta: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let c = |i: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    let mut f = Vec::with_capacity(n * n);
    let mut u = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (c(i), c(j));
            f.push(poisson_f(alpha, beta, x, y));
            // Boundary values are set exactly; sin(kπ) is not exactly zero
            // in floating point.
            let edge = i == 0 || j == 0 || i + 1 == n || j + 1 == n;
            u.push(if edge { 0.0 } else { poisson_u(alpha, beta, x, y) });
        }
    }
    (f, u)
}

/// Standard deviation of Fourier mode `k` (integer wavenumbers) of the
/// periodic field.
pub fn spectral_sigma(tau: f64, alpha: f64, k1: f64, k2: f64) -> f64 {
    tau.powf(alpha - 1.0) * (4.0 * PI * PI * (k1 * k1 + k2 * k2) + tau * tau).powf(-alpha / 2.0)
}

fn signed(k: usize, m: usize) -> f64 {
    if k <= m / 2 {
        k as f64
    } else {
        k as f64 - m as f64
    }
}

/// Periodic field on `(0, 1)²` sampled on an `m × m` periodic grid: white
/// noise is filtered by the spectral standard deviation, which makes the
/// spectrum Hermitian and the field real by construction.
pub fn sample_grf_periodic(m: usize, tau: f64, alpha: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    GrfSpec::PeriodicSpectral { tau, alpha }.validate()?;
    let fft = Fft2::new(m);
    let mut buf: Vec<Complex<f64>> = (0..m * m)
        .map(|_| Complex::new(rng.sample(StandardNormal), 0.0))
        .collect();
    fft.forward(&mut buf);
    let norm = 1.0 / m as f64;
    for a in 0..m {
        for b in 0..m {
            buf[a * m + b] *= norm * spectral_sigma(tau, alpha, signed(a, m), signed(b, m));
        }
    }
    fft.inverse_unnormalized(&mut buf);
    Ok(buf.iter().map(|c| c.re).collect())
}

/// Periodic field on an `n × n` grid with duplicated endpoints (`n − 1`
/// distinct points per axis).
pub fn sample_grf_periodic2d(n: usize, tau: f64, alpha: f64, seed: u64) -> Result<Vec<f64>> {
    let m = n - 1;
    let core = sample_grf_periodic(m, tau, alpha, &mut sample_rng(seed, 0))?;
    Ok(wrap_periodic(&core, m))
}

/// `m × m` periodic samples to `(m+1) × (m+1)` with the endpoint repeated.
pub fn wrap_periodic(core: &[f64], m: usize) -> Vec<f64> {
    let n = m + 1;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = core[(i % m) * m + (j % m)];
        }
    }
    out
}
