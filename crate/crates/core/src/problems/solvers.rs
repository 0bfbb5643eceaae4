//! Reference solvers producing ground truth for evaluation.
//!
//! All space-time outputs are row-major `[x, t]` on the output grid.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::fft::Fft2;
use crate::error::{Error, Result};
use crate::physics::BoundaryKind;

/// Solves a tridiagonal system in place; `rhs` becomes the solution.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    c[0] = upper[0] / b;
    rhs[0] /= b;
    for i in 1..n {
        b = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / b } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

fn check_finite(u: &[f64], step: usize, what: &str) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            epoch: step,
            detail: format!("{what} solver produced a non-finite state"),
        })
    }
}

/// Space-time refinement of the 1-D solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Fine spatial cells per output cell.
    pub space_refine: usize,
    /// Time steps per output frame.
    pub steps_per_frame: usize,
}

impl SolverConfig {
    pub fn burgers() -> Self {
        Self { space_refine: 4, steps_per_frame: 16 }
    }

    pub fn nagumo() -> Self {
        Self { space_refine: 4, steps_per_frame: 16 }
    }

    fn validate(&self) -> Result<()> {
        if self.space_refine == 0 || self.steps_per_frame == 0 {
            return Err(Error::InvalidArgument("solver refinement factors must be positive".into()));
        }
        Ok(())
    }
}

/// Viscous Burgers `u_t + (u²/2)_x = ν u_xx` on `[0, 1] × [0, 1]` with
/// homogeneous Dirichlet walls.
///
/// Second-order semi-implicit BDF in time (diffusion implicit, convection
/// extrapolated), central differences in space. The step is halved until the
/// advective Courant number stays below one half.
pub fn solve_burgers(
    u0: impl Fn(f64) -> f64,
    nu: f64,
    out_nx: usize,
    out_nt: usize,
    boundary: BoundaryKind,
    cfg: SolverConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if boundary != BoundaryKind::Dirichlet {
        return Err(Error::Config(format!("burgers reference solver supports dirichlet walls only, got {boundary:?}")));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument("viscosity must be positive".into()));
    }
    let mut steps = cfg.steps_per_frame;
    for _ in 0..8 {
        match burgers_attempt(&u0, nu, out_nx, out_nt, cfg.space_refine, steps)? {
            Some(u) => return Ok(u),
            None => steps *= 2,
        }
    }
    Err(Error::Divergence {
        epoch: 0,
        detail: "burgers step refinement did not satisfy the CFL bound".into(),
    })
}

fn burgers_attempt(
    u0: &impl Fn(f64) -> f64,
    nu: f64,
    out_nx: usize,
    out_nt: usize,
    refine: usize,
    steps_per_frame: usize,
) -> Result<Option<Vec<f64>>> {
    let n = (out_nx - 1) * refine + 1;
    let h = 1.0 / (n - 1) as f64;
    let dt = 1.0 / ((out_nt - 1) * steps_per_frame) as f64;
    let m = n - 2;
    let mut out = vec![0.0; out_nx * out_nt];
    for i in 0..out_nx {
        out[i * out_nt] = u0(i as f64 / (out_nx - 1) as f64);
    }
    let mut u: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i + 1 == n { 0.0 } else { u0(i as f64 * h) })
        .collect();
    let conv = |u: &[f64]| -> Vec<f64> {
        (1..n - 1)
            .map(|i| (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) / (4.0 * h))
            .collect()
    };
    let r = nu / (h * h);
    let solve = |a0: f64, rhs: &mut [f64]| {
        let lower = vec![-r; m];
        let upper = vec![-r; m];
        let diag = vec![a0 + 2.0 * r; m];
        thomas(&lower, &diag, &upper, rhs);
    };
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let total = (out_nt - 1) * steps_per_frame;
    for step in 1..=total {
        if u.iter().fold(0.0f64, |a, v| a.max(v.abs())) * dt / h > 0.5 {
            return Ok(None);
        }
        let nl = conv(&u);
        let mut rhs: Vec<f64>;
        match &prev {
            None => {
                rhs = (0..m).map(|k| u[k + 1] / dt - nl[k]).collect();
                solve(1.0 / dt, &mut rhs);
            }
            Some((up, nlp)) => {
                rhs = (0..m)
                    .map(|k| (4.0 * u[k + 1] - up[k + 1]) / (2.0 * dt) - 2.0 * nl[k] + nlp[k])
                    .collect();
                solve(1.5 / dt, &mut rhs);
            }
        }
        let mut next = vec![0.0; n];
        next[1..n - 1].copy_from_slice(&rhs);
        check_finite(&next, step, "burgers")?;
        prev = Some((std::mem::replace(&mut u, next), nl));
        if step % steps_per_frame == 0 {
            let j = step / steps_per_frame;
            for i in 0..out_nx {
                out[i * out_nt + j] = u[i * refine];
            }
        }
    }
    Ok(Some(out))
}

/// Nagumo `u_t = ε u_xx + u(1 − u)(u − α)` on `[0, 1] × [0, 1]`.
///
/// `u0` is sampled on the fine grid (`(out_nx − 1)·space_refine + 1`
/// points). Semi-implicit Euler: diffusion implicit, reaction explicit,
/// solved for the increment so constant equilibria are kept exactly.
pub fn solve_nagumo(
    u0: &[f64],
    epsilon: f64,
    alpha: f64,
    out_nx: usize,
    out_nt: usize,
    boundary: BoundaryKind,
    cfg: SolverConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = (out_nx - 1) * cfg.space_refine + 1;
    if u0.len() != n {
        return Err(Error::shape("solve_nagumo", &[n], &[u0.len()]));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("diffusion coefficient must be positive".into()));
    }
    let h = 1.0 / (n - 1) as f64;
    let dt = 1.0 / ((out_nt - 1) * cfg.steps_per_frame) as f64;
    let r = epsilon / (h * h);
    let react = |v: f64| v * (1.0 - v) * (v - alpha);
    let mut out = vec![0.0; out_nx * out_nt];
    for i in 0..out_nx {
        out[i * out_nt] = u0[i * cfg.space_refine];
    }
    let mut u = u0.to_vec();
    let total = (out_nt - 1) * cfg.steps_per_frame;
    match boundary {
        BoundaryKind::Dirichlet => {
            u[0] = 0.0;
            u[n - 1] = 0.0;
            let m = n - 2;
            let (lower, upper, diag) = (vec![-dt * r; m], vec![-dt * r; m], vec![1.0 + 2.0 * dt * r; m]);
            for step in 1..=total {
                let mut rhs: Vec<f64> = (1..n - 1)
                    .map(|i| dt * (r * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + react(u[i])))
                    .collect();
                thomas(&lower, &diag, &upper, &mut rhs);
                for (v, d) in u[1..n - 1].iter_mut().zip(&rhs) {
                    *v += d;
                }
                check_finite(&u, step, "nagumo")?;
                record(&mut out, &u, step, cfg, out_nx, out_nt);
            }
        }
        BoundaryKind::Neumann => {
            // Ghost-point reflection: the boundary rows couple to their
            // neighbour with twice the weight.
            let mut lower = vec![-dt * r; n];
            let mut upper = vec![-dt * r; n];
            let diag = vec![1.0 + 2.0 * dt * r; n];
            upper[0] = -2.0 * dt * r;
            lower[n - 1] = -2.0 * dt * r;
            lower[0] = 0.0;
            upper[n - 1] = 0.0;
            for step in 1..=total {
                let mut rhs: Vec<f64> = (0..n)
                    .map(|i| {
                        let lap = match i {
                            0 => 2.0 * (u[1] - u[0]),
                            _ if i == n - 1 => 2.0 * (u[n - 2] - u[n - 1]),
                            _ => u[i - 1] - 2.0 * u[i] + u[i + 1],
                        };
                        dt * (r * lap + react(u[i]))
                    })
                    .collect();
                thomas(&lower, &diag, &upper, &mut rhs);
                for (v, d) in u.iter_mut().zip(&rhs) {
                    *v += d;
                }
                check_finite(&u, step, "nagumo")?;
                record(&mut out, &u, step, cfg, out_nx, out_nt);
            }
        }
        BoundaryKind::Periodic => {
            return Err(Error::Config("nagumo reference solver supports dirichlet or neumann walls".into()));
        }
    }
    Ok(out)
}

fn record(out: &mut [f64], u: &[f64], step: usize, cfg: SolverConfig, out_nx: usize, out_nt: usize) {
    if step.is_multiple_of(cfg.steps_per_frame) {
        let j = step / cfg.steps_per_frame;
        for i in 0..out_nx {
            out[i * out_nt + j] = u[i * cfg.space_refine];
        }
    }
}

/// Allen–Cahn `u_t = εΔu + u − u³` on the periodic unit square.
///
/// Fourier–Galerkin in space; each step treats diffusion implicitly and the
/// reaction explicitly. `u0` holds `m × m` distinct periodic samples.
/// Returns `frames` snapshots spaced `frame_dt` apart (the first is `u0`),
/// each `m × m`.
pub fn solve_allen_cahn(u0: &[f64], m: usize, epsilon: f64, frame_dt: f64, frames: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if u0.len() != m * m {
        return Err(Error::shape("solve_allen_cahn", &[m, m], &[u0.len()]));
    }
    if !(step > 0.0 && frame_dt > 0.0 && epsilon >= 0.0) {
        return Err(Error::InvalidArgument("allen-cahn steps and coefficients must be positive".into()));
    }
    let per_frame = (frame_dt / step).round().max(1.0) as usize;
    let dt = frame_dt / per_frame as f64;
    let fft = Fft2::new(m);
    let signed = |k: usize| if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
    let denom: Vec<f64> = (0..m * m)
        .map(|p| {
            let (a, b) = (signed(p / m), signed(p % m));
            1.0 + dt * epsilon * 4.0 * PI * PI * (a * a + b * b)
        })
        .collect();
    let mut u = u0.to_vec();
    let mut out = Vec::with_capacity(frames);
    out.push(u.clone());
    let mut buf = vec![Complex::new(0.0, 0.0); m * m];
    for f in 1..frames {
        for s in 0..per_frame {
            for (b, &v) in buf.iter_mut().zip(&u) {
                *b = Complex::new(v + dt * (v - v * v * v), 0.0);
            }
            fft.forward(&mut buf);
            for (b, d) in buf.iter_mut().zip(&denom) {
                *b /= *d;
            }
            fft.inverse(&mut buf);
            for (v, b) in u.iter_mut().zip(&buf) {
                *v = b.re;
            }
            check_finite(&u, (f - 1) * per_frame + s, "allen-cahn")?;
        }
        out.push(u.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::samplers::{burgers_ic, sample_grf_periodic, sample_rng, SeSampler};

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, 1.0, -0.5, 2.0];
        let diag = [4.0, 5.0, 6.0, 7.0];
        let upper = [1.0, 0.5, 1.5, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b = [0.0; 4];
        for i in 0..4 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += lower[i] * x[i - 1];
            }
            if i < 3 {
                b[i] += upper[i] * x[i + 1];
            }
        }
        thomas(&lower, &diag, &upper, &mut b);
        for i in 0..4 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn burgers_self_convergence() {
        let ic = |x| burgers_ic(1.3, 0.7, x);
        let coarse = solve_burgers(ic, 0.1, 81, 81, BoundaryKind::Dirichlet, SolverConfig::burgers()).unwrap();
        let fine = solve_burgers(
            ic,
            0.1,
            81,
            81,
            BoundaryKind::Dirichlet,
            SolverConfig { space_refine: 8, steps_per_frame: 32 },
        )
        .unwrap();
        let e = rel(&coarse, &fine);
        assert!(e <= 1e-4, "{e}");
    }

    #[test]
    fn burgers_energy_decays() {
        let u = solve_burgers(|x| burgers_ic(0.9, 1.4, x), 0.1, 81, 81, BoundaryKind::Dirichlet, SolverConfig::burgers())
            .unwrap();
        let energy = |j: usize| (0..81).map(|i| u[i * 81 + j].powi(2)).sum::<f64>();
        for j in 1..80 {
            assert!(energy(j + 1) <= energy(j) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn burgers_rejects_other_walls() {
        let r = solve_burgers(|x| x, 0.1, 81, 81, BoundaryKind::Periodic, SolverConfig::burgers());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn nagumo_temporal_order() {
        let fine_pts: Vec<f64> = (0..257).map(|i| i as f64 / 256.0).collect();
        let u0 = SeSampler::new(&fine_pts, 0.1, 0.1).unwrap().sample(&mut sample_rng(5, 0));
        let run = |s| {
            solve_nagumo(&u0, 1.0, -0.5, 65, 65, BoundaryKind::Dirichlet, SolverConfig { space_refine: 4, steps_per_frame: s })
                .unwrap()
        };
        let (a, b, c) = (run(4), run(8), run(16));
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let ratio = d(&a, &b) / d(&b, &c);
        assert!((1.7..=2.3).contains(&ratio), "{ratio}");
    }

    #[test]
    fn nagumo_constant_states() {
        let one = vec![1.0; 257];
        let u = solve_nagumo(&one, 1.0, -0.5, 65, 65, BoundaryKind::Neumann, SolverConfig::nagumo()).unwrap();
        assert!(u.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let zero = vec![0.0; 257];
        let u = solve_nagumo(&zero, 1.0, -0.5, 65, 65, BoundaryKind::Dirichlet, SolverConfig::nagumo()).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn allen_cahn_bounded_and_consistent() {
        let m = 32;
        let u0 = sample_grf_periodic(m, 15.0, 1.0, &mut sample_rng(3, 0)).unwrap();
        let bound = u0.iter().fold(1.0f64, |a, v| a.max(v.abs())) + 0.05;
        let frames = solve_allen_cahn(&u0, m, 1e-3, 1.0, 6, 0.01).unwrap();
        assert_eq!(frames.len(), 6);
        for f in &frames {
            assert!(f.iter().all(|v| v.abs() <= bound));
        }
        let finer = solve_allen_cahn(&u0, m, 1e-3, 1.0, 6, 0.005).unwrap();
        assert!(rel(&frames[5], &finer[5]) < 2e-2);
    }

    #[test]
    fn allen_cahn_constant_equilibria() {
        for c in [1.0, -1.0, 0.0] {
            let u = vec![c; 16 * 16];
            let frames = solve_allen_cahn(&u, 16, 1e-3, 1.0, 3, 0.01).unwrap();
            assert!(frames[2].iter().all(|v| (v - c).abs() < 1e-12));
        }
    }

    #[test]
    fn allen_cahn_decays_single_mode() {
        // Small amplitude: the linearised equation gives
        // exp((1 − 4π²ε|k|²)t) growth of mode k.
        let m = 16;
        let eps = 0.05;
        let a = 1e-6;
        let u0: Vec<f64> = (0..m * m)
            .map(|p| a * (2.0 * PI * (p / m) as f64 / m as f64).cos())
            .collect();
        let frames = solve_allen_cahn(&u0, m, eps, 0.5, 2, 0.001).unwrap();
        let rate = 1.0 - 4.0 * PI * PI * eps;
        let expect = a * (rate * 0.5).exp();
        assert!((frames[1][0] / expect - 1.0).abs() < 2e-3, "{} vs {expect}", frames[1][0]);
    }
}
