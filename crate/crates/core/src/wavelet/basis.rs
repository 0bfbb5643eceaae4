#![allow(clippy::excessive_precision, clippy::approx_constant)]

use crate::error::{Error, Result};

// Daubechies scaling filters (decomposition lowpass), minimum phase, sum √2.
const DB1: [f64; 2] = [0.7071067811865475244008, 0.7071067811865475244008];
const DB2: [f64; 4] = [
    -0.1294095225512603811744,
    0.2241438680420133810260,
    0.8365163037378079055753,
    0.4829629131445341433749,
];
const DB3: [f64; 6] = [
    0.03522629188570953660274,
    -0.08544127388202666169282,
    -0.1350110200102545886964,
    0.4598775021184915700952,
    0.8068915093110925764945,
    0.3326705529500826159985,
];
const DB4: [f64; 8] = [
    -0.01059740178506903210488,
    0.03288301166688519973541,
    0.03084138183556076362722,
    -0.1870348117190930840796,
    -0.02798376941685985421141,
    0.6308807679298589078817,
    0.7148465705529156470899,
    0.2303778133088965008633,
];
const DB5: [f64; 10] = [
    0.003335725285473771277998,
    -0.01258075199908199946851,
    -0.006241490212798274274191,
    0.07757149384004571352313,
    -0.03224486958463837464848,
    -0.2422948870663820318626,
    0.1384281459013207315054,
    0.7243085284377729277281,
    0.6038292697971896705401,
    0.1601023979741929144807,
];
const DB6: [f64; 12] = [
    -0.001077301085308479564853,
    0.004777257510945510639636,
    0.0005538422011614961392519,
    -0.03158203931748602956508,
    0.02752286553030572862554,
    0.09750160558732304910234,
    -0.1297668675672619355623,
    -0.2262646939654398200763,
    0.3152503517091976290860,
    0.7511339080210953506789,
    0.4946238903984530856772,
    0.1115407433501094636213,
];

/// Orthogonal Daubechies filter bank.
///
/// Analysis computes `lo[k] = Σ_j dec_lo[j]·x[2k+j]` and likewise for `hi`;
/// synthesis is the transpose of analysis, which for these filters is also
/// its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletBasis {
    name: String,
    dec_lo: Vec<f64>,
    dec_hi: Vec<f64>,
    rec_lo: Vec<f64>,
    rec_hi: Vec<f64>,
}

impl WaveletBasis {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dec_lo(&self) -> &[f64] {
        &self.dec_lo
    }

    pub fn dec_hi(&self) -> &[f64] {
        &self.dec_hi
    }

    pub fn rec_lo(&self) -> &[f64] {
        &self.rec_lo
    }

    pub fn rec_hi(&self) -> &[f64] {
        &self.rec_hi
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }

    /// Number of vanishing moments of the wavelet.
    pub fn vanishing_moments(&self) -> usize {
        self.dec_lo.len() / 2
    }
}

pub fn make_basis(name: &str) -> Result<WaveletBasis> {
    let lo: &[f64] = match name {
        "db1" | "haar" => &DB1,
        "db2" => &DB2,
        "db3" => &DB3,
        "db4" => &DB4,
        "db5" => &DB5,
        "db6" => &DB6,
        _ => return Err(Error::UnknownBasis(name.to_string())),
    };
    let len = lo.len();
    // Quadrature mirror: g[j] = (-1)^j h[L-1-j].
    let hi: Vec<f64> = (0..len)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * lo[len - 1 - j]
        })
        .collect();
    Ok(WaveletBasis {
        name: if name == "haar" { "db1".into() } else { name.to_string() },
        dec_lo: lo.to_vec(),
        rec_lo: lo.iter().rev().copied().collect(),
        rec_hi: hi.iter().rev().copied().collect(),
        dec_hi: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NAMES: [&str; 6] = ["db1", "db2", "db3", "db4", "db5", "db6"];

    #[test]
    fn haar_filters() {
        let b = make_basis("db1").unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.dec_lo()[0] - r).abs() < 1e-16 && (b.dec_lo()[1] - r).abs() < 1e-16);
        assert!((b.dec_hi()[0] - r).abs() < 1e-16 && (b.dec_hi()[1] + r).abs() < 1e-16);
    }

    #[test]
    fn db4_has_eight_taps() {
        assert_eq!(make_basis("db4").unwrap().filter_len(), 8);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(make_basis("sym4"), Err(Error::UnknownBasis(_))));
    }

    #[test]
    fn orthonormality_and_qmf() {
        for name in NAMES {
            let b = make_basis(name).unwrap();
            let (h, g) = (b.dec_lo(), b.dec_hi());
            let l = h.len();
            // Even shifts of h and g are orthonormal, and h ⟂ g at every even shift.
            for shift in (0..l).step_by(2) {
                let hh: f64 = (0..l - shift).map(|j| h[j] * h[j + shift]).sum();
                let gg: f64 = (0..l - shift).map(|j| g[j] * g[j + shift]).sum();
                let expect = if shift == 0 { 1.0 } else { 0.0 };
                assert!((hh - expect).abs() < 1e-12, "{name} hh shift {shift}: {hh}");
                assert!((gg - expect).abs() < 1e-12, "{name} gg shift {shift}: {gg}");
                let hg: f64 = (0..l - shift).map(|j| h[j] * g[j + shift]).sum();
                let gh: f64 = (0..l - shift).map(|j| g[j] * h[j + shift]).sum();
                assert!(hg.abs() < 1e-12 && gh.abs() < 1e-12, "{name} cross shift {shift}");
            }
            let sum: f64 = h.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn highpass_vanishing_moments() {
        for name in NAMES {
            let b = make_basis(name).unwrap();
            let k = b.vanishing_moments();
            for p in 0..k {
                let m: f64 = b
                    .dec_hi()
                    .iter()
                    .enumerate()
                    .map(|(j, g)| g * (j as f64).powi(p as i32))
                    .sum();
                let scale = (b.filter_len() as f64).powi(p as i32);
                assert!(m.abs() < 1e-10 * scale, "{name} moment {p} = {m}");
            }
        }
    }
}
