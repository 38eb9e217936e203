//! Single-mode Wigner functions, `ħ = 2` (vacuum quadrature variance 1).
//!
//! `W(x, p) = (1/2π) Tr[ρ D(β) Π D(β)†]` with `β = (x + ip)/2` and parity
//! `Π = diag((−1)ⁿ)`. Since `D(β) Π D(β)† = D(2β) Π`, each grid point needs
//! one displacement matrix, built from the closed-form Laguerre elements so
//! no truncated operator exponential is involved.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::SingleModeDensity;

pub const BOUNDARY_LIMIT: f64 = 1e-8;

/// Generalized Laguerre polynomials `L_0^{(k)}(x) … L_{n-1}^{(k)}(x)`.
pub fn laguerre_table(n: usize, k: usize, x: f64) -> Vec<f64> {
    let mut l = Vec::with_capacity(n);
    if n == 0 {
        return l;
    }
    let k = k as f64;
    l.push(1.0);
    if n > 1 {
        l.push(1.0 + k - x);
    }
    for j in 1..n.saturating_sub(1) {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * l[j] - (jf + k) * l[j - 1]) / (jf + 1.0);
        l.push(next);
    }
    l
}

/// `⟨m|D(α)|n⟩` for `m, n < c`.
pub fn displacement_matrix(alpha: Complex64, c: usize) -> DMatrix<Complex64> {
    let x = alpha.norm_sqr();
    let env = (-x / 2.0).exp();
    // ln n! for the √(n!/m!) prefactor
    let mut lnf = vec![0.0; c];
    for n in 1..c {
        lnf[n] = lnf[n - 1] + (n as f64).ln();
    }
    let mut d = DMatrix::<Complex64>::zeros(c, c);
    let mut apow = Complex64::new(1.0, 0.0);
    let mut mpow = Complex64::new(1.0, 0.0);
    for k in 0..c {
        let lag = laguerre_table(c - k, k, x);
        for (n, ln) in lag.iter().enumerate() {
            let m = n + k;
            let pref = (0.5 * (lnf[n] - lnf[m])).exp() * env * ln;
            d[(m, n)] = apow * pref;
            if k > 0 {
                // ⟨n|D(α)|m⟩ = conj⟨m|D(−α)|n⟩
                d[(n, m)] = (mpow * pref).conj();
            }
        }
        apow *= alpha;
        mpow *= -alpha;
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { min: -6.0, max: 6.0, points: 201 }
    }
}

impl GridSpec {
    pub fn axis(&self) -> Vec<f64> {
        let h = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.min + k as f64 * h).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    /// `self`, widened symmetrically (same spacing) until it reaches
    /// `|mean| + 6σ` along the widest quadrature direction of `rho`.
    pub fn covering(&self, rho: &SingleModeDensity) -> GridSpec {
        let q = quadrature_moments(rho);
        let reach = q.mean.0.hypot(q.mean.1) + 6.0 * q.max_std();
        let half = (reach - 1e-9).max(-self.min).max(self.max).ceil();
        if -self.min >= half && self.max >= half {
            return *self;
        }
        let h = self.spacing();
        let steps = (2.0 * half / h).ceil() as usize;
        GridSpec { min: -half, max: -half + steps as f64 * h, points: steps + 1 }
    }
}

/// First and second moments of `x = a + a†`, `p = −i(a − a†)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureMoments {
    pub mean: (f64, f64),
    /// `[[Vx, Cxp], [Cxp, Vp]]` with the symmetrized cross term
    pub cov: [[f64; 2]; 2],
}

impl QuadratureMoments {
    pub fn max_std(&self) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let tr = 0.5 * (a + d);
        let det = a * d - b * b;
        (tr + (tr * tr - det).max(0.0).sqrt()).max(0.0).sqrt()
    }
}

pub fn quadrature_moments(rho: &SingleModeDensity) -> QuadratureMoments {
    let c = rho.dim();
    let tr = rho.trace();
    let mut a = Complex64::new(0.0, 0.0);
    let mut a2 = Complex64::new(0.0, 0.0);
    let mut n = 0.0;
    for k in 0..c {
        let kf = k as f64;
        n += kf * rho.rho[(k, k)].re;
        if k >= 1 {
            a += rho.rho[(k, k - 1)] * kf.sqrt();
        }
        if k >= 2 {
            a2 += rho.rho[(k, k - 2)] * (kf * (kf - 1.0)).sqrt();
        }
    }
    let (a, a2, n) = (a / tr, a2 / tr, n / tr);
    let (x, p) = (2.0 * a.re, 2.0 * a.im);
    let vx = 2.0 * a2.re + 2.0 * n + 1.0 - x * x;
    let vp = -2.0 * a2.re + 2.0 * n + 1.0 - p * p;
    let cxp = 2.0 * a2.im - x * p;
    QuadratureMoments { mean: (x, p), cov: [[vx, cxp], [cxp, vp]] }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `values[i * p.len() + j] = W(x[i], p[j])`
    pub values: Vec<f64>,
    /// largest discarded imaginary part
    pub max_imag: f64,
}

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p.len() + j]
    }

    pub fn cell(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.p[1] - self.p[0])
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell()
    }

    pub fn max_boundary(&self) -> f64 {
        let (nx, np) = (self.x.len(), self.p.len());
        let mut m: f64 = 0.0;
        for i in 0..nx {
            for j in 0..np {
                if i == 0 || j == 0 || i == nx - 1 || j == np - 1 {
                    m = m.max(self.at(i, j).abs());
                }
            }
        }
        m
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Wigner function at one phase-space point.
pub fn wigner_point(rho: &SingleModeDensity, x: f64, p: f64) -> Complex64 {
    let c = rho.dim();
    let d = displacement_matrix(Complex64::new(x, p), c);
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..c {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in 0..c {
            acc += rho.rho[(m, n)] * d[(n, m)] * sign;
        }
    }
    acc / (2.0 * PI)
}

pub fn wigner(rho: &SingleModeDensity, xs: &[f64], ps: &[f64]) -> WignerGrid {
    let raw: Vec<Complex64> =
        xs.par_iter().flat_map_iter(|&x| ps.iter().map(move |&p| wigner_point(rho, x, p))).collect();
    WignerGrid {
        x: xs.to_vec(),
        p: ps.to_vec(),
        max_imag: raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
        values: raw.iter().map(|z| z.re).collect(),
    }
}

pub fn wigner_on(rho: &SingleModeDensity, spec: &GridSpec) -> WignerGrid {
    let axis = spec.axis();
    wigner(rho, &axis, &axis)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    pub volume: f64,
    pub max_boundary: f64,
    pub cell: f64,
}

/// `Σ max(0, −W) Δx Δp`, refusing grids that cut off the state.
pub fn negativity(grid: &WignerGrid) -> Result<NegativityResult> {
    let max_boundary = grid.max_boundary();
    if max_boundary >= BOUNDARY_LIMIT {
        return Err(Error::GridBoundary { max_boundary, limit: BOUNDARY_LIMIT });
    }
    let cell = grid.cell();
    let volume = grid.values.iter().map(|w| (-w).max(0.0)).sum::<f64>() * cell;
    Ok(NegativityResult { volume, max_boundary, cell })
}
