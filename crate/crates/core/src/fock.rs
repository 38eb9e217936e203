//! Two optical modes in a truncated Fock basis.
//!
//! States are stored row-major over `(n0, n1)`: index `n0 * c + n1`. Nothing
//! here renormalizes implicitly; the probability lost to the cutoff is
//! reported as a norm deficit.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::linalg::{expm, SquareMatrix};
use crate::scalar::{cis, Scalar};

pub const MIN_CUTOFF: usize = 12;

/// Fock-space dimension per mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Cutoff(usize);

impl Cutoff {
    pub fn new(c: usize) -> Result<Self> {
        if c < MIN_CUTOFF {
            return Err(Error::CutoffTooSmall(c));
        }
        Ok(Cutoff(c))
    }

    /// `max(3N + 4, 12)`.
    pub fn for_photons(n: usize) -> Self {
        Cutoff((3 * n + 4).max(MIN_CUTOFF))
    }

    #[inline]
    pub fn dim(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Cutoff {
    type Error = Error;
    fn try_from(c: usize) -> Result<Self> {
        Cutoff::new(c)
    }
}

impl From<Cutoff> for usize {
    fn from(c: Cutoff) -> usize {
        c.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Zero,
    One,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::Zero => 0,
            Mode::One => 1,
        }
    }
}

impl TryFrom<usize> for Mode {
    type Error = Error;
    fn try_from(m: usize) -> Result<Self> {
        match m {
            0 => Ok(Mode::Zero),
            1 => Ok(Mode::One),
            _ => Err(Error::InvalidArgument(format!("mode must be 0 or 1, got {m}"))),
        }
    }
}

/// Single-mode amplitude vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeVector<T> {
    pub amps: Vec<Complex<T>>,
}

impl<T: Scalar> ModeVector<T> {
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.norm_sqr().value()
    }
}

/// `e^{-α²/2} αⁿ / √n!` for `n < c`.
pub fn coherent_amplitudes<T: Scalar>(alpha: T, c: Cutoff) -> ModeVector<T> {
    let c = c.dim();
    let mut amps = Vec::with_capacity(c);
    let mut a = (-(alpha * alpha).scale(0.5)).exp();
    amps.push(Complex::new(a, T::zero()));
    for n in 1..c {
        a *= alpha.scale(1.0 / (n as f64).sqrt());
        amps.push(Complex::new(a, T::zero()));
    }
    ModeVector { amps }
}

/// Squeezed vacuum with zero squeeze phase: entry `2m` is
/// `(−tanh r)^m √(2m)! / (2^m m! √cosh r)`, odd entries vanish.
pub fn squeezed_vacuum_amplitudes<T: Scalar>(r: T, c: Cutoff) -> ModeVector<T> {
    let c = c.dim();
    let mut amps = vec![Complex::new(T::zero(), T::zero()); c];
    let t = -r.tanh();
    let mut s = T::one() / r.cosh().sqrt();
    amps[0] = Complex::new(s, T::zero());
    let mut m = 1;
    while 2 * m < c {
        let k = 2.0 * m as f64;
        s *= t.scale((k * (k - 1.0)).sqrt() / k);
        amps[2 * m] = Complex::new(s, T::zero());
        m += 1;
    }
    ModeVector { amps }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState<T> {
    c: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Scalar> TwoModeState<T> {
    pub fn from_amps(c: usize, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != c * c {
            return Err(Error::LengthMismatch { expected: c * c, got: amps.len() });
        }
        Ok(TwoModeState { c, amps })
    }

    pub fn fock(n0: usize, n1: usize, c: usize) -> Result<Self> {
        if n0 >= c || n1 >= c {
            return Err(Error::IndexOutOfCutoff { n0, n1, cutoff: c });
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); c * c];
        amps[n0 * c + n1] = Complex::new(T::one(), T::zero());
        Ok(TwoModeState { c, amps })
    }

    pub fn vacuum(c: usize) -> Self {
        Self::fock(0, 0, c).expect("c > 0")
    }

    #[inline]
    pub fn cutoff(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn amp(&self, n0: usize, n1: usize) -> Complex<T> {
        self.amps[n0 * self.c + n1]
    }

    pub fn amps(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.norm_sqr().value()
    }

    pub fn renormalize(&self) -> Self {
        let k = T::one() / self.norm_sqr().sqrt();
        TwoModeState { c: self.c, amps: self.amps.iter().map(|a| Complex::new(a.re * k, a.im * k)).collect() }
    }

    /// Primal part of every amplitude.
    pub fn to_f64(&self) -> TwoModeState<f64> {
        TwoModeState { c: self.c, amps: self.amps.iter().map(|a| Complex64::new(a.re.value(), a.im.value())).collect() }
    }
}

pub fn tensor_product<T: Scalar>(mode0: &ModeVector<T>, mode1: &ModeVector<T>) -> Result<TwoModeState<T>> {
    if mode0.len() != mode1.len() {
        return Err(Error::LengthMismatch { expected: mode0.len(), got: mode1.len() });
    }
    let c = mode0.len();
    let mut amps = Vec::with_capacity(c * c);
    for a in &mode0.amps {
        for b in &mode1.amps {
            amps.push(*a * *b);
        }
    }
    Ok(TwoModeState { c, amps })
}

/// `|n0, n1⟩ → e^{i n_mode φ} |n0, n1⟩`.
pub fn phase_rotation<T: Scalar>(state: &TwoModeState<T>, mode: Mode, phi: T) -> TwoModeState<T> {
    let c = state.c;
    let phases: Vec<Complex<T>> = (0..c).map(|n| cis(phi.scale(n as f64))).collect();
    let mut amps = state.amps.clone();
    for n0 in 0..c {
        for n1 in 0..c {
            let n = if mode == Mode::Zero { n0 } else { n1 };
            amps[n0 * c + n1] *= phases[n];
        }
    }
    TwoModeState { c, amps }
}

#[derive(Clone, Debug)]
struct Block<T> {
    n: usize,
    lo: usize,
    size: usize,
    u: Vec<Complex<T>>,
}

/// Two-mode beamsplitter, precomputed per total-photon block.
///
/// `B(θ, φ) = exp(θ(e^{iψ} a₀†a₁ − e^{−iψ} a₀a₁†))` with `ψ = φ + π/2`: the
/// symmetric convention, where a balanced splitter at `φ = 0` reflects with
/// a factor `i`. Inside block `n` the hopping term `a₀†a₁` is real
/// tridiagonal in `n0`, so the exponential is `D exp(θK) D†` with
/// `K = A − Aᵀ` real and `D = diag(e^{i n0 ψ})`.
#[derive(Clone, Debug)]
pub struct Beamsplitter<T> {
    c: usize,
    blocks: Vec<Block<T>>,
}

/// Offset between the `φ` parameter and the hopping phase `ψ`.
pub const BS_PHASE_OFFSET: f64 = FRAC_PI_2;

impl<T: Scalar> Beamsplitter<T> {
    pub fn new(theta: T, phi: T, c: usize) -> Self {
        let psi = phi + T::from_f64(BS_PHASE_OFFSET);
        let phases: Vec<Complex<T>> = (0..c).map(|d| cis(psi.scale(d as f64))).collect();
        let mut blocks = Vec::with_capacity(2 * c - 1);
        for n in 0..(2 * c - 1) {
            let lo = n.saturating_sub(c - 1);
            let hi = n.min(c - 1);
            let size = hi - lo + 1;
            let mut k = SquareMatrix::<T>::zeros(size);
            for j in 0..size.saturating_sub(1) {
                let n0 = (lo + j) as f64;
                let a = ((n0 + 1.0) * (n as f64 - n0)).sqrt();
                k.set(j + 1, j, theta.scale(a));
                k.set(j, j + 1, theta.scale(-a));
            }
            let e = expm(&k);
            let mut u = Vec::with_capacity(size * size);
            for j in 0..size {
                for l in 0..size {
                    let w = if j >= l { phases[j - l] } else { phases[l - j].conj() };
                    let x = e.get(j, l);
                    u.push(Complex::new(w.re * x, w.im * x));
                }
            }
            blocks.push(Block { n, lo, size, u });
        }
        Beamsplitter { c, blocks }
    }

    pub fn apply(&self, state: &TwoModeState<T>) -> TwoModeState<T> {
        assert_eq!(state.c, self.c, "beamsplitter built for a different cutoff");
        let c = self.c;
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; c * c];
        let mut input = Vec::with_capacity(c);
        for b in &self.blocks {
            input.clear();
            for k in 0..b.size {
                let n0 = b.lo + k;
                input.push(state.amps[n0 * c + (b.n - n0)]);
            }
            for j in 0..b.size {
                let row = &b.u[j * b.size..(j + 1) * b.size];
                let mut acc = zero;
                for (u, x) in row.iter().zip(&input) {
                    acc += *u * *x;
                }
                let n0 = b.lo + j;
                out[n0 * c + (b.n - n0)] = acc;
            }
        }
        TwoModeState { c, amps: out }
    }

    /// Block unitary for total photon number `n`, indexed by the mode-0 count
    /// offset from the block's lowest admissible `n0`.
    pub fn block(&self, n: usize) -> Option<(usize, DMatrix<Complex64>)> {
        let b = self.blocks.get(n)?;
        let m = DMatrix::from_fn(b.size, b.size, |j, l| {
            let z = b.u[j * b.size + l];
            Complex64::new(z.re.value(), z.im.value())
        });
        Some((b.lo, m))
    }
}

pub fn beamsplitter<T: Scalar>(state: &TwoModeState<T>, theta: T, phi: T) -> TwoModeState<T> {
    Beamsplitter::new(theta, phi, state.c).apply(state)
}

/// The beamsplitter generator as a dense `c² × c²` matrix.
pub fn dense_beamsplitter_generator(theta: f64, phi: f64, c: usize) -> DMatrix<Complex64> {
    let d = c * c;
    let w = Complex64::from_polar(1.0, phi + BS_PHASE_OFFSET);
    let mut g = DMatrix::<Complex64>::zeros(d, d);
    for n0 in 0..c - 1 {
        for n1 in 1..c {
            // a₀†a₁ |n0, n1⟩ = √((n0+1) n1) |n0+1, n1−1⟩
            let a = ((n0 + 1) as f64 * n1 as f64).sqrt() * theta;
            let to = (n0 + 1) * c + (n1 - 1);
            let from = n0 * c + n1;
            g[(to, from)] += w * a;
            g[(from, to)] -= w.conj() * a;
        }
    }
    g
}

/// Dense reference path: full matrix exponential of the generator.
pub fn dense_beamsplitter(theta: f64, phi: f64, c: usize) -> DMatrix<Complex64> {
    dense_beamsplitter_generator(theta, phi, c).exp()
}

pub fn apply_dense(u: &DMatrix<Complex64>, state: &TwoModeState<f64>) -> TwoModeState<f64> {
    let v = nalgebra::DVector::from_column_slice(&state.amps);
    let out = u * v;
    TwoModeState { c: state.c, amps: out.as_slice().to_vec() }
}

/// `|⟨N1, N2|ψ⟩|²`.
pub fn coincidence_probability<T: Scalar>(state: &TwoModeState<T>, n1: usize, n2: usize) -> Result<T> {
    if n1 >= state.c || n2 >= state.c {
        return Err(Error::IndexOutOfCutoff { n0: n1, n1: n2, cutoff: state.c });
    }
    Ok(state.amp(n1, n2).norm_sqr())
}

/// Photon-number distribution of one mode.
pub fn photon_marginal<T: Scalar>(state: &TwoModeState<T>, mode: Mode) -> Vec<T> {
    let c = state.c;
    let mut p = vec![T::zero(); c];
    for n0 in 0..c {
        for n1 in 0..c {
            let n = if mode == Mode::Zero { n0 } else { n1 };
            p[n] += state.amps[n0 * c + n1].norm_sqr();
        }
    }
    p
}

/// `(⟨n⟩, ⟨n²⟩)` of one mode, unnormalized if the state has a deficit.
pub fn number_moments<T: Scalar>(state: &TwoModeState<T>, mode: Mode) -> (T, T) {
    let p = photon_marginal(state, mode);
    let mut m1 = T::zero();
    let mut m2 = T::zero();
    for (n, pn) in p.into_iter().enumerate() {
        let n = n as f64;
        m1 += pn.scale(n);
        m2 += pn.scale(n * n);
    }
    (m1, m2)
}

/// Reduced density matrix of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeDensity {
    pub rho: DMatrix<Complex64>,
}

impl SingleModeDensity {
    pub fn pure(v: &ModeVector<f64>) -> Self {
        let n = v.len();
        SingleModeDensity { rho: DMatrix::from_fn(n, n, |i, j| v.amps[i] * v.amps[j].conj()) }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.rho - self.rho.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian to 1e-12, trace in `[1 − 1e-3, 1 + 1e-12]`, eigenvalues ≥ −1e-10.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::Validation(format!("density not Hermitian (max |ρ−ρ†| = {herm:e})")));
        }
        let tr = self.trace();
        if !(1.0 - 1e-3..=1.0 + 1e-12).contains(&tr) {
            return Err(Error::Validation(format!("density trace {tr} outside [0.999, 1]")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -1e-10 {
            return Err(Error::Validation(format!("density has eigenvalue {lmin:e}")));
        }
        Ok(())
    }
}

pub fn partial_trace(state: &TwoModeState<f64>, keep: Mode) -> SingleModeDensity {
    let c = state.c;
    let a = |kept: usize, other: usize| match keep {
        Mode::Zero => state.amps[kept * c + other],
        Mode::One => state.amps[other * c + kept],
    };
    let rho = DMatrix::from_fn(c, c, |m, n| (0..c).map(|k| a(m, k) * a(n, k).conj()).sum());
    SingleModeDensity { rho }
}
