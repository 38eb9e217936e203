//! Small dense real matrices and their exponential.
//!
//! Photon-number blocks of the beamsplitter generator are at most `c × c`
//! with `c ≤ 19` here, so plain row-major storage and an `O(n³)` product are
//! all that is needed.

use crate::scalar::Scalar;

/// Row-major square matrix over a [`Scalar`].
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn scaled(&self, k: T) -> Self {
        SquareMatrix { n: self.n, data: self.data.iter().map(|&x| x * k).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.value() == 0.0 && a == T::zero() {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Max column sum of primal values.
    pub fn norm1(&self) -> f64 {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j).value().abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    fn add_identity_scaled(&mut self, k: f64) {
        for i in 0..self.n {
            let idx = i * self.n + i;
            self.data[idx] += T::from_f64(k);
        }
    }
}

/// Target truncation error of the scaled Taylor series.
const TAYLOR_TOL: f64 = 1e-18;
const SCALED_NORM: f64 = 0.5;

/// `exp(M)` by scaling and squaring with a Horner-evaluated Taylor series.
///
/// `M` is scaled by `2^-s` until its 1-norm is at most 0.5, the series is
/// truncated once the next term bound drops under 1e-18, then the result
/// is squared `s` times. All arithmetic goes through `T`, so dual numbers
/// pick up the exact derivative of the approximant.
pub fn expm<T: Scalar>(m: &SquareMatrix<T>) -> SquareMatrix<T> {
    let n = m.dim();
    if n == 0 {
        return SquareMatrix::zeros(0);
    }
    let norm = m.norm1();
    let s = if norm > SCALED_NORM { (norm / SCALED_NORM).log2().ceil() as u32 } else { 0 };
    let a = m.scaled(T::from_f64(0.5f64.powi(s as i32)));
    let a_norm = norm * 0.5f64.powi(s as i32);

    // smallest q with a_norm^(q+1)/(q+1)! < tol
    let mut q = 1usize;
    let mut bound = a_norm;
    loop {
        bound *= a_norm / (q + 1) as f64;
        if bound < TAYLOR_TOL || q >= 30 {
            break;
        }
        q += 1;
    }

    // I + A/1 (I + A/2 (I + ... (I + A/q)))
    let mut acc = SquareMatrix::identity(n);
    for k in (1..=q).rev() {
        acc = a.matmul(&acc).scaled(T::from_f64(1.0 / k as f64));
        acc.add_identity_scaled(1.0);
    }
    for _ in 0..s {
        acc = acc.matmul(&acc);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual8;

    #[test]
    fn rotation_generator_exponentiates_to_rotation() {
        for &t in &[0.0, 0.3, 1.7, -4.2, 12.0] {
            let mut k = SquareMatrix::<f64>::zeros(2);
            k.set(0, 1, -t);
            k.set(1, 0, t);
            let e = expm(&k);
            assert!((e.get(0, 0) - t.cos()).abs() < 1e-13);
            assert!((e.get(0, 1) + t.sin()).abs() < 1e-13);
            assert!((e.get(1, 0) - t.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn diagonal_and_nilpotent_cases() {
        let mut d = SquareMatrix::<f64>::zeros(3);
        d.set(0, 0, 1.0);
        d.set(1, 1, -2.0);
        d.set(2, 2, 7.5);
        let e = expm(&d);
        for (i, v) in [1.0f64, -2.0, 7.5].iter().enumerate() {
            assert!((e.get(i, i) / v.exp() - 1.0).abs() < 1e-13);
        }
        let mut nil = SquareMatrix::<f64>::zeros(3);
        nil.set(0, 1, 1.0);
        nil.set(1, 2, 1.0);
        let e = expm(&nil);
        assert!((e.get(0, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dual_derivative_of_scaled_generator() {
        // d/dt exp(tK) = K exp(tK)
        let t = Dual8::variable(0.9, 0);
        let mut k = SquareMatrix::<Dual8>::zeros(2);
        k.set(0, 1, -t);
        k.set(1, 0, t);
        let e = expm(&k);
        assert!((e.get(0, 0).d[0] + 0.9f64.sin()).abs() < 1e-13);
        assert!((e.get(1, 0).d[0] - 0.9f64.cos()).abs() < 1e-13);
    }
}
