//! Scalar types the simulation pipeline is generic over.
//!
//! Every circuit routine is written once against [`Scalar`]. Plain evaluation
//! instantiates it with `f64`; gradient evaluation instantiates it with
//! [`Dual8`], a forward-mode dual number carrying one tangent lane per
//! trainable circuit parameter.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{Num, NumAssign, One, Zero};

/// Number of tangent lanes carried by [`Dual8`].
pub const LANES: usize = 8;

pub trait Scalar: Copy + Debug + NumAssign + Neg<Output = Self> + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    /// Primal value, with any tangent information dropped.
    fn value(self) -> f64;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn cosh(self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc *= self;
        }
        acc
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline]
    fn powi(self, n: u32) -> Self {
        f64::powi(self, n as i32)
    }
}

/// `e^{i·phase}` for a scalar phase.
#[inline]
pub fn cis<T: Scalar>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub fn cplx<T: Scalar>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::from_f64(re), T::from_f64(im))
}

/// Complex number scaled by a plain real factor.
#[inline]
pub fn cscale<T: Scalar>(z: Complex<T>, k: f64) -> Complex<T> {
    Complex::new(z.re.scale(k), z.im.scale(k))
}

/// Forward-mode dual number with eight tangent lanes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual8 {
    pub v: f64,
    pub d: [f64; LANES],
}

impl Dual8 {
    pub const fn constant(v: f64) -> Self {
        Dual8 { v, d: [0.0; LANES] }
    }

    /// Independent variable seeded on tangent lane `lane`.
    pub fn variable(v: f64, lane: usize) -> Self {
        let mut d = [0.0; LANES];
        d[lane] = 1.0;
        Dual8 { v, d }
    }

    #[inline]
    fn chain(self, fv: f64, dfdx: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dfdx;
        }
        Dual8 { v: fv, d }
    }
}

impl Add for Dual8 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d.iter()) {
            *a += *b;
        }
        self
    }
}

impl Sub for Dual8 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d.iter()) {
            *a -= *b;
        }
        self
    }
}

impl Mul for Dual8 {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        let d = std::array::from_fn(|i| self.v * rhs.d[i] + rhs.v * self.d[i]);
        Dual8 { v: self.v * rhs.v, d }
    }
}

impl Div for Dual8 {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let q = self.v * inv;
        let d = std::array::from_fn(|i| (self.d[i] - q * rhs.d[i]) * inv);
        Dual8 { v: q, d }
    }
}

impl Rem for Dual8 {
    type Output = Self;
    // d/dx (x mod y) = 1 almost everywhere; the y-dependence is dropped
    fn rem(self, rhs: Self) -> Self {
        let q = (self.v / rhs.v).trunc();
        Dual8 { v: self.v % rhs.v, d: (self - rhs * Dual8::constant(q)).d }
    }
}

impl Neg for Dual8 {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.v, -1.0)
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Dual8 {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl Zero for Dual8 {
    fn zero() -> Self {
        Dual8::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.v == 0.0 && self.d.iter().all(|x| *x == 0.0)
    }
}

impl One for Dual8 {
    fn one() -> Self {
        Dual8::constant(1.0)
    }
}

impl Num for Dual8 {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Dual8::constant)
    }
}

impl Scalar for Dual8 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dual8::constant(x)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn cosh(self) -> Self {
        self.chain(self.v.cosh(), self.v.sinh())
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self.chain(self.v * k, k)
    }
}
