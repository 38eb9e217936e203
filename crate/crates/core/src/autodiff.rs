//! Gradients with respect to the eight circuit parameters.
//!
//! One forward sweep with [`Dual8`] seeds each parameter on its own tangent
//! lane, so a single evaluation yields the value and the full gradient.

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, NUM_PARAMS};
use crate::error::{Error, Result};
use crate::scalar::Dual8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gradient8 {
    pub d_r: f64,
    pub d_loggamma: f64,
    pub d_dcoh: f64,
    pub d_dsq: f64,
    pub d_theta1: f64,
    pub d_phi1: f64,
    pub d_theta2: f64,
    pub d_phi2: f64,
}

impl Gradient8 {
    pub fn from_array(a: [f64; NUM_PARAMS]) -> Self {
        Gradient8 {
            d_r: a[0],
            d_loggamma: a[1],
            d_dcoh: a[2],
            d_dsq: a[3],
            d_theta1: a[4],
            d_phi1: a[5],
            d_theta2: a[6],
            d_phi2: a[7],
        }
    }

    pub fn to_array(&self) -> [f64; NUM_PARAMS] {
        [self.d_r, self.d_loggamma, self.d_dcoh, self.d_dsq, self.d_theta1, self.d_phi1, self.d_theta2, self.d_phi2]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.to_array().iter().position(|g| !g.is_finite()) {
            Some(index) => Err(Error::NonFiniteGradient { index, value: self.to_array()[index] }),
            None => Ok(()),
        }
    }
}

/// Lift plain parameters to duals, parameter `i` on lane `i`.
pub fn seed(at: &CircuitParams<f64>) -> CircuitParams<Dual8> {
    let a = at.to_array();
    CircuitParams::from_array(std::array::from_fn(|i| Dual8::variable(a[i], i)))
}

/// Value and gradient of `objective` at `at`.
pub fn grad<F>(objective: F, at: &CircuitParams<f64>) -> Result<(f64, Gradient8)>
where
    F: Fn(&CircuitParams<Dual8>) -> Result<Dual8>,
{
    let y = objective(&seed(at))?;
    if !y.v.is_finite() {
        return Err(Error::NonFiniteObjective(y.v));
    }
    let g = Gradient8::from_array(y.d);
    g.check_finite()?;
    Ok((y.v, g))
}

/// Central-difference gradient with step `h` on each parameter.
pub fn central_difference<F>(objective: F, at: &CircuitParams<f64>, h: f64) -> Result<Gradient8>
where
    F: Fn(&CircuitParams<f64>) -> Result<f64>,
{
    let x = at.to_array();
    let mut g = [0.0; NUM_PARAMS];
    for i in 0..NUM_PARAMS {
        let mut hi = x;
        let mut lo = x;
        hi[i] += h;
        lo[i] -= h;
        g[i] = (objective(&CircuitParams::from_array(hi))? - objective(&CircuitParams::from_array(lo))?) / (2.0 * h);
    }
    Ok(Gradient8::from_array(g))
}

/// Per-entry agreement: relative `rel` or absolute `abs`.
pub fn gradients_agree(a: &Gradient8, b: &Gradient8, rel: f64, abs: f64) -> bool {
    a.to_array().iter().zip(b.to_array()).all(|(&x, y)| {
        let d = (x - y).abs();
        d <= abs || d <= rel * x.abs().max(y.abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::afek_init;
    use crate::scalar::Scalar;

    #[test]
    fn projection_objective() {
        let (p, _) = afek_init(2).unwrap();
        let (v, g) = grad(|q| Ok(q.theta1), &p).unwrap();
        assert_eq!(v, p.theta1);
        assert_eq!(g.to_array(), [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_objective_is_rejected() {
        let (p, _) = afek_init(2).unwrap();
        let e = grad(|q| Ok(q.r / Dual8::constant(0.0)), &p);
        assert!(matches!(e, Err(Error::NonFiniteObjective(_))));
    }

    #[test]
    fn smooth_objective_matches_finite_differences() {
        let (p, _) = afek_init(3).unwrap();
        let f = |q: &CircuitParams<f64>| Ok(q.r.sin() * q.log_gamma.exp() + q.phi2 * q.theta1.cos());
        let fd = |q: &CircuitParams<Dual8>| Ok(q.r.sin() * q.log_gamma.exp() + q.phi2 * q.theta1.cos());
        let (_, g) = grad(fd, &p).unwrap();
        let c = central_difference(f, &p, 1e-5).unwrap();
        assert!(gradients_agree(&g, &c, 1e-8, 1e-10));
    }
}
