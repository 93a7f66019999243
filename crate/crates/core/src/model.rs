//! Model parameters and the quantities derived from them.
//!
//! Energies are in units of the cavity frequency, which is fixed to one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Qubit splitting and the two coupling strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Qubit splitting Δ. Any real value is allowed.
    pub delta: f64,
    /// Rotating-wave coupling.
    pub g1: f64,
    /// Counter-rotating coupling.
    pub g2: f64,
}

impl ModelParams {
    pub fn new(delta: f64, g1: f64, g2: f64) -> Result<Self> {
        if !(delta.is_finite() && g1.is_finite() && g2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "parameters must be finite (delta = {delta}, g1 = {g1}, g2 = {g2})"
            )));
        }
        if g1 < 0.0 || g2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "couplings must be nonnegative (g1 = {g1}, g2 = {g2})"
            )));
        }
        Ok(Self { delta, g1, g2 })
    }

    /// Parameters on the ray g2 = r·g1.
    pub fn with_ratio(delta: f64, g1: f64, r: f64) -> Result<Self> {
        Self::new(delta, g1, r * g1)
    }

    /// Parameters with the given mean coupling α = (g1 + g2)/2 on the ray g2 = r·g1.
    pub fn from_alpha(delta: f64, alpha: f64, r: f64) -> Result<Self> {
        let g1 = 2.0 * alpha / (1.0 + r);
        Self::new(delta, g1, r * g1)
    }

    /// The spin-flipped partner (g2, g1, −Δ), which has the same spectrum.
    pub fn spin_flipped(&self) -> Self {
        Self {
            delta: -self.delta,
            g1: self.g2,
            g2: self.g1,
        }
    }

    pub fn derive(&self) -> DerivedParams {
        derive(self)
    }

    /// x = λ₊ + E.
    pub fn spectral_variable(&self, energy: f64) -> f64 {
        energy + self.derive().lambda_plus
    }

    /// E = x − λ₊.
    pub fn energy_from_spectral(&self, x: f64) -> f64 {
        x - self.derive().lambda_plus
    }
}

/// Combinations of the couplings that appear throughout the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// (g1² + g2²)/2
    pub lambda_plus: f64,
    /// (g1² − g2²)/2
    pub lambda_minus: f64,
    /// √(g1 g2), the displacement of the G-function basis.
    pub beta: f64,
    /// (g1 + g2)/2, the displacement of the GRWA basis.
    pub alpha: f64,
    /// (g1 − g2)/2
    pub gamma: f64,
    /// g2/g1, +∞ when g1 = 0 (NaN when both vanish).
    pub r: f64,
}

pub fn derive(params: &ModelParams) -> DerivedParams {
    let ModelParams { g1, g2, .. } = *params;
    let r = if g1 == 0.0 {
        if g2 == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        g2 / g1
    };
    DerivedParams {
        lambda_plus: 0.5 * (g1 * g1 + g2 * g2),
        lambda_minus: 0.5 * (g1 * g1 - g2 * g2),
        beta: (g1 * g2).sqrt(),
        alpha: 0.5 * (g1 + g2),
        gamma: 0.5 * (g1 - g2),
        r,
    }
}

/// The conserved ℤ₂ parity. `Even` contains the uncoupled ground state |0,↓⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    /// +1 for even, −1 for odd. This is the upper/lower sign choice of the
    /// two-component ansätze in both displaced bases.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" | "+" => Ok(Parity::Even),
            "odd" | "-" => Ok(Parity::Odd),
            other => Err(Error::InvalidParameter(format!("unknown parity '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn figure_one_parameters() {
        let d = ModelParams::new(0.7, 0.8, 0.6).unwrap().derive();
        assert!(close(d.lambda_plus, 0.5, 1e-15));
        assert!(close(d.lambda_minus, 0.14, 1e-15));
        assert!(close(d.beta, 0.48f64.sqrt(), 1e-15));
        assert!(close(d.alpha, 0.7, 1e-15));
        assert!(close(d.gamma, 0.1, 1e-15));
        assert!(close(d.r, 0.75, 1e-15));
    }

    #[test]
    fn isotropic_and_jaynes_cummings_limits() {
        let d = ModelParams::new(0.7, 0.4, 0.4).unwrap().derive();
        assert_eq!(d.lambda_minus, 0.0);
        assert_eq!(d.gamma, 0.0);
        assert!(close(d.beta, 0.4, 1e-15));
        assert_eq!(d.alpha, 0.4);

        let d = ModelParams::new(0.3, 0.8, 0.0).unwrap().derive();
        assert_eq!(d.beta, 0.0);
        assert_eq!(d.r, 0.0);
        assert!(close(d.lambda_minus, 0.32, 1e-15));
        assert!(close(d.lambda_plus, 0.32, 1e-15));
    }

    #[test]
    fn ratio_is_infinite_without_rotating_coupling() {
        let d = ModelParams::new(0.7, 0.0, 0.5).unwrap().derive();
        assert!(d.r.is_infinite());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::new(0.5, -0.1, 0.2).is_err());
        assert!(ModelParams::new(f64::NAN, 0.1, 0.2).is_err());
        assert!(ModelParams::new(-2.0, 0.1, 0.2).is_ok());
    }

    #[test]
    fn spectral_shift() {
        let p = ModelParams::new(0.7, 0.8, 0.6).unwrap();
        assert!(close(p.spectral_variable(-0.2), 0.3, 1e-15));
        assert!(close(p.energy_from_spectral(1.0), 0.5, 1e-15));
        let free = ModelParams::new(0.7, 0.0, 0.0).unwrap();
        assert_eq!(free.spectral_variable(1.234), 1.234);
    }

    #[test]
    fn alpha_parametrization() {
        let p = ModelParams::from_alpha(0.5, 0.6, 0.5).unwrap();
        assert!(close(p.derive().alpha, 0.6, 1e-15));
        assert!(close(p.g2 / p.g1, 0.5, 1e-15));
    }

    #[test]
    fn parity_parsing() {
        assert_eq!("even".parse::<Parity>().unwrap(), Parity::Even);
        assert_eq!("odd".parse::<Parity>().unwrap(), Parity::Odd);
        assert!("both".parse::<Parity>().is_err());
        assert_eq!(Parity::Even.flip(), Parity::Odd);
    }

    proptest! {
        #[test]
        fn derived_identities(g1 in 0.0f64..3.0, g2 in 0.0f64..3.0, delta in -3.0f64..3.0) {
            let p = ModelParams::new(delta, g1, g2).unwrap();
            let d = p.derive();
            prop_assert!(d.lambda_plus >= d.lambda_minus.abs());
            let b4 = d.beta.powi(4);
            prop_assert!(close(b4, d.lambda_plus.powi(2) - d.lambda_minus.powi(2), 1e-12));
            prop_assert!(close(d.alpha.powi(2) + d.gamma.powi(2), d.lambda_plus, 1e-12));
            prop_assert!(close(d.alpha.powi(2) - d.gamma.powi(2), d.beta.powi(2), 1e-12));
            let e = -1.7 * delta;
            let back = p.energy_from_spectral(p.spectral_variable(e));
            prop_assert!((back - e).abs() <= 4.0 * f64::EPSILON * (e.abs() + d.lambda_plus));
        }
    }
}
