//! Time-dependent source terms with a separable profile.

use crate::fields::{gradient, hessian, VectorField};
use crate::norms::sup_norm;
use crate::{Error, Result};

/// Scalar time factor `mean + amplitude·sin(omega·t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modulation {
    pub mean: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Modulation {
    pub const fn steady() -> Self {
        Self {
            mean: 1.0,
            amplitude: 0.0,
            omega: 0.0,
            phase: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.mean + self.amplitude * (self.omega * t + self.phase).sin()
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.amplitude * self.omega * (self.omega * t + self.phase).cos()
    }

    fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.amplitude.is_finite() && self.omega.is_finite() && self.phase.is_finite()
    }
}

/// Sup norms of a profile and its first two spatial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileNorms {
    pub sup: f64,
    pub grad_sup: f64,
    pub hess_sup: f64,
}

/// A source `g(t, x)`: either zero or `θ(t)·G(x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Zero,
    Separable {
        profile: VectorField,
        modulation: Modulation,
        norms: ProfileNorms,
    },
}

impl Forcing {
    pub fn separable(profile: VectorField, modulation: Modulation) -> Result<Self> {
        if !profile.is_finite() || !modulation.is_finite() {
            return Err(Error::InvalidInput("non-finite forcing sample".into()));
        }
        let norms = ProfileNorms {
            sup: sup_norm(&profile),
            grad_sup: sup_norm(&gradient(&profile)),
            hess_sup: sup_norm(&hessian(&profile)),
        };
        Ok(Forcing::Separable {
            profile,
            modulation,
            norms,
        })
    }

    /// Time-independent source `G(x)`.
    pub fn steady(profile: VectorField) -> Result<Self> {
        Self::separable(profile, Modulation::steady())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    pub fn profile(&self) -> Option<&VectorField> {
        match self {
            Forcing::Zero => None,
            Forcing::Separable { profile, .. } => Some(profile),
        }
    }

    pub fn factor(&self, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Separable { modulation, .. } => modulation.value(t),
        }
    }

    pub fn factor_rate(&self, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Separable { modulation, .. } => modulation.rate(t),
        }
    }

    /// Sample of `g(t)`; `None` for the zero source.
    pub fn at(&self, t: f64) -> Option<VectorField> {
        self.profile().map(|p| p.scaled(self.factor(t)))
    }

    /// Adds `s·g(t)` to `target`.
    pub fn add_to(&self, t: f64, s: f64, target: &mut VectorField) {
        if let Some(p) = self.profile() {
            target.axpy(s * self.factor(t), p);
        }
    }

    fn norms(&self) -> ProfileNorms {
        match self {
            Forcing::Zero => ProfileNorms {
                sup: 0.0,
                grad_sup: 0.0,
                hess_sup: 0.0,
            },
            Forcing::Separable { norms, .. } => *norms,
        }
    }

    pub fn sup(&self, t: f64) -> f64 {
        self.factor(t).abs() * self.norms().sup
    }

    pub fn grad_sup(&self, t: f64) -> f64 {
        self.factor(t).abs() * self.norms().grad_sup
    }

    pub fn hess_sup(&self, t: f64) -> f64 {
        self.factor(t).abs() * self.norms().hess_sup
    }

    pub fn dt_sup(&self, t: f64) -> f64 {
        self.factor_rate(t).abs() * self.norms().sup
    }

    /// `g̃(t̃, x) = a·g(b·t̃, x)`.
    pub fn rescaled(&self, a: f64, b: f64) -> Result<Self> {
        match self {
            Forcing::Zero => Ok(Forcing::Zero),
            Forcing::Separable {
                profile,
                modulation,
                ..
            } => Self::separable(
                profile.scaled(a),
                Modulation {
                    omega: modulation.omega * b,
                    ..*modulation
                },
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;

    #[test]
    fn separable_norms_scale_with_factor() {
        let g = GridSpec::new(1, 32, std::f64::consts::TAU).unwrap();
        let p = VectorField::from_fn(g, 1, |x, o| o[0] = (2.0 * x[0]).sin());
        let m = Modulation {
            mean: 0.5,
            amplitude: 1.0,
            omega: 3.0,
            phase: 0.0,
        };
        let f = Forcing::separable(p, m).unwrap();
        let t = 0.3;
        let theta = 0.5 + (0.9f64).sin();
        assert!((f.sup(t) - theta.abs()).abs() < 1e-12);
        assert!((f.grad_sup(t) - 2.0 * theta.abs()).abs() < 1e-12);
        assert!((f.hess_sup(t) - 4.0 * theta.abs()).abs() < 1e-10);
        assert!((f.dt_sup(t) - 3.0 * (0.9f64).cos().abs()).abs() < 1e-12);
    }

    #[test]
    fn zero_source_is_inert() {
        let f = Forcing::Zero;
        assert!(f.at(1.0).is_none());
        assert_eq!(f.sup(2.0), 0.0);
    }
}
