//! The q-deformed Hulthén potential, its vector/scalar split and the
//! energy-dependent effective potential of the reduced Klein-Gordon equation.
//!
//! Everything is expressed through the screening factor `k(x) = exp(-lambda_eff x)`,
//! with `lambda_eff = lambda` on the Hermitian branch and `i lambda` on the
//! PT-symmetric and non-Hermitian branches, and the deformed ratio
//! `g(x) = k / (1 - q k)`:
//!
//! ```text
//! V(x) = -V0_eff g(x),   S(x) = -S0 g(x)
//! V_eff(x; E) = (S^2 - V^2) + 2 (m S + E V) = G1 g^2 - G2(E) g
//! G1 = S0^2 - V0_eff^2,  G2(E) = 2 (m S0 + E V0_eff)
//! ```

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|1 - q k(x)|` below this is treated as a pole.
pub const POLE_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Hermitian,
    PtSymmetric,
    NonHermitian,
}

impl Branch {
    pub fn is_hermitian(self) -> bool {
        self == Branch::Hermitian
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Hermitian => "hermitian",
            Branch::PtSymmetric => "pt-symmetric",
            Branch::NonHermitian => "non-hermitian",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "hermitian" => Ok(Branch::Hermitian),
            "pt" | "pt-symmetric" | "ptsymmetric" => Ok(Branch::PtSymmetric),
            "non-hermitian" | "nonhermitian" | "nh" => Ok(Branch::NonHermitian),
            other => Err(format!(
                "unknown branch '{other}' (expected hermitian, pt-symmetric or non-hermitian)"
            )),
        }
    }
}

/// Physical inputs of one potential configuration. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    v0: f64,
    s0: f64,
    vi: f64,
    lambda: f64,
    q: f64,
    m: f64,
    branch: Branch,
}

impl PotentialParams {
    pub fn new(branch: Branch, v0: f64, s0: f64, vi: f64, lambda: f64, q: f64, m: f64) -> Result<Self> {
        let p = Self {
            v0,
            s0,
            vi,
            lambda,
            q,
            m,
            branch,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn hermitian(v0: f64, s0: f64, lambda: f64, q: f64, m: f64) -> Result<Self> {
        Self::new(Branch::Hermitian, v0, s0, 0.0, lambda, q, m)
    }

    pub fn pt_symmetric(v0: f64, s0: f64, lambda: f64, q: f64, m: f64) -> Result<Self> {
        Self::new(Branch::PtSymmetric, v0, s0, 0.0, lambda, q, m)
    }

    pub fn non_hermitian(v0: f64, vi: f64, s0: f64, lambda: f64, q: f64, m: f64) -> Result<Self> {
        Self::new(Branch::NonHermitian, v0, s0, vi, lambda, q, m)
    }

    fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                })
            }
        };
        finite("V0", self.v0)?;
        finite("S0", self.s0)?;
        finite("VI", self.vi)?;
        finite("lambda", self.lambda)?;
        finite("q", self.q)?;
        finite("m", self.m)?;
        if self.q == 0.0 {
            return Err(Error::ZeroDeformation);
        }
        if self.lambda <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: self.lambda,
                reason: "screening parameter must be positive",
            });
        }
        if self.m <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "m",
                value: self.m,
                reason: "mass must be positive",
            });
        }
        if self.vi != 0.0 && self.branch != Branch::NonHermitian {
            return Err(Error::InvalidParameter {
                name: "VI",
                value: self.vi,
                reason: "imaginary vector coupling is only allowed on the non-hermitian branch",
            });
        }
        Ok(())
    }

    /// Copy with one named field replaced (`V0`, `S0`, `VI`, `lambda`, `q`, `m`).
    pub fn with_field(&self, key: &str, value: f64) -> Result<Self> {
        let mut p = *self;
        match key {
            "V0" => p.v0 = value,
            "S0" => p.s0 = value,
            "VI" => p.vi = value,
            "lambda" => p.lambda = value,
            "q" => p.q = value,
            "m" => p.m = value,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "sweep_key",
                    value,
                    reason: "field must be one of V0, S0, VI, lambda, q, m",
                })
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn with_branch(&self, branch: Branch, vi: f64) -> Result<Self> {
        Self::new(branch, self.v0, self.s0, vi, self.lambda, self.q, self.m)
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn s0(&self) -> f64 {
        self.s0
    }
    pub fn vi(&self) -> f64 {
        self.vi
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn m(&self) -> f64 {
        self.m
    }

    /// `V0 + i VI` on the non-Hermitian branch, `V0` otherwise.
    pub fn v0_eff(&self) -> Complex64 {
        Complex64::new(self.v0, self.vi)
    }

    /// `lambda` (Hermitian) or `i lambda` (PT-symmetric, non-Hermitian).
    pub fn lambda_eff(&self) -> Complex64 {
        match self.branch {
            Branch::Hermitian => Complex64::new(self.lambda, 0.0),
            _ => I * self.lambda,
        }
    }

    /// Screening factor `k(x) = exp(-lambda_eff x)`.
    pub fn k(&self, x: f64) -> Complex64 {
        match self.branch {
            Branch::Hermitian => Complex64::new((-self.lambda * x).exp(), 0.0),
            _ => Complex64::from_polar(1.0, -self.lambda * x),
        }
    }

    /// `g(x) = k / (1 - q k)`, failing at a pole.
    pub fn ratio(&self, x: f64) -> Result<Complex64> {
        let k = self.k(x);
        let den = 1.0 - self.q * k;
        let distance = den.norm();
        if distance < POLE_TOLERANCE || !distance.is_finite() {
            return Err(Error::Pole { x, distance });
        }
        Ok(k / den)
    }

    /// Real pole of the Hermitian potential, `ln(q) / lambda`, present for `q > 0`.
    pub fn pole(&self) -> Option<f64> {
        (self.branch.is_hermitian() && self.q > 0.0).then(|| self.q.ln() / self.lambda)
    }

    pub fn default_delta(&self) -> f64 {
        1e-6 / self.lambda
    }

    /// Left end of the admissible half-line. For `q > 0` on the Hermitian
    /// branch this is the pole `ln(q)/lambda` (negative when `q < 1`) offset
    /// by `delta`; otherwise `delta`.
    pub fn domain_start(&self, delta: f64) -> f64 {
        match self.pole() {
            Some(x0) => x0 + delta,
            None => delta,
        }
    }
}

/// Energy-independent `G1` and the affine `G2(E) = gamma2_const + gamma2_slope E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPair {
    pub gamma1: Complex64,
    pub gamma2_const: Complex64,
    pub gamma2_slope: Complex64,
}

/// Sign conditions that the hierarchy does not need but which are conventionally
/// assumed for a binding potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaWarning {
    Gamma1NotPositive,
    Gamma2NotPositive,
}

impl GammaPair {
    pub fn gamma2(&self, energy: Complex64) -> Complex64 {
        self.gamma2_const + self.gamma2_slope * energy
    }

    /// Warnings for real-valued gammas at `energy`; complex values are not ordered.
    pub fn warnings(&self, energy: Complex64) -> Vec<GammaWarning> {
        let mut out = Vec::new();
        if self.gamma1.im == 0.0 && self.gamma1.re <= 0.0 {
            out.push(GammaWarning::Gamma1NotPositive);
        }
        let g2 = self.gamma2(energy);
        if g2.im == 0.0 && g2.re <= 0.0 {
            out.push(GammaWarning::Gamma2NotPositive);
        }
        out
    }
}

pub fn gammas(p: &PotentialParams) -> GammaPair {
    let v = p.v0_eff();
    GammaPair {
        gamma1: p.s0 * p.s0 - v * v,
        gamma2_const: Complex64::new(2.0 * p.m * p.s0, 0.0),
        gamma2_slope: 2.0 * v,
    }
}

/// Lorentz vector part `-V0_eff k / (1 - q k)`.
pub fn vector_potential(p: &PotentialParams, x: f64) -> Result<Complex64> {
    Ok(-p.v0_eff() * p.ratio(x)?)
}

/// Lorentz scalar part `-S0 k / (1 - q k)`.
pub fn scalar_potential(p: &PotentialParams, x: f64) -> Result<Complex64> {
    Ok(-p.s0 * p.ratio(x)?)
}

/// `G1 g^2 - G2(E) g`.
pub fn effective_potential(p: &PotentialParams, energy: Complex64, x: f64) -> Result<Complex64> {
    let g = p.ratio(x)?;
    let gm = gammas(p);
    Ok(gm.gamma1 * g * g - gm.gamma2(energy) * g)
}

/// `(S^2 - V^2) + 2 (m S + E V)` built from the vector and scalar parts.
pub fn effective_potential_direct(p: &PotentialParams, energy: Complex64, x: f64) -> Result<Complex64> {
    let v = vector_potential(p, x)?;
    let s = scalar_potential(p, x)?;
    Ok((s * s - v * v) + 2.0 * (p.m * s + energy * v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_deformation_is_rejected() {
        assert_eq!(PotentialParams::hermitian(1.0, 1.0, 0.2, 0.0, 1.0), Err(Error::ZeroDeformation));
        assert_eq!(PotentialParams::pt_symmetric(1.0, 1.0, 0.2, 0.0, 1.0), Err(Error::ZeroDeformation));
        let p = PotentialParams::hermitian(1.0, 1.0, 0.2, 1.0, 1.0).unwrap();
        assert_eq!(p.with_field("q", 0.0), Err(Error::ZeroDeformation));
    }

    #[test]
    fn other_invariants() {
        assert!(PotentialParams::hermitian(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(PotentialParams::hermitian(1.0, 1.0, 0.2, 1.0, -1.0).is_err());
        assert!(PotentialParams::new(Branch::PtSymmetric, 1.0, 1.0, 0.1, 0.2, 1.0, 1.0).is_err());
        assert!(PotentialParams::non_hermitian(1.0, 0.1, 1.0, 0.2, 1.0, 1.0).is_ok());
        assert!(PotentialParams::hermitian(f64::NAN, 1.0, 0.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn vector_potential_values() {
        let p = PotentialParams::hermitian(1.0, 1.0, 0.2, 1.0, 1.0).unwrap();
        let v = vector_potential(&p, 1.0).unwrap();
        let k = (-0.2f64).exp();
        assert!((v.re - (-k / (1.0 - k))).abs() < 1e-14);
        assert!((v.re + 4.5167).abs() < 1e-4);
        assert_eq!(v.im, 0.0);
        assert!(vector_potential(&p, 400.0).unwrap().norm() < 1e-30);

        let zero = PotentialParams::hermitian(0.0, 1.0, 0.2, 1.0, 1.0).unwrap();
        assert_eq!(vector_potential(&zero, 3.0).unwrap(), c(0.0));
        assert_eq!(scalar_potential(&p, 1.0).unwrap(), v);
    }

    #[test]
    fn pole_is_reported() {
        let p = PotentialParams::hermitian(1.0, 1.0, 0.5, 2.0, 1.0).unwrap();
        let x0 = p.pole().unwrap();
        assert!((x0 - 2f64.ln() / 0.5).abs() < 1e-15);
        assert!(matches!(vector_potential(&p, x0), Err(Error::Pole { .. })));
        assert!(vector_potential(&p, p.domain_start(p.default_delta())).is_ok());

        let hulthen = PotentialParams::hermitian(1.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(matches!(effective_potential(&hulthen, c(0.0), 0.0), Err(Error::Pole { .. })));

        // |q| = 1 on a complex branch has periodic poles.
        let pt = PotentialParams::pt_symmetric(1.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(matches!(scalar_potential(&pt, 2.0 * std::f64::consts::PI / 0.5), Err(Error::Pole { .. })));
        assert!(pt.pole().is_none());
    }

    #[test]
    fn effective_potential_examples() {
        // S0 = V0 and E = -m make both gammas vanish.
        let p = PotentialParams::hermitian(0.4, 0.4, 0.3, 0.7, 1.3).unwrap();
        for x in [0.1, 1.0, 7.0] {
            assert!(effective_potential(&p, c(-1.3), x).unwrap().norm() < 1e-15);
        }
        // G1 = 1, G2 = 2, k = 1/2 => 1 - 2.
        let p = PotentialParams::hermitian(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let v = effective_potential(&p, c(0.0), 2f64.ln()).unwrap();
        assert!((v - c(-1.0)).norm() < 1e-14);
    }

    #[test]
    fn gamma_examples() {
        let p = PotentialParams::hermitian(0.25, 0.25, 0.2, 1.0, 1.0).unwrap();
        let g = gammas(&p);
        assert_eq!(g.gamma1, c(0.0));
        assert_eq!(g.gamma2(c(0.0)), c(0.5));
        assert_eq!(g.warnings(c(0.0)), vec![GammaWarning::Gamma1NotPositive]);

        let p = PotentialParams::hermitian(0.0, 1.0, 0.2, 1.0, 1.0).unwrap();
        let g = gammas(&p);
        for e in [-0.7, 0.0, 0.9] {
            assert_eq!(g.gamma2(c(e)), c(2.0));
        }
        assert!(g.warnings(c(0.3)).is_empty());

        let p = PotentialParams::non_hermitian(0.3, 0.1, 0.5, 0.2, 1.0, 1.0).unwrap();
        let g = gammas(&p).gamma1;
        assert!((g - Complex64::new(0.17, -0.06)).norm() < 1e-15);
    }

    #[test]
    fn pt_branch_is_the_continued_hermitian_formula() {
        let pt = PotentialParams::pt_symmetric(0.3, 0.5, 0.25, 0.8, 1.0).unwrap();
        let e = Complex64::new(0.2, 0.1);
        for x in [0.3, 1.7, 5.0, 11.0] {
            // Hermitian expression with lambda replaced by i lambda, evaluated by hand.
            let k = (-Complex64::new(0.0, 0.25) * x).exp();
            let g = k / (1.0 - 0.8 * k);
            let expected = (0.25 - 0.09) * g * g - 2.0 * (0.5 + e * 0.3) * g;
            let got = effective_potential(&pt, e, x).unwrap();
            assert!((got - expected).norm() < 1e-13 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn hermitian_effective_potential_decays() {
        let p = PotentialParams::hermitian(0.3, 0.5, 0.25, 0.8, 1.0).unwrap();
        let start = 10.0 / p.lambda();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = effective_potential(&p, c(0.2), start + 0.5 * i as f64).unwrap().norm();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn branch_parsing() {
        assert_eq!("PT".parse::<Branch>(), Ok(Branch::PtSymmetric));
        assert_eq!("non_hermitian".parse::<Branch>(), Ok(Branch::NonHermitian));
        assert!("other".parse::<Branch>().is_err());
    }

    fn any_params() -> impl Strategy<Value = (PotentialParams, Complex64, f64)> {
        (
            -2.0..2.0f64,
            -2.0..2.0f64,
            -0.5..0.5f64,
            0.05..2.0f64,
            prop_oneof![-1.5..-0.1f64, 0.1..1.5f64],
            0.2..3.0f64,
            0usize..3,
            -1.0..1.0f64,
            -0.5..0.5f64,
            0.0..12.0f64,
        )
            .prop_filter_map("pole", |(v0, s0, vi, lambda, q, m, b, re, im, t)| {
                let branch = [Branch::Hermitian, Branch::PtSymmetric, Branch::NonHermitian][b];
                let vi = if branch == Branch::NonHermitian { vi } else { 0.0 };
                let p = PotentialParams::new(branch, v0, s0, vi, lambda, q, m).ok()?;
                let x = p.domain_start(0.05 / lambda) + t / lambda;
                let den = (1.0 - q * p.k(x)).norm();
                (den > 1e-3).then_some((p, Complex64::new(re, if branch.is_hermitian() { 0.0 } else { im }), x))
            })
    }

    proptest! {
        #[test]
        fn gamma_form_matches_direct_form((p, e, x) in any_params()) {
            let a = effective_potential(&p, e, x).unwrap();
            let b = effective_potential_direct(&p, e, x).unwrap();
            prop_assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }

        #[test]
        fn hermitian_real_energy_gives_real_values((p, e, x) in any_params()) {
            prop_assume!(p.branch().is_hermitian());
            let g = gammas(&p);
            prop_assert_eq!(g.gamma1.im, 0.0);
            prop_assert_eq!(g.gamma2(e).im, 0.0);
            prop_assert_eq!(effective_potential(&p, e, x).unwrap().im, 0.0);
        }
    }
}
