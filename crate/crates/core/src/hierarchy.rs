//! Factorization hierarchy for the deformed Hulthén family.
//!
//! The superpotential ansatz is `W(x) = -nu g(x) + c` with `g = k/(1 - q k)`.
//! Its analytic derivative is `W'(x) = nu lambda_eff k/(1 - q k)^2`, so
//!
//! ```text
//! W^2 - W' = nu (nu - q lambda_eff) g^2 - nu (2c + lambda_eff) g + c^2.
//! ```
//!
//! Matching against `V_eff - eps` fixes `nu_1 (nu_1 - q lambda_eff) = G1` and
//! `c = (G1 + q G2 - nu^2) / (2 q nu)`, `eps = -c^2`. Level `n` of the hierarchy
//! uses `rho_n = nu_1 + n q lambda_eff` and the same expression for `c`; the
//! potential it factorizes is the n-th partner
//! `V^(n) = V_eff + 2 sum_{j<n} W_j'`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::par::ExecMode;
use crate::potential::{self, gammas, Branch, GammaPair, PotentialParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Root `nu_1 = [q lambda_eff + sqrt((q lambda_eff)^2 + 4 G1)] / 2` of
/// `nu^2 - q lambda_eff nu - G1 = 0` (principal square root).
pub fn solve_nu1(gamma1: Complex64, q: f64, lambda_eff: Complex64) -> Result<Complex64> {
    let b = q * lambda_eff;
    let s = (b * b + 4.0 * gamma1).sqrt();
    let plus = b + s;
    let minus = b - s;
    // Avoid cancellation: nu_+ nu_- = -G1.
    let nu = if plus.norm() >= minus.norm() {
        plus / 2.0
    } else {
        -2.0 * gamma1 / minus
    };
    if nu.norm() == 0.0 || !nu.re.is_finite() || !nu.im.is_finite() {
        return Err(Error::DegenerateRoot);
    }
    Ok(nu)
}

/// Per-level algebraic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyLevel {
    pub n: usize,
    /// `rho_n = nu_1 + n q lambda_eff`.
    pub nu: Complex64,
    /// Constant term of `W_n`.
    pub mu: Complex64,
    /// `-mu^2`.
    pub epsilon: Complex64,
}

/// Energy-independent part of the hierarchy for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hierarchy {
    params: PotentialParams,
    gammas: GammaPair,
    nu1: Complex64,
}

impl Hierarchy {
    pub fn new(params: &PotentialParams) -> Result<Self> {
        let gammas = gammas(params);
        let lambda_eff = params.lambda_eff();
        if params.branch().is_hermitian() {
            let b = params.q() * params.lambda();
            let disc = b * b + 4.0 * gammas.gamma1.re;
            if disc < 0.0 {
                return Err(Error::ComplexNu {
                    gamma1: gammas.gamma1.re,
                });
            }
        }
        let mut nu1 = solve_nu1(gammas.gamma1, params.q(), lambda_eff)?;
        if params.branch().is_hermitian() {
            nu1.im = 0.0;
        }
        Ok(Self {
            params: *params,
            gammas,
            nu1,
        })
    }

    pub fn params(&self) -> &PotentialParams {
        &self.params
    }

    pub fn gammas(&self) -> &GammaPair {
        &self.gammas
    }

    pub fn nu1(&self) -> Complex64 {
        self.nu1
    }

    pub fn rho(&self, n: usize) -> Complex64 {
        self.nu1 + n as f64 * self.params.q() * self.params.lambda_eff()
    }

    /// `mu_n(E) = mu0 + mu1 E`, affine because `G2` is.
    pub fn mu_coefficients(&self, n: usize) -> Result<(Complex64, Complex64)> {
        let rho = self.rho(n);
        if rho.norm() == 0.0 {
            return Err(Error::ZeroNu { n });
        }
        let q = self.params.q();
        let den = 2.0 * q * rho;
        let mu0 = (self.gammas.gamma1 + q * self.gammas.gamma2_const - rho * rho) / den;
        let mu1 = q * self.gammas.gamma2_slope / den;
        Ok((mu0, mu1))
    }

    pub fn level(&self, energy: Complex64, n: usize) -> Result<HierarchyLevel> {
        let rho = self.rho(n);
        if rho.norm() == 0.0 {
            return Err(Error::ZeroNu { n });
        }
        let q = self.params.q();
        let mu = (self.gammas.gamma1 + q * self.gammas.gamma2(energy) - rho * rho) / (2.0 * q * rho);
        Ok(HierarchyLevel {
            n,
            nu: rho,
            mu,
            epsilon: -(mu * mu),
        })
    }

    pub fn superpotential(&self, level: &HierarchyLevel) -> Superpotential {
        Superpotential::from_level(&self.params, level)
    }
}

/// Level data at trial energy `energy`.
pub fn level(params: &PotentialParams, energy: Complex64, n: usize) -> Result<HierarchyLevel> {
    Hierarchy::new(params)?.level(energy, n)
}

/// `W(x) = -nu k/(1 - q k) + offset`, where the offset is `mu` or, on the
/// non-Hermitian branch, `i mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superpotential {
    pub nu: Complex64,
    pub mu: Complex64,
    pub lambda_eff: Complex64,
    pub q: f64,
    pub imaginary_offset: bool,
}

impl Superpotential {
    /// The non-Hermitian ansatz writes the constant as `i mu`, so `mu` is
    /// stored as `-i c` there and the offset still equals the level's `c`.
    pub fn from_level(params: &PotentialParams, level: &HierarchyLevel) -> Self {
        let imaginary_offset = params.branch() == Branch::NonHermitian;
        let mu = if imaginary_offset { -I * level.mu } else { level.mu };
        Self {
            nu: level.nu,
            mu,
            lambda_eff: params.lambda_eff(),
            q: params.q(),
            imaginary_offset,
        }
    }

    pub fn offset(&self) -> Complex64 {
        if self.imaginary_offset {
            I * self.mu
        } else {
            self.mu
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.lambda_eff.im == 0.0 && !self.imaginary_offset
    }

    fn parts(&self, x: f64) -> Result<(Complex64, Complex64)> {
        let k = if self.lambda_eff.im == 0.0 {
            Complex64::new((-self.lambda_eff.re * x).exp(), 0.0)
        } else {
            (-self.lambda_eff * x).exp()
        };
        let den = 1.0 - self.q * k;
        let distance = den.norm();
        if distance < potential::POLE_TOLERANCE || !distance.is_finite() {
            return Err(Error::Pole { x, distance });
        }
        Ok((k, den))
    }

    pub fn eval(&self, x: f64) -> Result<Complex64> {
        let (k, den) = self.parts(x)?;
        Ok(-self.nu * k / den + self.offset())
    }

    /// Closed-form derivative.
    pub fn derivative(&self, x: f64) -> Result<Complex64> {
        let (k, den) = self.parts(x)?;
        Ok(self.nu * self.lambda_eff * k / (den * den))
    }

    pub fn value_and_derivative(&self, x: f64) -> Result<(Complex64, Complex64)> {
        let (k, den) = self.parts(x)?;
        let g = k / den;
        Ok((-self.nu * g + self.offset(), self.nu * self.lambda_eff * g / den))
    }
}

pub fn superpotential_eval(w: &Superpotential, x: f64) -> Result<Complex64> {
    w.eval(x)
}

/// `(W^2 - W', W^2 + W')` sampled on `grid`.
pub fn partner_potentials(w: &Superpotential, grid: &UniformGrid) -> Result<(GridFunction, GridFunction)> {
    let v1 = grid.sample(ExecMode::Parallel, |x| {
        let (wv, dw) = w.value_and_derivative(x)?;
        Ok(wv * wv - dw)
    })?;
    let v2 = grid.sample(ExecMode::Parallel, |x| {
        let (wv, dw) = w.value_and_derivative(x)?;
        Ok(wv * wv + dw)
    })?;
    Ok((v1, v2))
}

/// Sup-norm Riccati mismatch, absolute and relative to the local size of the terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiResidual {
    pub n: usize,
    /// `sup_x |W_n^2 - W_n' - (V^(n) - eps_n)|`.
    pub sup: f64,
    /// `sup_x |r(x)| / (1 + |W_n^2| + |W_n'| + |V^(n)| + |eps_n|)`.
    pub scaled_sup: f64,
}

impl RiccatiResidual {
    pub fn scaled(&self) -> f64 {
        self.scaled_sup
    }
}

/// Riccati residual of level `n` at energy `energy`.
pub fn riccati_residual(params: &PotentialParams, energy: Complex64, n: usize, grid: &UniformGrid) -> Result<RiccatiResidual> {
    let h = Hierarchy::new(params)?;
    let levels = (0..=n).map(|j| h.level(energy, j)).collect::<Result<Vec<_>>>()?;
    riccati_residual_with_levels(params, energy, &levels, grid)
}

/// Residual for caller-supplied level data `levels[0..=n]`; the last entry is checked.
pub fn riccati_residual_with_levels(
    params: &PotentialParams,
    energy: Complex64,
    levels: &[HierarchyLevel],
    grid: &UniformGrid,
) -> Result<RiccatiResidual> {
    let (last, lower) = levels.split_last().ok_or(Error::GridTooCoarse { len: 0, min: 1 })?;
    let w = Superpotential::from_level(params, last);
    let lower: Vec<Superpotential> = lower.iter().map(|l| Superpotential::from_level(params, l)).collect();
    let rows = crate::par::map_range(ExecMode::Parallel, grid.len, |i| -> Result<(f64, f64)> {
        let x = grid.x(i);
        let v_eff = potential::effective_potential(params, energy, x)?;
        let mut target = v_eff;
        for wj in &lower {
            target += 2.0 * wj.derivative(x)?;
        }
        let (wv, dw) = w.value_and_derivative(x)?;
        let r = (wv * wv - dw - (target - last.epsilon)).norm();
        let size = 1.0 + (wv * wv).norm() + dw.norm() + target.norm() + last.epsilon.norm();
        Ok((r, r / size))
    });
    let mut sup = 0.0f64;
    let mut scaled_sup = 0.0f64;
    for row in rows {
        let (r, s) = row?;
        sup = sup.max(r);
        scaled_sup = scaled_sup.max(s);
    }
    Ok(RiccatiResidual {
        n: last.n,
        sup,
        scaled_sup,
    })
}

/// A pole-free grid suited to residual checks on `params`'s branch.
///
/// Hermitian: `[start, start + 40/lambda]` from the admissible domain start.
/// Complex branches with `|q| = 1` have poles at `lambda x = 2 pi j`, so the
/// grid stays strictly inside the first period.
pub fn check_grid(params: &PotentialParams, len: usize) -> Result<UniformGrid> {
    let lambda = params.lambda();
    if params.branch().is_hermitian() {
        let start = params.domain_start(params.default_delta());
        UniformGrid::spanning(start, start + 40.0 / lambda, len)
    } else {
        let period = 2.0 * std::f64::consts::PI / lambda;
        if (params.q().abs() - 1.0).abs() < 1e-9 {
            UniformGrid::spanning(0.02 * period, 0.98 * period, len)
        } else {
            UniformGrid::spanning(0.0, 2.0 * period, len)
        }
    }
}

/// Sign of the derivative in a ladder operator `(+-d/dx + W)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderSign {
    /// `d/dx + W`; annihilates `exp(-int W)`.
    Plus,
    /// `-d/dx + W`.
    Minus,
}

/// `(+-d/dx + W) psi` on the interior points, using fourth-order central differences.
/// The result starts two samples in and is four samples shorter.
pub fn apply_ladder(w: &Superpotential, psi: &GridFunction, sign: LadderSign) -> Result<GridFunction> {
    let n = psi.len();
    if n < crate::grid::MIN_SAMPLES + 4 {
        return Err(Error::GridTooCoarse {
            len: n,
            min: crate::grid::MIN_SAMPLES + 4,
        });
    }
    let h = psi.dx();
    let f = psi.values();
    let s = match sign {
        LadderSign::Plus => 1.0,
        LadderSign::Minus => -1.0,
    };
    let out = (2..n - 2)
        .map(|i| {
            let d = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
            Ok(s * d + w.eval(psi.x(i))? * f[i])
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(psi.x(2), h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn nu1_examples() {
        let nu = solve_nu1(c(0.0), 1.0, c(0.2)).unwrap();
        assert!((nu - c(0.2)).norm() < 1e-15);
        let nu = solve_nu1(c(0.75), 1.0, c(1.0)).unwrap();
        assert!((nu - c(1.5)).norm() < 1e-15);
        let nu = solve_nu1(c(-0.25 * 0.09), 1.0, c(0.3)).unwrap();
        assert!((nu - c(0.15)).norm() < 1e-15);
        // q < 0 with G1 = 0: the chosen root is the zero one.
        assert_eq!(solve_nu1(c(0.0), -1.0, c(0.2)), Err(Error::DegenerateRoot));
    }

    #[test]
    fn hermitian_discriminant_is_enforced() {
        let p = PotentialParams::hermitian(1.0, 0.0, 0.2, 1.0, 1.0).unwrap();
        assert!(matches!(Hierarchy::new(&p), Err(Error::ComplexNu { .. })));
    }

    #[test]
    fn level_examples() {
        let p = PotentialParams::hermitian(0.25, 0.25, 0.2, 1.0, 1.0).unwrap();
        let l = level(&p, c(-0.5), 0).unwrap();
        assert!((l.nu - c(0.2)).norm() < 1e-15);
        assert!((l.mu - c(0.525)).norm() < 1e-14);
        assert!((l.epsilon - c(-0.275625)).norm() < 1e-14);

        // G1 = G2 = 0 (S0 = V0, E = -m): mu = -rho/(2q).
        let p = PotentialParams::hermitian(0.4, 0.4, 0.3, 0.7, 1.0).unwrap();
        let h = Hierarchy::new(&p).unwrap();
        for n in 0..4 {
            let l = h.level(c(-1.0), n).unwrap();
            assert!((l.mu + l.nu / (2.0 * 0.7)).norm() < 1e-14);
            assert!((l.epsilon + l.nu * l.nu / (4.0 * 0.49)).norm() < 1e-14);
        }
    }

    #[test]
    fn level_zero_reproduces_first_matching() {
        let p = PotentialParams::hermitian(0.3, 0.5, 0.25, 0.8, 1.0).unwrap();
        let g = gammas(&p);
        let e = c(0.21);
        let nu1 = solve_nu1(g.gamma1, 0.8, c(0.25)).unwrap();
        let mu1 = (g.gamma1 + 0.8 * g.gamma2(e) - nu1 * nu1) / (2.0 * 0.8 * nu1);
        let l = level(&p, e, 0).unwrap();
        assert_eq!(l.nu, nu1);
        assert!((l.mu - mu1).norm() < 1e-15);
        // mu1 also equals (G2/nu - lambda)/2 from the linear coefficient.
        assert!((l.mu - (g.gamma2(e) / nu1 - 0.25) / 2.0).norm() < 1e-14);
    }

    #[test]
    fn superpotential_examples() {
        let w = Superpotential {
            nu: c(1.0),
            mu: c(0.0),
            lambda_eff: c(1.0),
            q: 1.0,
            imaginary_offset: false,
        };
        assert!((w.eval(2f64.ln()).unwrap() - c(-1.0)).norm() < 1e-14);
        let w = Superpotential { mu: c(0.7), ..w };
        assert!((w.eval(60.0).unwrap() - c(0.7)).norm() < 1e-20);
        let w = Superpotential { nu: c(0.0), ..w };
        assert_eq!(w.eval(0.3).unwrap(), c(0.7));
        let w = Superpotential {
            imaginary_offset: true,
            ..w
        };
        assert_eq!(w.eval(0.3).unwrap(), Complex64::new(0.0, 0.7));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for (lam, q) in [(c(0.3), 0.8), (Complex64::new(0.0, 0.3), 0.8), (c(0.5), -1.0)] {
            let w = Superpotential {
                nu: Complex64::new(0.7, 0.1),
                mu: c(0.2),
                lambda_eff: lam,
                q,
                imaginary_offset: false,
            };
            for x in [0.5, 2.0, 4.0] {
                let h = 1e-4;
                let fd = (w.eval(x + h).unwrap() - w.eval(x - h).unwrap()) / (2.0 * h);
                assert!((fd - w.derivative(x).unwrap()).norm() < 1e-7, "{lam} {q} {x}");
            }
        }
    }

    #[test]
    fn partner_pair_examples() {
        let p = PotentialParams::hermitian(0.3, 0.5, 0.25, 0.8, 1.0).unwrap();
        let h = Hierarchy::new(&p).unwrap();
        let w = h.superpotential(&h.level(c(0.2), 1).unwrap());
        let grid = UniformGrid::spanning(0.0, 20.0, 101).unwrap();
        let (v1, v2) = partner_potentials(&w, &grid).unwrap();
        for (i, x) in grid.points().enumerate() {
            let d = v2.values()[i] - v1.values()[i];
            assert!((d - 2.0 * w.derivative(x).unwrap()).norm() < 1e-13);
        }
        let flat = Superpotential { nu: c(0.0), ..w };
        let (v1, v2) = partner_potentials(&flat, &grid).unwrap();
        assert!(v1.values().iter().chain(v2.values()).all(|v| (v - w.mu * w.mu).norm() < 1e-15));
    }

    #[test]
    fn residual_vanishes_on_exact_data_and_detects_perturbation() {
        let p = PotentialParams::hermitian(0.0, 1.0, 0.2, 1.0, 1.0).unwrap();
        let grid = check_grid(&p, 2001).unwrap();
        let h = Hierarchy::new(&p).unwrap();
        let e = c(0.6);
        for n in 0..4 {
            let r = riccati_residual(&p, e, n, &grid).unwrap();
            assert!(r.scaled() < 1e-10, "n={n} {r:?}");
        }
        let mut levels = vec![h.level(e, 0).unwrap()];
        levels[0].mu += 1e-3;
        levels[0].epsilon = -(levels[0].mu * levels[0].mu);
        let r = riccati_residual_with_levels(&p, e, &levels, &grid).unwrap();
        assert!(r.sup > 1e-4, "{r:?}");
        assert!(r.scaled() > 1e-4, "{r:?}");
    }

    #[test]
    fn residual_on_complex_branches() {
        for p in [
            PotentialParams::pt_symmetric(0.0, 1.0, 0.2, 1.0, 1.0).unwrap(),
            PotentialParams::pt_symmetric(0.3, 0.5, 0.25, 0.8, 1.0).unwrap(),
            PotentialParams::non_hermitian(0.25, 0.1, 0.25, 0.2, 1.0, 1.0).unwrap(),
        ] {
            let grid = check_grid(&p, 1001).unwrap();
            for n in 0..3 {
                let r = riccati_residual(&p, Complex64::new(0.3, -0.2), n, &grid).unwrap();
                assert!(r.scaled() < 1e-10, "{p:?} n={n} {r:?}");
            }
        }
    }

    #[test]
    fn naive_level_comparison_fails_above_ground() {
        // Without the accumulated 2 W_j' terms, W_n^2 - W_n' only matches V_eff - eps_n at n = 0.
        let p = PotentialParams::hermitian(0.0, 1.0, 0.2, 1.0, 1.0).unwrap();
        let h = Hierarchy::new(&p).unwrap();
        let e = c(0.6);
        let l1 = h.level(e, 1).unwrap();
        let r = riccati_residual_with_levels(&p, e, &[l1], &check_grid(&p, 501).unwrap()).unwrap();
        assert!(r.scaled() > 1e-3);
    }

    #[test]
    fn ladder_needs_enough_points() {
        let w = Superpotential {
            nu: c(0.0),
            mu: c(1.0),
            lambda_eff: c(1.0),
            q: 1.0,
            imaginary_offset: false,
        };
        let psi = GridFunction::from_real(1.0, 0.1, &[1.0; 16]).unwrap();
        assert!(matches!(apply_ladder(&w, &psi, LadderSign::Plus), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn lowering_then_raising_is_the_upper_partner() {
        // Omega+ Omega- f = -f'' + (W^2 + W') f for a smooth test function.
        let p = PotentialParams::hermitian(0.3, 0.5, 0.25, 0.8, 1.0).unwrap();
        let h = Hierarchy::new(&p).unwrap();
        let w = h.superpotential(&h.level(c(0.2), 0).unwrap());
        let f = |x: f64| (-(x - 4.0).powi(2)).exp();
        let fpp = |x: f64| (4.0 * (x - 4.0).powi(2) - 2.0) * f(x);
        let mut errs = Vec::new();
        for len in [401usize, 801] {
            let grid = UniformGrid::spanning(0.0, 8.0, len).unwrap();
            let psi = grid.sample(ExecMode::Sequential, |x| Ok(c(f(x)))).unwrap();
            let mid = apply_ladder(&w, &psi, LadderSign::Minus).unwrap();
            let out = apply_ladder(&w, &mid, LadderSign::Plus).unwrap();
            let err = out
                .iter()
                .map(|(x, v)| {
                    let (wv, dw) = w.value_and_derivative(x).unwrap();
                    (v - (-fpp(x) + (wv * wv + dw) * f(x))).norm()
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 1e-4);
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    proptest! {
        #[test]
        fn nu1_solves_quadratic(g1re in -1.0..3.0f64, g1im in -1.0..1.0f64, q in prop_oneof![-2.0..-0.1f64, 0.1..2.0f64],
                                lam in 0.05..2.0f64, complex_lambda in any::<bool>()) {
            let lambda_eff = if complex_lambda { Complex64::new(0.0, lam) } else { c(lam) };
            let g1 = Complex64::new(g1re, g1im);
            prop_assume!(g1.norm() > 1e-6);
            let nu = solve_nu1(g1, q, lambda_eff).unwrap();
            let res = nu * nu - q * lambda_eff * nu - g1;
            let scale = (nu * nu).norm().max(g1.norm()).max((q * lambda_eff * nu).norm());
            prop_assert!(res.norm() <= 1e-13 * scale);
        }

        #[test]
        fn recurrence_and_eps_mu_coupling(s0 in 0.1..2.0f64, v0 in -0.5..0.5f64, vi in -0.3..0.3f64, lam in 0.05..1.0f64,
                                          q in 0.2..1.8f64, b in 0usize..3, er in -0.9..0.9f64, ei in -0.5..0.5f64) {
            let branch = [Branch::Hermitian, Branch::PtSymmetric, Branch::NonHermitian][b];
            let vi = if branch == Branch::NonHermitian { vi } else { 0.0 };
            let p = PotentialParams::new(branch, v0, s0, vi, lam, q, 1.0).unwrap();
            prop_assume!(Hierarchy::new(&p).is_ok());
            let h = Hierarchy::new(&p).unwrap();
            let e = if branch.is_hermitian() { c(er) } else { Complex64::new(er, ei) };
            for n in 0..6 {
                let a = h.level(e, n).unwrap();
                let b = h.level(e, n + 1).unwrap();
                prop_assert!((b.nu - a.nu - q * p.lambda_eff()).norm() < 1e-14);
                prop_assert_eq!(a.epsilon + a.mu * a.mu, c(0.0));
                if branch.is_hermitian() {
                    prop_assert_eq!(a.mu.im, 0.0);
                    prop_assert_eq!(a.nu.im, 0.0);
                }
            }
        }
    }
}
