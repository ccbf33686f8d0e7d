//! Hierarchy ground states `psi = exp(-int W)`.
//!
//! With the ansatz superpotential the antiderivative is closed form:
//!
//! ```text
//! int W dx = c x - (nu / (q lambda_eff)) ln(1 - q k(x))
//! psi(x)   = (1 - q k(x))^(nu / (q lambda_eff)) exp(-c x)
//! ```
//!
//! where `c` is the superpotential offset (`mu`, or `i mu` on the
//! non-Hermitian branch).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::hierarchy::{HierarchyLevel, Superpotential};
use crate::potential::{Branch, PotentialParams, POLE_TOLERANCE};

/// Formula the wavefunction routines implement, for output metadata.
pub const WAVEFUNCTION_FORM: &str =
    "psi(x) = (1 - q exp(-lambda_eff x))^(nu/(q lambda_eff)) * exp(-mu_term x), integrated from psi = exp(-int W)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Unit discrete L2 norm.
    L2,
    /// Unit maximum modulus; used where oscillatory tails need not be square integrable.
    MaxModulus,
}

pub fn normalization_for(branch: Branch) -> Normalization {
    match branch {
        Branch::Hermitian => Normalization::L2,
        _ => Normalization::MaxModulus,
    }
}

/// `ln(1 - z)`, accurate for small `|z|`.
pub fn ln_one_minus(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        // -(z + z^2/2 + ...), truncation below 1e-27.
        let mut term = z;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 1..=9 {
            sum += term / j as f64;
            term *= z;
        }
        -sum
    } else {
        (1.0 - z).ln()
    }
}

fn screening(lambda_eff: Complex64, x: f64) -> Complex64 {
    if lambda_eff.im == 0.0 {
        Complex64::new((-lambda_eff.re * x).exp(), 0.0)
    } else {
        (-lambda_eff * x).exp()
    }
}

/// `ln psi` without normalization, principal branch of the logarithm.
fn log_psi(w: &Superpotential, x: f64) -> Result<Complex64> {
    let k = screening(w.lambda_eff, x);
    let qk = w.q * k;
    let distance = (1.0 - qk).norm();
    if distance < POLE_TOLERANCE {
        return Err(Error::Pole { x, distance });
    }
    let exponent = w.nu / (w.q * w.lambda_eff);
    Ok(exponent * ln_one_minus(qk) - w.offset() * x)
}

/// Ground state of `w` on `grid`, normalized per branch.
///
/// The logarithm is unwrapped along the grid so the phase stays continuous
/// when `1 - q k` winds around the origin.
pub fn ground_state_from_w(w: &Superpotential, grid: &UniformGrid) -> Result<GridFunction> {
    let hermitian = w.is_hermitian();
    if hermitian && w.offset().re <= 0.0 {
        return Err(Error::NonNormalizable { re_mu: w.offset().re });
    }
    let exponent = w.nu / (w.q * w.lambda_eff);
    let mut logs = Vec::with_capacity(grid.len);
    let mut prev_arg: Option<f64> = None;
    let mut turns = 0.0;
    for x in grid.points() {
        let k = screening(w.lambda_eff, x);
        let qk = w.q * k;
        let distance = (1.0 - qk).norm();
        if distance < POLE_TOLERANCE {
            return Err(Error::Pole { x, distance });
        }
        let mut l = ln_one_minus(qk);
        if let Some(prev) = prev_arg {
            let jump = l.im + turns - prev;
            if jump > std::f64::consts::PI {
                turns -= 2.0 * std::f64::consts::PI;
            } else if jump < -std::f64::consts::PI {
                turns += 2.0 * std::f64::consts::PI;
            }
        }
        l.im += turns;
        prev_arg = Some(l.im);
        logs.push(exponent * l - w.offset() * x);
    }
    // Shift before exponentiating so the largest amplitude is 1.
    let shift = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<Complex64> = logs
        .into_iter()
        .map(|l| {
            let v = (l - shift).exp();
            if hermitian {
                Complex64::new(v.re, 0.0)
            } else {
                v
            }
        })
        .collect();
    let mut psi = GridFunction::new(grid.start, grid.step, values)?;
    normalize(&mut psi, if hermitian { Normalization::L2 } else { Normalization::MaxModulus });
    Ok(psi)
}

pub fn normalize(psi: &mut GridFunction, how: Normalization) {
    let n = match how {
        Normalization::L2 => psi.l2_norm(),
        Normalization::MaxModulus => psi.max_modulus(),
    };
    if n > 0.0 {
        psi.scale(Complex64::new(1.0 / n, 0.0));
    }
}

/// Unnormalized closed-form ground state of `level` at `x`.
pub fn closed_form_psi(params: &PotentialParams, level: &HierarchyLevel, x: f64) -> Result<Complex64> {
    let w = Superpotential::from_level(params, level);
    Ok(log_psi(&w, x)?.exp())
}

/// Closed form sampled on `grid`, normalized per branch.
pub fn closed_form_on_grid(params: &PotentialParams, level: &HierarchyLevel, grid: &UniformGrid) -> Result<GridFunction> {
    let mut psi = grid.sample(crate::par::ExecMode::Sequential, |x| closed_form_psi(params, level, x))?;
    normalize(&mut psi, normalization_for(params.branch()));
    Ok(psi)
}

/// Strict sign changes of the real part, ignoring samples below `1e-12 max|f|`.
pub fn node_count(f: &GridFunction) -> usize {
    let floor = 1e-12 * f.values().iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let mut last = 0.0f64;
    let mut nodes = 0;
    for v in f.values() {
        if v.re.abs() <= floor {
            continue;
        }
        if last != 0.0 && (last > 0.0) != (v.re > 0.0) {
            nodes += 1;
        }
        last = v.re;
    }
    nodes
}
