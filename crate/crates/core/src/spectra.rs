//! Self-consistent bound-state energies.
//!
//! `G2` depends on the energy, so the level condition `eps_n(E) = E^2 - m^2`
//! is implicit. With `mu_n(E) = mu0 + mu1 E` it reads
//!
//! ```text
//! f_n(E) = E^2 - m^2 + (mu0 + mu1 E)^2 = 0,
//! ```
//!
//! a quadratic in `E`. The Hermitian branch is solved by a sign-change scan of
//! `(-m, m)` followed by bisection; the complex branches by Newton iteration
//! seeded with the explicit `+-(i/2q) sqrt(...)` formula evaluated at `E = 0`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::par::{self, ExecMode};
use crate::potential::{Branch, PotentialParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Classification bits attached to an [`EnergyLevel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct LevelFlags(u8);

impl LevelFlags {
    /// Square integrable on the Hermitian domain: `Re(mu) > 0`, and for `q < 0`
    /// also `rho_n / |q| > Re(mu)` so the state decays as `x -> -inf`.
    pub const NORMALIZABLE_MU_POSITIVE: Self = Self(1);
    pub const REAL_BOUND_STATE: Self = Self(2);
    pub const COMPLEX_PAIR: Self = Self(4);
    pub const DOUBLE_ROOT: Self = Self(8);
    /// `Re(mu) >= 0` up to round-off: `exp(-mu x)` does not grow.
    pub const BOUNDED: Self = Self(16);

    const NAMES: [(Self, &'static str); 5] = [
        (Self::NORMALIZABLE_MU_POSITIVE, "normalizable"),
        (Self::REAL_BOUND_STATE, "real-bound"),
        (Self::COMPLEX_PAIR, "complex-pair"),
        (Self::DOUBLE_ROOT, "double-root"),
        (Self::BOUNDED, "bounded"),
    ];

    pub fn empty() -> Self {
        Self(0)
    }

    pub fn contains(self, other: Self) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Self) {
        self.0 |= other.0;
    }

    pub fn names(self) -> Vec<&'static str> {
        Self::NAMES
            .iter()
            .filter(|(f, _)| self.contains(*f))
            .map(|(_, n)| *n)
            .collect()
    }
}

impl fmt::Display for LevelFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join("|"))
    }
}

impl From<LevelFlags> for Vec<String> {
    fn from(f: LevelFlags) -> Self {
        f.names().into_iter().map(String::from).collect()
    }
}

impl TryFrom<Vec<String>> for LevelFlags {
    type Error = String;

    fn try_from(names: Vec<String>) -> std::result::Result<Self, String> {
        let mut out = LevelFlags::empty();
        for name in names {
            let (flag, _) = Self::NAMES
                .iter()
                .find(|(_, n)| *n == name)
                .ok_or_else(|| format!("unknown level flag '{name}'"))?;
            out.insert(*flag);
        }
        Ok(out)
    }
}

/// A solved bound-state energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub n: usize,
    pub energy: Complex64,
    /// `E^2 - m^2`, recomputed from `energy`.
    pub epsilon: Complex64,
    pub mu: Complex64,
    /// `|f_n(E)|`.
    pub residual: f64,
    pub branch: Branch,
    pub flags: LevelFlags,
    /// `|E - (+-sqrt(m^2 - mu^2))|` when `V0_eff = 0`.
    pub closed_form_diff: Option<f64>,
}

impl EnergyLevel {
    pub fn is_normalizable(&self) -> bool {
        self.flags.contains(LevelFlags::NORMALIZABLE_MU_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub scan_points: usize,
    pub bisection_tol: f64,
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            scan_points: 2048,
            bisection_tol: 1e-13,
            residual_tol: 1e-12,
            max_iterations: 200,
        }
    }
}

/// `f_n(E) = E^2 - m^2 + mu_n(E)^2` for one level, with `mu_n(E) = mu0 + mu1 E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelEquation {
    pub n: usize,
    pub m: f64,
    pub mu0: Complex64,
    pub mu1: Complex64,
    pub rho: Complex64,
}

impl LevelEquation {
    pub fn new(h: &Hierarchy, n: usize) -> Result<Self> {
        let (mu0, mu1) = h.mu_coefficients(n)?;
        Ok(Self {
            n,
            m: h.params().m(),
            mu0,
            mu1,
            rho: h.rho(n),
        })
    }

    pub fn mu(&self, e: Complex64) -> Complex64 {
        self.mu0 + self.mu1 * e
    }

    pub fn eval(&self, e: Complex64) -> Complex64 {
        let mu = self.mu(e);
        e * e - self.m * self.m + mu * mu
    }

    pub fn derivative(&self, e: Complex64) -> Complex64 {
        2.0 * e + 2.0 * self.mu1 * self.mu(e)
    }

    fn eval_real(&self, e: f64) -> f64 {
        let mu = self.mu0.re + self.mu1.re * e;
        e * e - self.m * self.m + mu * mu
    }

    /// Stationary point of the quadratic.
    fn vertex(&self) -> Complex64 {
        -self.mu1 * self.mu0 / (1.0 + self.mu1 * self.mu1)
    }
}

/// `f_n(E)`; a root is a self-consistent bound energy of level `n`.
pub fn energy_residual(params: &PotentialParams, n: usize, energy: Complex64) -> Result<Complex64> {
    let h = Hierarchy::new(params)?;
    Ok(LevelEquation::new(&h, n)?.eval(energy))
}

/// The explicit `+-(i/2q) sqrt([rho - C/rho]^2 - 4 q^2 m^2)` pair with
/// `C = G1 + q G2(e_frozen)`.
pub fn explicit_pair(h: &Hierarchy, n: usize, e_frozen: Complex64) -> (Complex64, Complex64) {
    let p = h.params();
    let q = p.q();
    let rho = h.rho(n);
    let c = h.gammas().gamma1 + q * h.gammas().gamma2(e_frozen);
    let t = rho - c / rho;
    let root = (t * t - 4.0 * q * q * p.m() * p.m()).sqrt();
    let e = I / (2.0 * q) * root;
    (e, -e)
}

fn make_level(h: &Hierarchy, eq: &LevelEquation, energy: Complex64, extra: LevelFlags) -> EnergyLevel {
    let p = h.params();
    let m = p.m();
    let mu = eq.mu(energy);
    let mut flags = extra;
    let left_decay = !(p.branch().is_hermitian() && p.q() < 0.0) || eq.rho.re / p.q().abs() > mu.re;
    if mu.re > 0.0 && left_decay {
        flags.insert(LevelFlags::NORMALIZABLE_MU_POSITIVE);
    }
    if mu.re >= -1e-12 * mu.norm().max(1.0) {
        flags.insert(LevelFlags::BOUNDED);
    }
    let tiny = 1e-12 * energy.norm().max(1.0);
    if energy.im.abs() <= tiny && energy.re.abs() < m {
        flags.insert(LevelFlags::REAL_BOUND_STATE);
    }
    if energy.im.abs() > tiny {
        flags.insert(LevelFlags::COMPLEX_PAIR);
    }
    let closed_form_diff = (p.v0_eff() == Complex64::new(0.0, 0.0)).then(|| {
        let r = (m * m - mu * mu).sqrt();
        (energy - r).norm().min((energy + r).norm())
    });
    EnergyLevel {
        n: eq.n,
        energy,
        epsilon: energy * energy - m * m,
        mu,
        residual: eq.eval(energy).norm(),
        branch: p.branch(),
        flags,
        closed_form_diff,
    }
}

/// Bound energies of level `n` with default solver options.
pub fn solve_level(params: &PotentialParams, n: usize) -> Result<Vec<EnergyLevel>> {
    solve_level_with(params, n, &SolverOptions::default())
}

pub fn solve_level_with(params: &PotentialParams, n: usize, opts: &SolverOptions) -> Result<Vec<EnergyLevel>> {
    let h = Hierarchy::new(params)?;
    let eq = LevelEquation::new(&h, n)?;
    if params.branch().is_hermitian() {
        real_roots(&h, &eq, opts)
    } else {
        let roots = newton_roots(&h, &eq, opts)?;
        Ok(roots
            .into_iter()
            .map(|e| make_level(&h, &eq, e, LevelFlags::empty()))
            .collect())
    }
}

fn real_roots(h: &Hierarchy, eq: &LevelEquation, opts: &SolverOptions) -> Result<Vec<EnergyLevel>> {
    let m = eq.m;
    let f = |e: f64| eq.eval_real(e);
    let mut nodes: Vec<f64> = (0..=opts.scan_points)
        .map(|j| -m + 2.0 * m * j as f64 / opts.scan_points as f64)
        .collect();
    // Two roots closer than the scan spacing straddle the vertex.
    let vertex = eq.vertex().re;
    if vertex.abs() < m {
        let pos = nodes.partition_point(|&e| e < vertex);
        nodes.insert(pos, vertex);
    }
    let values: Vec<f64> = nodes.iter().map(|&e| f(e)).collect();

    let mut roots: Vec<(f64, LevelFlags)> = Vec::new();
    for j in 0..nodes.len() - 1 {
        let (a, b) = (nodes[j], nodes[j + 1]);
        let (fa, fb) = (values[j], values[j + 1]);
        if fa == 0.0 && a.abs() < m {
            roots.push((a, LevelFlags::empty()));
        } else if fa * fb < 0.0 {
            roots.push((bisect(&f, a, b, fa, opts.bisection_tol * m), LevelFlags::empty()));
        }
    }
    // A vanishing discriminant may survive rounding as two roots a few ulps^(1/2) apart.
    if vertex.abs() < m
        && f(vertex).abs() <= opts.residual_tol
        && roots.iter().all(|(e, _)| (e - vertex).abs() < 1e-6 * m)
    {
        roots = vec![(vertex, LevelFlags::DOUBLE_ROOT)];
    }
    roots.retain(|(e, _)| e.abs() < m);
    roots.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    if roots.is_empty() {
        return Err(Error::NoRoot { n: eq.n });
    }
    roots.truncate(2);
    let levels: Vec<EnergyLevel> = roots
        .into_iter()
        .map(|(e, flags)| make_level(h, eq, Complex64::new(e, 0.0), flags))
        .collect();
    if let Some(bad) = levels.iter().find(|l| l.residual >= opts.residual_tol) {
        return Err(Error::NonConvergence {
            iterations: opts.max_iterations,
            residual: bad.residual,
        });
    }
    Ok(levels)
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let fb = f(b);
    let mut best = if fa.abs() <= fb.abs() { a } else { b };
    // Newton polish inside the bracket.
    let (lo, hi) = (a.min(b), a.max(b));
    for _ in 0..3 {
        let h = 1e-7 * best.abs().max(1e-3);
        let d = (f(best + h) - f(best - h)) / (2.0 * h);
        if d == 0.0 {
            break;
        }
        let next = best - f(best) / d;
        if next < lo || next > hi || f(next).abs() >= f(best).abs() {
            break;
        }
        best = next;
    }
    best
}

/// Complex-plane Newton iteration from both explicit seeds; distinct roots only.
fn newton_roots(h: &Hierarchy, eq: &LevelEquation, opts: &SolverOptions) -> Result<Vec<Complex64>> {
    let (plus, minus) = explicit_pair(h, eq.n, Complex64::new(0.0, 0.0));
    let mut out: Vec<Complex64> = Vec::with_capacity(2);
    for seed in [plus, minus] {
        let root = newton(eq, seed, opts)?;
        if out.iter().all(|r| (r - root).norm() > 1e-10 * root.norm().max(1.0)) {
            out.push(root);
        }
    }
    Ok(out)
}

fn newton(eq: &LevelEquation, seed: Complex64, opts: &SolverOptions) -> Result<Complex64> {
    let mut e = seed;
    let mut fe = eq.eval(e);
    let mut converged_steps = 0;
    for _ in 0..opts.max_iterations {
        let mut d = eq.derivative(e);
        if d.norm() == 0.0 {
            d = Complex64::new(1e-8, 0.0);
        }
        let next = e - fe / d;
        let fnext = eq.eval(next);
        if fe.norm() < opts.residual_tol {
            converged_steps += 1;
            // Keep the better point once at working precision.
            if fnext.norm() >= fe.norm() || converged_steps > 3 {
                return Ok(e);
            }
        }
        e = next;
        fe = fnext;
    }
    if fe.norm() < opts.residual_tol {
        return Ok(e);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: fe.norm(),
    })
}

/// Complex roots of `f_n` for any branch, from both explicit seeds.
pub fn complex_roots(params: &PotentialParams, n: usize) -> Result<Vec<EnergyLevel>> {
    let h = Hierarchy::new(params)?;
    let eq = LevelEquation::new(&h, n)?;
    let opts = SolverOptions::default();
    Ok(newton_roots(&h, &eq, &opts)?
        .into_iter()
        .map(|e| make_level(&h, &eq, e, LevelFlags::empty()))
        .collect())
}

/// Bound levels `0..=n_max`, stopping at the first level without a root or
/// without an acceptable root: `Re(mu) > 0` on the Hermitian branch, and
/// `Re(mu) >= 0` (bounded, possibly oscillatory) on the complex branches.
pub fn spectrum(params: &PotentialParams, n_max: usize) -> Result<Vec<EnergyLevel>> {
    spectrum_with(params, n_max, &SolverOptions::default(), ExecMode::Parallel)
}

pub fn spectrum_with(params: &PotentialParams, n_max: usize, opts: &SolverOptions, mode: ExecMode) -> Result<Vec<EnergyLevel>> {
    Hierarchy::new(params)?;
    let wanted = if params.branch().is_hermitian() {
        LevelFlags::NORMALIZABLE_MU_POSITIVE
    } else {
        LevelFlags::BOUNDED
    };
    let per_level = par::map_range(mode, n_max + 1, |n| solve_level_with(params, n, opts));
    let mut out = Vec::new();
    for result in per_level {
        match result {
            Ok(levels) => {
                if !levels.iter().any(|l| l.flags.contains(wanted)) {
                    break;
                }
                out.extend(levels);
            }
            Err(Error::NoRoot { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// The `+-` pair of the explicit energy formula at the self-consistent `G2`.
///
/// `plus` is a certified root of `f_n` (Newton from the `+` seed, or the
/// closed form when `V0_eff = 0`); `minus` is exactly `-plus`. When
/// `V0_eff != 0`, `minus` solves the formula with `G2` frozen at `plus` and is
/// in general not itself a root of `f_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPair {
    pub n: usize,
    pub plus: Complex64,
    pub minus: Complex64,
    pub gamma2: Complex64,
    pub mu: Complex64,
    /// `plus^2 - m^2`.
    pub epsilon: Complex64,
    /// `|f_n(plus)|`.
    pub residual: f64,
    pub re_epsilon_negative: bool,
    pub iterations_used: bool,
}

fn paired_energy(params: &PotentialParams, n: usize) -> Result<EnergyPair> {
    let h = Hierarchy::new(params)?;
    let eq = LevelEquation::new(&h, n)?;
    let zero = Complex64::new(0.0, 0.0);
    let (seed, _) = explicit_pair(&h, n, zero);
    let (plus, iterations_used) = if params.v0_eff() == zero {
        (seed, false)
    } else {
        (newton(&eq, seed, &SolverOptions::default())?, true)
    };
    let epsilon = plus * plus - params.m() * params.m();
    Ok(EnergyPair {
        n,
        plus,
        minus: -plus,
        gamma2: h.gammas().gamma2(plus),
        mu: eq.mu(plus),
        epsilon,
        residual: eq.eval(plus).norm(),
        re_epsilon_negative: epsilon.re < 0.0,
        iterations_used,
    })
}

pub fn pt_energy(params: &PotentialParams, n: usize) -> Result<EnergyPair> {
    if params.branch() != Branch::PtSymmetric {
        return Err(Error::WrongBranch { required: "pt-symmetric" });
    }
    paired_energy(params, n)
}

pub fn nonhermitian_energy(params: &PotentialParams, n: usize) -> Result<EnergyPair> {
    if params.branch() != Branch::NonHermitian {
        return Err(Error::WrongBranch { required: "non-hermitian" });
    }
    paired_energy(params, n)
}
