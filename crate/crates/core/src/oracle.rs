//! Finite-difference cross-check of the analytic spectra (Hermitian branch).
//!
//! The reduced equation `-psi'' + V_eff(x; E) psi = (E^2 - m^2) psi` is
//! discretized on a box of length `x_max` with Dirichlet ends. For `q > 0` the
//! box starts at the pole `ln(q)/lambda`, where the bound states vanish. For
//! `q < 0` the potential is regular on the whole line and tends to a constant
//! as `x -> -inf`, so the box is `[-x_max/2, x_max/2]`. For fixed `E` this gives a
//! real symmetric banded matrix whose k-th eigenvalue `eps_k(E)` is found by
//! Sturm-count bisection. The energy dependence is resolved by an outer
//! secant iteration on `g(E) = eps_k(E) - (E^2 - m^2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::hierarchy::Superpotential;
use crate::par::{self, ExecMode};
use crate::potential::{self, PotentialParams};
use crate::spectra::EnergyLevel;
use crate::wavefunctions::node_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn order(self) -> i32 {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
        }
    }
}

impl TryFrom<u8> for FdOrder {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            2 => Ok(FdOrder::Second),
            4 => Ok(FdOrder::Fourth),
            _ => Err(format!("finite-difference order must be 2 or 4, got {v}")),
        }
    }
}

impl From<FdOrder> for u8 {
    fn from(o: FdOrder) -> u8 {
        o.order() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Box length; `None` means `40 / lambda`.
    pub x_max: Option<f64>,
    /// Interior grid points.
    pub n_points: usize,
    pub fd_order: FdOrder,
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Energy samples used to bracket roots of `g` on `(-m, m)`.
    pub scan_points: usize,
    /// Solve again on the halved grid to estimate the discretization error.
    pub richardson: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            x_max: None,
            n_points: 4000,
            fd_order: FdOrder::Fourth,
            outer_tol: 1e-10,
            max_outer: 100,
            scan_points: 48,
            richardson: true,
        }
    }
}

impl OracleConfig {
    pub fn x_max_for(&self, p: &PotentialParams) -> f64 {
        self.x_max.unwrap_or(40.0 / p.lambda())
    }

    pub fn validate(&self, p: &PotentialParams) -> Result<()> {
        if self.n_points < 64 {
            return Err(Error::GridTooCoarse {
                len: self.n_points,
                min: 64,
            });
        }
        let x_max = self.x_max_for(p);
        if !(x_max > 10.0 / p.lambda()) {
            return Err(Error::InvalidParameter {
                name: "oracle.x_max",
                value: x_max,
                reason: "box must extend beyond 10/lambda",
            });
        }
        Ok(())
    }

    fn refined(&self) -> Self {
        Self {
            n_points: 2 * self.n_points + 1,
            ..*self
        }
    }
}

/// Real symmetric matrix with at most two off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetric {
    pub diag: Vec<f64>,
    pub off1: Vec<f64>,
    pub off2: Vec<f64>,
}

impl BandedSymmetric {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        match c - r {
            0 => self.diag[r],
            1 => self.off1[r],
            2 => self.off2[r],
            _ => 0.0,
        }
    }

    /// Eigenvalue bounds from Gershgorin discs.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.size();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            for d in 1..=2 {
                if i >= d {
                    r += self.get(i - d, i).abs();
                }
                if i + d < n {
                    r += self.get(i, i + d).abs();
                }
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues below `sigma`, from the inertia of `A - sigma I = L D L^T`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.size();
        let pivmin = f64::MIN_POSITIVE.sqrt() * (1.0 + sigma.abs());
        let mut count = 0;
        // d_{i-2}, d_{i-1}, l_{i-1,i-2}
        let (mut d2, mut d1, mut l1_prev) = (1.0f64, 1.0f64, 0.0f64);
        for i in 0..n {
            let a2 = if i >= 2 { self.off2[i - 2] } else { 0.0 };
            let a1 = if i >= 1 { self.off1[i - 1] } else { 0.0 };
            let l2 = if i >= 2 { a2 / d2 } else { 0.0 };
            let l1 = if i >= 1 { (a1 - l2 * d2 * l1_prev) / d1 } else { 0.0 };
            let mut d = self.diag[i] - sigma - l2 * l2 * d2 - l1 * l1 * d1;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
            d2 = d1;
            d1 = d;
            l1_prev = l1;
        }
        count
    }

    /// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
    pub fn kth_eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1e-300) || mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `count` smallest eigenvalues.
    pub fn lowest(&self, count: usize) -> Vec<f64> {
        (0..count.min(self.size())).map(|k| self.kth_eigenvalue(k)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(2);
                let hi = (i + 2).min(n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Eigenvector for an eigenvalue estimate `sigma`, by inverse iteration.
    pub fn eigenvector(&self, sigma: f64) -> Vec<f64> {
        let n = self.size();
        let shift = sigma + 1e-10 * sigma.abs().max(1.0) * f64::EPSILON.sqrt();
        let lu = BandLu::factor(self, shift);
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            v = lu.solve(&v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        // Fix the sign so the largest component is positive.
        let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }
}

/// LU with partial pivoting of `A - shift I` for a pentadiagonal `A`.
/// Row `i` keeps columns `i-2 ..= i+4` (fill-in from pivoting).
struct BandLu {
    rows: Vec<[f64; 7]>,
    perm: Vec<usize>,
    mult: Vec<[f64; 2]>,
}

impl BandLu {
    const KL: usize = 2;

    fn factor(a: &BandedSymmetric, shift: f64) -> Self {
        let n = a.size();
        let mut rows = vec![[0.0f64; 7]; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                let v = a.get(i, j) - if i == j { shift } else { 0.0 };
                rows[i][j + Self::KL - i] = v;
            }
        }
        let get = |rows: &Vec<[f64; 7]>, i: usize, j: usize| -> f64 {
            if j + Self::KL < i || j > i + 4 {
                0.0
            } else {
                rows[i][j + Self::KL - i]
            }
        };
        let mut perm = vec![0usize; n];
        let mut mult = vec![[0.0f64; 2]; n];
        let tiny = f64::EPSILON * a.gershgorin().1.abs().max(1.0);
        for c in 0..n {
            let last = (c + Self::KL).min(n - 1);
            let mut p = c;
            for r in c..=last {
                if get(&rows, r, c).abs() > get(&rows, p, c).abs() {
                    p = r;
                }
            }
            perm[c] = p;
            if p != c {
                // Swap by absolute column over the reachable range.
                let hi = (c + 4).min(n - 1);
                for j in c..=hi {
                    let vc = get(&rows, c, j);
                    let vp = get(&rows, p, j);
                    if j <= p + 4 {
                        rows[p][j + Self::KL - p] = vc;
                    }
                    rows[c][j + Self::KL - c] = vp;
                }
            }
            if get(&rows, c, c).abs() < tiny {
                rows[c][Self::KL] = tiny;
            }
            let piv = get(&rows, c, c);
            for (t, r) in (c + 1..=last).enumerate() {
                let f = get(&rows, r, c) / piv;
                mult[c][t] = f;
                if f != 0.0 {
                    for j in c..=(c + 4).min(n - 1) {
                        if j <= r + 4 {
                            let v = get(&rows, r, j) - f * get(&rows, c, j);
                            rows[r][j + Self::KL - r] = v;
                        }
                    }
                }
            }
        }
        Self { rows, perm, mult }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for c in 0..n {
            y.swap(c, self.perm[c]);
            let last = (c + Self::KL).min(n - 1);
            for (t, r) in (c + 1..=last).enumerate() {
                y[r] -= self.mult[c][t] * y[c];
            }
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..=(i + 4).min(n - 1) {
                s -= self.rows[i][j + Self::KL - i] * y[j];
            }
            y[i] = s / self.rows[i][Self::KL];
        }
        y
    }
}

/// `-d^2/dx^2 + V` with Dirichlet ends on interior samples `potential` of spacing `h`.
pub fn assemble(potential: &[f64], h: f64, order: FdOrder) -> BandedSymmetric {
    assemble_with_wall_residue(potential, h, order, 0.0)
}

/// As [`assemble`], for a potential that behaves like `residue / (x - a)` at the left wall.
///
/// The fourth-order ghost value beyond the left wall is taken from the local
/// expansion `psi'' = residue * psi'` instead of a plain odd mirror.
pub fn assemble_with_wall_residue(potential: &[f64], h: f64, order: FdOrder, residue: f64) -> BandedSymmetric {
    let n = potential.len();
    let h2 = h * h;
    match order {
        FdOrder::Second => BandedSymmetric {
            diag: potential.iter().map(|v| 2.0 / h2 + v).collect(),
            off1: vec![-1.0 / h2; n.saturating_sub(1)],
            off2: vec![0.0; n.saturating_sub(2)],
        },
        FdOrder::Fourth => {
            // (f_{i-2} - 16 f_{i-1} + 30 f_i - 16 f_{i+1} + f_{i+2}) / 12h^2, with the
            // ghost value beyond each wall set to minus its mirror image.
            let mut diag: Vec<f64> = potential.iter().map(|v| 30.0 / (12.0 * h2) + v).collect();
            if n > 0 {
                let ghost = -1.0 + residue * h / (1.0 + 0.5 * residue * h);
                diag[0] += ghost / (12.0 * h2);
                diag[n - 1] -= 1.0 / (12.0 * h2);
            }
            BandedSymmetric {
                diag,
                off1: vec![-16.0 / (12.0 * h2); n.saturating_sub(1)],
                off2: vec![1.0 / (12.0 * h2); n.saturating_sub(2)],
            }
        }
    }
}

/// Discretized operator at a fixed energy.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub matrix: BandedSymmetric,
    /// Interior nodes; the walls sit one step outside either end.
    pub grid: UniformGrid,
}

/// Left wall of the oracle box.
pub fn wall(p: &PotentialParams, cfg: &OracleConfig) -> f64 {
    p.pole().unwrap_or(-0.5 * cfg.x_max_for(p))
}

/// Coefficient `c` of `V_eff ~ c / (x - a)` at the wall; zero unless the wall is a
/// pole with no inverse-square part.
pub fn wall_residue(p: &PotentialParams, energy: f64) -> f64 {
    let g = potential::gammas(p);
    if p.pole().is_none() || g.gamma1.norm() > 1e-14 * (1.0 + p.s0() * p.s0()) {
        return 0.0;
    }
    -g.gamma2(Complex64::new(energy, 0.0)).re / (p.q() * p.lambda())
}

pub fn discretize(p: &PotentialParams, energy: f64, cfg: &OracleConfig) -> Result<Discretization> {
    if !p.branch().is_hermitian() {
        return Err(Error::WrongBranch { required: "hermitian" });
    }
    cfg.validate(p)?;
    let a = wall(p, cfg);
    let n = cfg.n_points;
    let h = cfg.x_max_for(p) / (n + 1) as f64;
    let grid = UniformGrid::new(a + h, h, n)?;
    let e = Complex64::new(energy, 0.0);
    let v = grid
        .points()
        .map(|x| potential::effective_potential(p, e, x).map(|v| v.re))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Discretization {
        matrix: assemble_with_wall_residue(&v, h, cfg.fd_order, wall_residue(p, energy)),
        grid,
    })
}

/// `eps_k(E)`.
pub fn eigenvalue_at(p: &PotentialParams, energy: f64, k: usize, cfg: &OracleConfig) -> Result<f64> {
    Ok(discretize(p, energy, cfg)?.matrix.kth_eigenvalue(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub k: usize,
    pub energy: f64,
    pub epsilon: f64,
    pub eigenvector: GridFunction,
    pub outer_iters: usize,
    /// Estimated error of `energy`, `2^p |E_h/2 - E_h| / (2^p - 1)`; `None` if not requested.
    pub grid_convergence_est: Option<f64>,
}

impl OracleResult {
    pub fn nodes(&self) -> usize {
        node_count(&self.eigenvector)
    }
}

/// Illinois-safeguarded secant on a sign-changing bracket.
fn refine(g: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64, tol: f64, max_iter: usize, k: usize) -> Result<(f64, usize)> {
    let mut side = 0i8;
    for it in 1..=max_iter {
        let x = (a * gb - b * ga) / (gb - ga);
        let gx = g(x)?;
        if gx.abs() < tol || (b - a).abs() < 1e-15 * x.abs().max(1.0) {
            return Ok((x, it));
        }
        if gx * gb < 0.0 {
            a = b;
            ga = gb;
            side = 0;
        } else {
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        b = x;
        gb = gx;
    }
    Err(Error::OuterDivergence { k })
}

fn roots_of_g(p: &PotentialParams, k: usize, cfg: &OracleConfig) -> Result<Vec<(f64, usize)>> {
    let m = p.m();
    let g = |e: f64| -> Result<f64> { Ok(eigenvalue_at(p, e, k, cfg)? - (e * e - m * m)) };
    let s = cfg.scan_points.max(4);
    let edge = m * (1.0 - 1e-12);
    let nodes: Vec<f64> = (0..=s).map(|j| -edge + 2.0 * edge * j as f64 / s as f64).collect();
    let eps = par::map(ExecMode::Parallel, &nodes, |&e| eigenvalue_at(p, e, k, cfg));
    let eps = eps.into_iter().collect::<Result<Vec<f64>>>()?;
    if eps.iter().all(|&v| v >= 0.0) {
        return Err(Error::NoBoundState { k });
    }
    let gs: Vec<f64> = nodes.iter().zip(&eps).map(|(e, v)| v - (e * e - m * m)).collect();
    let mut out = Vec::new();
    for j in 0..s {
        let (ga, gb) = (gs[j], gs[j + 1]);
        if ga == 0.0 {
            out.push((nodes[j], 0));
        } else if ga * gb < 0.0 {
            out.push(refine(&g, nodes[j], nodes[j + 1], ga, gb, cfg.outer_tol, cfg.max_outer, k)?);
        }
    }
    if out.is_empty() {
        return Err(Error::NoBoundState { k });
    }
    Ok(out)
}

fn nearest_root_near(p: &PotentialParams, k: usize, cfg: &OracleConfig, guess: f64) -> Result<f64> {
    let m = p.m();
    let g = |e: f64| -> Result<f64> { Ok(eigenvalue_at(p, e, k, cfg)? - (e * e - m * m)) };
    // Expand a bracket around the coarse-grid root.
    let mut step = 1e-6 * m;
    for _ in 0..40 {
        let a = (guess - step).max(-m);
        let b = (guess + step).min(m);
        let (ga, gb) = (g(a)?, g(b)?);
        if ga * gb <= 0.0 {
            if ga == 0.0 {
                return Ok(a);
            }
            if gb == 0.0 {
                return Ok(b);
            }
            return refine(&g, a, b, ga, gb, cfg.outer_tol, cfg.max_outer, k).map(|r| r.0);
        }
        step *= 2.0;
    }
    Err(Error::OuterDivergence { k })
}

/// Self-consistent solutions with eigenvalue index `k` (0 = ground state).
pub fn solve_selfconsistent(p: &PotentialParams, k: usize, cfg: &OracleConfig) -> Result<Vec<OracleResult>> {
    if !p.branch().is_hermitian() {
        return Err(Error::WrongBranch { required: "hermitian" });
    }
    cfg.validate(p)?;
    let m = p.m();
    let roots = roots_of_g(p, k, cfg)?;
    roots
        .into_iter()
        .map(|(energy, outer_iters)| {
            let disc = discretize(p, energy, cfg)?;
            let eps = disc.matrix.kth_eigenvalue(k);
            let v = disc.matrix.eigenvector(eps);
            let norm = (v.iter().map(|x| x * x).sum::<f64>() * disc.grid.step).sqrt();
            let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
            let eigenvector = GridFunction::from_real(disc.grid.start, disc.grid.step, &v)?;
            let grid_convergence_est = if cfg.richardson {
                let fine = nearest_root_near(p, k, &cfg.refined(), energy)?;
                let r = 2f64.powi(cfg.fd_order.order());
                Some(r * (fine - energy).abs() / (r - 1.0))
            } else {
                None
            };
            Ok(OracleResult {
                k,
                energy,
                epsilon: energy * energy - m * m,
                eigenvector,
                outer_iters,
                grid_convergence_est,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub analytic: f64,
    pub oracle: Option<f64>,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub grid_convergence_est: Option<f64>,
    pub oracle_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Analytic roots with `Re(mu) <= 0` or complex energy, which have no oracle counterpart.
    pub skipped: usize,
    pub worst_rel_diff: f64,
}

impl ComparisonReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_rel_diff < tol
    }
}

/// Matches every normalizable real analytic level to the nearest oracle root of the same index.
pub fn compare(p: &PotentialParams, levels: &[EnergyLevel], cfg: &OracleConfig) -> Result<ComparisonReport> {
    if !p.branch().is_hermitian() {
        return Err(Error::WrongBranch { required: "hermitian" });
    }
    let usable: Vec<&EnergyLevel> = levels
        .iter()
        .filter(|l| l.is_normalizable() && l.energy.im == 0.0)
        .collect();
    let skipped = levels.len() - usable.len();
    let mut ns: Vec<usize> = usable.iter().map(|l| l.n).collect();
    ns.dedup();
    let solved = par::map(ExecMode::Parallel, &ns, |&n| match solve_selfconsistent(p, n, cfg) {
        Ok(r) => Ok(r),
        Err(Error::NoBoundState { .. }) => Ok(Vec::new()),
        Err(e) => Err(e),
    });
    let solved = solved.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for level in usable {
        let idx = ns.iter().position(|&n| n == level.n).unwrap_or(0);
        let analytic = level.energy.re;
        let best = solved[idx]
            .iter()
            .min_by(|a, b| (a.energy - analytic).abs().total_cmp(&(b.energy - analytic).abs()));
        let row = match best {
            Some(r) => ComparisonRow {
                n: level.n,
                analytic,
                oracle: Some(r.energy),
                abs_diff: (r.energy - analytic).abs(),
                rel_diff: (r.energy - analytic).abs() / r.energy.abs(),
                grid_convergence_est: r.grid_convergence_est,
                oracle_nodes: Some(r.nodes()),
            },
            None => ComparisonRow {
                n: level.n,
                analytic,
                oracle: None,
                abs_diff: f64::INFINITY,
                rel_diff: f64::INFINITY,
                grid_convergence_est: None,
                oracle_nodes: None,
            },
        };
        rows.push(row);
    }
    let worst_rel_diff = rows.iter().map(|r| r.rel_diff).fold(0.0, f64::max);
    Ok(ComparisonReport {
        rows,
        skipped,
        worst_rel_diff,
    })
}

/// Lowest `count` eigenvalues of `-d^2 + W^2 - W'` and `-d^2 + W^2 + W'` on
/// the interior nodes of `grid` (Dirichlet walls one step outside).
pub fn partner_spectra(w: &Superpotential, grid: &UniformGrid, order: FdOrder, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (v1, v2) = crate::hierarchy::partner_potentials(w, grid)?;
    let re = |f: &GridFunction| f.values().iter().map(|v| v.re).collect::<Vec<f64>>();
    let a1 = assemble(&re(&v1), grid.step, order);
    let a2 = assemble(&re(&v2), grid.step, order);
    Ok((a1.lowest(count), a2.lowest(count)))
}
