//! Fixed-point iteration of `u(x) = ⨍_{E_x} u` on a uniform grid.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpp::Payoff;
use crate::ellipsoid::{ball_quadrature, BallRule, CoefficientField, Domain, Integrator};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest grid the solver accepts.
pub const MAX_NODES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    pub eps: f64,
    pub h: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Averaging rule; Monte Carlo is not accepted because the stencil is
    /// built once and reused.
    #[serde(default = "default_rule")]
    pub rule: Integrator,
}

fn default_rule() -> Integrator {
    Integrator::Quadrature { degree: 8 }
}

impl SolveOptions {
    pub fn new(eps: f64, h: f64) -> Self {
        SolveOptions {
            eps,
            h,
            tol: 1e-7,
            max_iters: 100_000,
            rule: default_rule(),
        }
    }
}

/// Uniform tensor grid `origin + h·k`, `0 ≤ kᵢ < shape[i]`, row-major with
/// the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
}

impl Lattice {
    fn covering(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let origin: Vec<f64> = lo.iter().map(|v| v - h).collect();
        let shape: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b - a) / h).ceil() as usize + 3)
            .collect();
        let total = shape.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m));
        match total {
            Some(t) if t <= MAX_NODES => Ok(Lattice { origin, h, shape }),
            _ => Err(Error::param("h", format!("grid would exceed {MAX_NODES} nodes"))),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn index_of(&self, k: &[usize]) -> usize {
        k.iter().zip(&self.shape).fold(0, |acc, (&ki, &m)| acc * m + ki)
    }

    pub fn multi_index(&self, mut g: usize) -> Vec<usize> {
        let mut k = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            k[i] = g % self.shape[i];
            g /= self.shape[i];
        }
        k
    }

    pub fn coords(&self, g: usize) -> Vec<f64> {
        self.multi_index(g)
            .iter()
            .zip(&self.origin)
            .map(|(&k, &o)| o + k as f64 * self.h)
            .collect()
    }

    /// Corner nodes and multilinear weights for `p`; `None` outside the grid.
    pub fn interpolation(&self, p: &[f64]) -> Option<Vec<(usize, f64)>> {
        let n = self.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for i in 0..n {
            let s = (p[i] - self.origin[i]) / self.h;
            if !(s >= 0.0 && s <= (self.shape[i] - 1) as f64) {
                return None;
            }
            let c = (s.floor() as usize).min(self.shape[i] - 2);
            base[i] = c;
            frac[i] = s - c as f64;
        }
        let mut out = Vec::with_capacity(1 << n);
        let mut k = vec![0usize; n];
        for mask in 0..(1usize << n) {
            let mut w = 1.0;
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    k[i] = base[i] + 1;
                    w *= frac[i];
                } else {
                    k[i] = base[i];
                    w *= 1.0 - frac[i];
                }
            }
            if w != 0.0 {
                out.push((self.index_of(&k), w));
            }
        }
        Some(out)
    }
}

/// Discrete DPP solution. Nodes outside `Ω` carry `F` itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GridSolution<T: Real> {
    pub domain: Domain<T>,
    pub lattice: Lattice,
    pub eps: f64,
    pub values: Vec<T>,
    pub inside: Vec<bool>,
    /// `max |u − ⨍_{E_x} u|` over interior nodes after the last sweep.
    pub residual: f64,
    /// Last sup-norm change between sweeps.
    pub last_update: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    #[serde(skip)]
    pub payoff: Option<Payoff<T>>,
}

/// JSON summary written next to the node CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GridSidecar<T: Real> {
    pub domain: Domain<T>,
    pub eps: f64,
    pub h: f64,
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub interior_nodes: usize,
    pub residual: f64,
    pub last_update: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
}

/// Sparse averaging operator on the interior unknowns: `u ↦ Su + b`.
struct Stencil<T> {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    rhs: Vec<T>,
}

impl<T: Real> Stencil<T> {
    fn apply_row(&self, i: usize, u: &[T]) -> T {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let mut s = self.rhs[i];
        for (&c, &v) in self.cols[a..b].iter().zip(&self.vals[a..b]) {
            s += v * u[c as usize];
        }
        s
    }

    fn sweep(&self, u: &[T], out: &mut [T]) -> f64 {
        out.par_iter_mut()
            .enumerate()
            .map(|(i, o)| {
                *o = self.apply_row(i, u);
                (*o - u[i]).abs().as_f64()
            })
            .reduce(|| 0.0, f64::max)
    }
}

fn stencil_rule<T: Real>(n: usize, rule: Integrator) -> Result<BallRule<T>> {
    match rule {
        Integrator::Quadrature { degree } => ball_quadrature(n, degree),
        Integrator::Qmc { points } => Ok(BallRule::shifted_halton(n, points, &mut ChaCha8Rng::seed_from_u64(0))),
        Integrator::MonteCarlo { .. } => Err(Error::param(
            "rule",
            "the grid solver needs a deterministic rule (quadrature or qmc)",
        )),
    }
}

/// Solves the DPP on the nodes of a grid covering `domain`.
///
/// Ball averages use `opts.rule`; off-grid values inside `Ω` come from
/// multilinear interpolation and points outside `Ω` use `F` directly. Jacobi
/// sweeps start from `F` at the nodes and stop once the sup-norm update is
/// at most `tol`. Hitting `max_iters` first returns the partial result with
/// `converged == false`.
pub fn solve_dpp<T: Real>(
    field: &CoefficientField<T>,
    domain: &Domain<T>,
    payoff: &Payoff<T>,
    opts: &SolveOptions,
) -> Result<GridSolution<T>> {
    let n = field.dim();
    if domain.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: domain.dim(),
        });
    }
    payoff.check_dim(n)?;
    if !(opts.h > 0.0) {
        return Err(Error::param("h", "must be positive"));
    }
    if !(opts.eps >= 4.0 * opts.h) {
        return Err(Error::param("eps", "must be at least 4h"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let rule = stencil_rule::<T>(n, opts.rule)?;
    let (lo, hi) = domain.bounds();
    let lo: Vec<f64> = lo.iter().map(|v| v.as_f64()).collect();
    let hi: Vec<f64> = hi.iter().map(|v| v.as_f64()).collect();
    let lattice = Lattice::covering(&lo, &hi, opts.h)?;
    let to_t = |v: &[f64]| -> Vec<T> { v.iter().map(|&c| T::lit(c)).collect() };

    let inside: Vec<bool> = (0..lattice.len())
        .into_par_iter()
        .map(|g| domain.contains(&to_t(&lattice.coords(g))))
        .collect();
    let mut unknown = vec![u32::MAX; lattice.len()];
    let mut nodes = Vec::new();
    for (g, _) in inside.iter().enumerate().filter(|(_, &b)| b) {
        unknown[g] = nodes.len() as u32;
        nodes.push(g);
    }
    let fixed: Vec<T> = (0..lattice.len())
        .into_par_iter()
        .map(|g| if inside[g] { T::zero() } else { payoff.eval(&to_t(&lattice.coords(g))) })
        .collect();

    let eps_t = T::lit(opts.eps);
    let rows: Vec<Result<(Vec<(u32, T)>, T)>> = nodes
        .par_iter()
        .map(|&g| {
            let x = lattice.coords(g);
            let xt = to_t(&x);
            let s = field.sqrt_at(&xt)?;
            let mut entries: Vec<(u32, T)> = Vec::new();
            let mut b = T::zero();
            let mut p = vec![T::zero(); n];
            for (y, &w) in rule.nodes.iter().zip(&rule.weights) {
                s.mul_vec_into(y, &mut p);
                for i in 0..n {
                    p[i] = xt[i] + eps_t * p[i];
                }
                if !domain.contains(&p) {
                    b += w * payoff.eval(&p);
                    continue;
                }
                let pf: Vec<f64> = p.iter().map(|v| v.as_f64()).collect();
                let corners = lattice
                    .interpolation(&pf)
                    .expect("points of the domain lie inside the covering grid");
                for (c, cw) in corners {
                    let cw = w * T::lit(cw);
                    if inside[c] {
                        entries.push((unknown[c], cw));
                    } else {
                        b += cw * fixed[c];
                    }
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(u32, T)> = Vec::with_capacity(entries.len());
            for (c, v) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            Ok((merged, b))
        })
        .collect();

    let mut stencil = Stencil {
        row_ptr: Vec::with_capacity(nodes.len() + 1),
        cols: Vec::new(),
        vals: Vec::new(),
        rhs: Vec::with_capacity(nodes.len()),
    };
    stencil.row_ptr.push(0);
    for row in rows {
        let (entries, b) = row?;
        for (c, v) in entries {
            stencil.cols.push(c);
            stencil.vals.push(v);
        }
        stencil.row_ptr.push(stencil.cols.len());
        stencil.rhs.push(b);
    }

    let mut u: Vec<T> = nodes.iter().map(|&g| payoff.eval(&to_t(&lattice.coords(g)))).collect();
    let mut next = vec![T::zero(); u.len()];
    let mut iterations = 0;
    let mut last_update = f64::INFINITY;
    while iterations < opts.max_iters {
        last_update = stencil.sweep(&u, &mut next);
        std::mem::swap(&mut u, &mut next);
        iterations += 1;
        if last_update <= opts.tol {
            break;
        }
    }
    if nodes.is_empty() {
        last_update = 0.0;
    }
    let residual = stencil.sweep(&u, &mut next);
    let converged = last_update <= opts.tol;

    let mut values = fixed;
    for (i, &g) in nodes.iter().enumerate() {
        values[g] = u[i];
    }
    Ok(GridSolution {
        domain: domain.clone(),
        lattice,
        eps: opts.eps,
        values,
        inside,
        residual,
        last_update,
        iterations,
        converged,
        tol: opts.tol,
        payoff: Some(payoff.clone()),
    })
}

impl<T: Real> GridSolution<T> {
    pub fn h(&self) -> f64 {
        self.lattice.h
    }

    pub fn interior_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Interior nodes as `(coordinates, value)`.
    pub fn interior(&self) -> impl Iterator<Item = (Vec<f64>, T)> + '_ {
        self.inside
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(g, _)| (self.lattice.coords(g), self.values[g]))
    }

    /// `u` at an arbitrary point: `F` outside `Ω`, interpolation inside.
    pub fn value_at(&self, p: &[T]) -> Option<T> {
        if !self.domain.contains(p) {
            return self.payoff.as_ref().map(|f| f.eval(p));
        }
        let pf: Vec<f64> = p.iter().map(|v| v.as_f64()).collect();
        let corners = self.lattice.interpolation(&pf)?;
        Some(corners.iter().map(|&(g, w)| T::lit(w) * self.values[g]).sum())
    }

    pub fn sidecar(&self) -> GridSidecar<T> {
        GridSidecar {
            domain: self.domain.clone(),
            eps: self.eps,
            h: self.lattice.h,
            shape: self.lattice.shape.clone(),
            origin: self.lattice.origin.clone(),
            interior_nodes: self.interior_count(),
            residual: self.residual,
            last_update: self.last_update,
            iterations: self.iterations,
            converged: self.converged,
            tol: self.tol,
        }
    }

    /// Interior nodes as CSV: `x1,…,xn,u`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.lattice.dim();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.push("u".into());
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for (x, v) in self.interior() {
            let mut rec: Vec<String> = x.iter().map(|c| format!("{c:.16e}")).collect();
            rec.push(format!("{:.16e}", v.as_f64()));
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<path>` (CSV) and `<path>.json` (sidecar).
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let json = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(side, json)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{EllipticityClass, SymMatrix};

    #[test]
    fn lattice_round_trip() {
        let l = Lattice::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.25).unwrap();
        assert_eq!(l.shape, vec![11, 11]);
        let g = l.index_of(&[3, 7]);
        assert_eq!(l.multi_index(g), vec![3, 7]);
        let x = l.coords(g);
        assert!((x[0] + 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        let w = l.interpolation(&[0.1, -0.3]).unwrap();
        let s: f64 = w.iter().map(|e| e.1).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_payoff_is_a_fixed_point() {
        let field = CoefficientField::identity(2);
        let dom = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let f = Payoff::Constant { value: 3.0_f64 };
        let sol = solve_dpp(&field, &dom, &f, &SolveOptions::new(0.25, 1.0 / 16.0)).unwrap();
        assert!(sol.converged);
        for (_, v) in sol.interior() {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_payoff_is_reproduced() {
        let cls = EllipticityClass::new(2, 1.0, 2.0).unwrap();
        let field = CoefficientField::constant(cls, SymMatrix::diag(&[1.0, 2.0])).unwrap();
        let dom = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let f = Payoff::Affine {
            gradient: vec![1.0, -0.5],
            offset: 0.25,
        };
        let mut opts = SolveOptions::new(0.25, 1.0 / 16.0);
        opts.tol = 1e-10;
        let sol = solve_dpp(&field, &dom, &f, &opts).unwrap();
        for (x, v) in sol.interior() {
            assert!((v - f.eval(&x)).abs() < 1e-8);
        }
        assert!(sol.residual <= 2.0 * opts.tol);
    }

    #[test]
    fn iteration_cap_flags_partial_result() {
        let field = CoefficientField::identity(2);
        let dom = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let f = Payoff::custom(|x: &[f64]| x[0].abs());
        let mut opts = SolveOptions::new(0.25, 1.0 / 16.0);
        opts.max_iters = 2;
        let sol = solve_dpp(&field, &dom, &f, &opts).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let field = CoefficientField::identity(2);
        let dom = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let f = Payoff::Constant { value: 0.0 };
        assert!(solve_dpp(&field, &dom, &f, &SolveOptions::new(0.1, 0.05)).is_err());
    }
}
