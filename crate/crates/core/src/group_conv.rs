//! Interpolating group laws on R^{2n+1} and their convolutions.
//!
//! The law is `u o_theta v = (u1 + v1, u2 + v2, u3 + v3 + theta u1.v2)`, and
//! `f *_theta g (u) = int f(u o_theta v^{-1}) g(v) dv`. Writing `w = u - v` in the first
//! 2n coordinates this is `f(w1, w2, u3 - v3 - theta w1.v2)`.
//!
//! The spectral path transforms along `x3`, after which each `lambda` fiber is a
//! twisted 2n-dimensional convolution with phase `exp(-i lambda theta w1.v2)`.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, SampledField, Space};
use crate::specfun::gauss_legendre_on;

/// Default number of Gauss–Legendre nodes for the Taylor remainder.
pub const TAYLOR_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaLaw {
    pub theta: f64,
}

impl ThetaLaw {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!("theta = {theta} outside [0, 1]")));
        }
        Ok(ThetaLaw { theta })
    }

    pub fn abelian() -> Self {
        ThetaLaw { theta: 0.0 }
    }

    pub fn heisenberg() -> Self {
        ThetaLaw { theta: 1.0 }
    }
}

fn heis_index(len: usize) -> Result<usize> {
    if len < 3 || len % 2 == 0 {
        return Err(Error::InvalidDimension(format!("points need odd length >= 3, got {len}")));
    }
    Ok((len - 1) / 2)
}

fn dot_block(u: &[f64], v: &[f64], n: usize) -> f64 {
    (0..n).map(|j| u[j] * v[n + j]).sum()
}

pub fn group_mul(law: ThetaLaw, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::InvalidDimension(format!("{} vs {} components", u.len(), v.len())));
    }
    let n = heis_index(u.len())?;
    let mut out: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
    out[2 * n] += law.theta * dot_block(u, v, n);
    Ok(out)
}

pub fn group_inv(law: ThetaLaw, u: &[f64]) -> Result<Vec<f64>> {
    let n = heis_index(u.len())?;
    let mut out: Vec<f64> = u.iter().map(|a| -a).collect();
    out[2 * n] += law.theta * dot_block(u, u, n);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvMethod {
    Direct,
    Spectral,
}

/// Index bookkeeping for the `(x1, x2)` plane of a Heisenberg grid.
#[derive(Clone, Debug)]
pub(crate) struct Plane {
    pub n: usize,
    pub len: usize,
    pub fibers: usize,
    pub cell: f64,
    dims: Vec<usize>,
    strides: Vec<usize>,
    coords: Vec<Vec<f64>>,
    lambdas: Vec<f64>,
    idx: Vec<Vec<usize>>,
}

impl Plane {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        let n = grid.heisenberg_n()?;
        let dims: Vec<usize> = grid.points[..2 * n].to_vec();
        let len: usize = dims.iter().product();
        let mut strides = vec![1; 2 * n];
        for k in (0..2 * n - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let coords = (0..2 * n).map(|k| grid.axis_values(k, Space::Position)).collect();
        let idx = (0..len)
            .map(|p| (0..2 * n).map(|k| (p / strides[k]) % dims[k]).collect())
            .collect();
        let x3 = 2 * n;
        Ok(Plane {
            n,
            len,
            fibers: grid.points[x3],
            cell: (0..2 * n).map(|k| grid.spacing(k)).product(),
            dims,
            strides,
            coords,
            lambdas: grid.axis_values(x3, Space::Frequency),
            idx,
        })
    }

    pub fn lambda(&self, m: usize) -> f64 {
        self.lambdas[m]
    }

    /// Flat plane index of the wrapped difference `u - v`.
    #[inline]
    pub fn diff(&self, u: usize, v: usize) -> usize {
        let (iu, iv) = (&self.idx[u], &self.idx[v]);
        let mut w = 0;
        for k in 0..2 * self.n {
            let nk = self.dims[k];
            w += self.strides[k] * ((iu[k] + nk + nk / 2 - iv[k]) % nk);
        }
        w
    }

    /// Flat plane index of `-u` on the centered grid.
    pub fn neg(&self, u: usize) -> usize {
        let iu = &self.idx[u];
        (0..2 * self.n).map(|k| self.strides[k] * ((self.dims[k] - iu[k]) % self.dims[k])).sum()
    }

    /// `w1 . v2` from plane indices.
    #[inline]
    pub fn shear(&self, w: usize, v: usize) -> f64 {
        let (iw, iv) = (&self.idx[w], &self.idx[v]);
        (0..self.n).map(|j| self.coords[j][iw[j]] * self.coords[self.n + j][iv[self.n + j]]).sum()
    }

    /// `exp(-i c w1.v2)` tables, one per `j`, indexed `[a * N_{2j} + b]`.
    fn phase_tables(&self, c: f64) -> Vec<Vec<C64>> {
        (0..self.n)
            .map(|j| {
                let (xa, xb) = (&self.coords[j], &self.coords[self.n + j]);
                let mut t = Vec::with_capacity(xa.len() * xb.len());
                for a in xa {
                    for b in xb {
                        t.push(C64::from_polar(1.0, -c * a * b));
                    }
                }
                t
            })
            .collect()
    }

    #[inline]
    fn phase(&self, tabs: &[Vec<C64>], w: usize, v: usize) -> C64 {
        let (iw, iv) = (&self.idx[w], &self.idx[v]);
        let mut p = C64::new(1.0, 0.0);
        for (j, t) in tabs.iter().enumerate() {
            p *= t[iw[j] * self.dims[self.n + j] + iv[self.n + j]];
        }
        p
    }

    /// Twisted plane convolution `cell * sum_v f(u - v) exp(-i c w1.v2) g(v)`.
    pub fn twisted(&self, f: &[C64], g: &[C64], c: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len];
        let tabs = self.phase_tables(c);
        for (v, &gv) in g.iter().enumerate() {
            if gv == C64::new(0.0, 0.0) {
                continue;
            }
            for (u, o) in out.iter_mut().enumerate() {
                let w = self.diff(u, v);
                *o += f[w] * self.phase(&tabs, w, v) * gv;
            }
        }
        for o in out.iter_mut() {
            *o *= self.cell;
        }
        out
    }

    /// Dense fiber operator `g -> twisted(f, g, c)` as a row-major `len x len` matrix.
    pub fn twisted_matrix(&self, f: &[C64], c: f64) -> Vec<C64> {
        let tabs = self.phase_tables(c);
        let mut m = vec![C64::new(0.0, 0.0); self.len * self.len];
        m.par_chunks_mut(self.len).enumerate().for_each(|(u, row)| {
            for (v, r) in row.iter_mut().enumerate() {
                let w = self.diff(u, v);
                *r = f[w] * self.phase(&tabs, w, v) * self.cell;
            }
        });
        m
    }
}

/// Field values transformed along `x3`, grouped by fiber: `out[m][p]`.
pub(crate) fn to_fibers(field: &SampledField) -> Result<Vec<Vec<C64>>> {
    field.expect_space(Space::Position)?;
    let grid = field.grid();
    let x3 = grid.heisenberg_n()? * 2;
    let mut vals = field.values().to_vec();
    grid::forward_axes(&mut vals, grid, &[x3]);
    let nf = grid.points[x3];
    let plane = grid.len() / nf;
    Ok((0..nf).map(|m| (0..plane).map(|p| vals[p * nf + m]).collect()).collect())
}

pub(crate) fn from_fibers(grid: &GridSpec, fibers: &[Vec<C64>]) -> SampledField {
    let x3 = grid.x3_axis();
    let nf = grid.points[x3];
    let plane = grid.len() / nf;
    let mut vals = vec![C64::new(0.0, 0.0); grid.len()];
    for (m, fib) in fibers.iter().enumerate() {
        for p in 0..plane {
            vals[p * nf + m] = fib[p];
        }
    }
    grid::inverse_axes(&mut vals, grid, &[x3]);
    SampledField::new(grid.clone(), vals, Space::Position).expect("sizes match")
}

pub(crate) fn convolve_fibers(
    plane: &Plane,
    theta: f64,
    f: &[Vec<C64>],
    g: &[Vec<C64>],
) -> Vec<Vec<C64>> {
    (0..plane.fibers)
        .into_par_iter()
        .map(|m| plane.twisted(&f[m], &g[m], plane.lambda(m) * theta))
        .collect()
}

fn check_pair(f: &SampledField, g: &SampledField) -> Result<()> {
    f.same_grid(g)?;
    f.expect_space(Space::Position)?;
    g.expect_space(Space::Position)?;
    f.grid().heisenberg_n()?;
    Ok(())
}

pub fn convolve(
    law: ThetaLaw,
    f: &SampledField,
    g: &SampledField,
    method: ConvMethod,
) -> Result<SampledField> {
    check_pair(f, g)?;
    match method {
        ConvMethod::Spectral if law.theta == 0.0 => convolve_abelian(f, g),
        ConvMethod::Spectral => {
            let plane = Plane::new(f.grid())?;
            let out = convolve_fibers(&plane, law.theta, &to_fibers(f)?, &to_fibers(g)?);
            Ok(from_fibers(f.grid(), &out))
        }
        ConvMethod::Direct => convolve_direct(law, f, g),
    }
}

/// Euclidean convolution through the full transform.
pub fn convolve_abelian(f: &SampledField, g: &SampledField) -> Result<SampledField> {
    f.same_grid(g)?;
    let fh = grid::fourier_forward(f)?;
    let gh = grid::fourier_forward(g)?;
    grid::fourier_inverse(&fh.zip_with(&gh, |a, b| a * b)?)
}

/// Integer shear step `theta h1j h2j / h3` for every `j`, or an error.
fn shear_steps(law: ThetaLaw, grid: &GridSpec) -> Result<Vec<i64>> {
    let n = grid.heisenberg_n()?;
    let h3 = grid.spacing(2 * n);
    (0..n)
        .map(|j| {
            let r = law.theta * grid.spacing(j) * grid.spacing(n + j) / h3;
            if (r - r.round()).abs() > 1e-9 {
                Err(Error::ShearMisaligned(format!(
                    "theta h1 h2 / h3 = {r} on block {j} is not an integer"
                )))
            } else {
                Ok(r.round() as i64)
            }
        })
        .collect()
}

fn convolve_direct(law: ThetaLaw, f: &SampledField, g: &SampledField) -> Result<SampledField> {
    let grid = f.grid();
    let steps = shear_steps(law, grid)?;
    let n = grid.n;
    let plane = Plane::new(grid)?;
    let n3 = grid.points[2 * n] as i64;
    let half = |k: usize| (grid.points[k] / 2) as i64;
    let (fv, gv) = (f.values(), g.values());
    let cell = grid.cell_volume();
    let out: Vec<C64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (u, u3) = (i / n3 as usize, (i % n3 as usize) as i64);
            let mut acc = C64::new(0.0, 0.0);
            for v in 0..plane.len {
                let w = plane.diff(u, v);
                let mut s = 0i64;
                for (j, &st) in steps.iter().enumerate() {
                    let a = plane.idx[w][j] as i64 - half(j);
                    let b = plane.idx[v][n + j] as i64 - half(n + j);
                    s += st * a * b;
                }
                for v3 in 0..n3 {
                    let gval = gv[v * n3 as usize + v3 as usize];
                    if gval == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let w3 = (u3 - v3 + n3 / 2 - s).rem_euclid(n3);
                    acc += fv[w * n3 as usize + w3 as usize] * gval;
                }
            }
            acc * cell
        })
        .collect();
    SampledField::new(grid.clone(), out, Space::Position)
}

/// Spectral `d3^k`, multiplier `(i lambda)^k` on every fiber.
pub fn d3(field: &SampledField, k: u32) -> Result<SampledField> {
    let grid = field.grid();
    let plane = Plane::new(grid)?;
    let mut fib = to_fibers(field)?;
    apply_d3_fibers(&plane, &mut fib, k);
    Ok(from_fibers(grid, &fib))
}

fn apply_d3_fibers(plane: &Plane, fib: &mut [Vec<C64>], k: u32) {
    for (m, f) in fib.iter_mut().enumerate() {
        let c = C64::new(0.0, plane.lambda(m)).powu(k);
        for v in f.iter_mut() {
            *v *= c;
        }
    }
}

/// All multiindices in N^n of total order `k`.
pub fn multiindices(n: usize, k: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return if k == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=k).rev() {
        for mut rest in multiindices(n - 1, k - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `T1^alpha` (left block) or `T2^alpha` (right block) on a Heisenberg field.
fn block_t(field: &SampledField, alpha: &[u32], block: usize) -> Result<SampledField> {
    let n = field.grid().heisenberg_n()?;
    let mut full = vec![0u32; 2 * n + 1];
    full[block * n..block * n + n].copy_from_slice(alpha);
    grid::apply_t(field, &full)
}

/// `sum_{|alpha|=k} w(alpha) * (T1^alpha f *_theta T2^alpha g)` in fiber form.
fn order_k_fibers(
    plane: &Plane,
    theta: f64,
    f: &SampledField,
    g: &SampledField,
    k: u32,
    weight: impl Fn(&[u32]) -> f64,
) -> Result<Vec<Vec<C64>>> {
    let mut acc = vec![vec![C64::new(0.0, 0.0); plane.len]; plane.fibers];
    for alpha in multiindices(plane.n, k) {
        let fa = to_fibers(&block_t(f, &alpha, 0)?)?;
        let ga = to_fibers(&block_t(g, &alpha, 1)?)?;
        let c = weight(&alpha);
        for (a, t) in acc.iter_mut().zip(convolve_fibers(plane, theta, &fa, &ga)) {
            for (x, y) in a.iter_mut().zip(t) {
                *x += y * c;
            }
        }
    }
    Ok(acc)
}

fn check_order(order: u32) -> Result<()> {
    if order < 1 {
        return Err(Error::InvalidArgument("Taylor order must be >= 1".into()));
    }
    Ok(())
}

/// `sum_{k<N} (-1)^k sum_{|alpha|=k} (1/alpha!) d3^k (T1^alpha f *_0 T2^alpha g)`.
pub fn taylor_expansion(f: &SampledField, g: &SampledField, order: u32) -> Result<SampledField> {
    check_pair(f, g)?;
    check_order(order)?;
    let plane = Plane::new(f.grid())?;
    let mut total = vec![vec![C64::new(0.0, 0.0); plane.len]; plane.fibers];
    for k in 0..order {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut term = order_k_fibers(&plane, 0.0, f, g, k, |a| {
            sign / a.iter().map(|&x| factorial(x)).product::<f64>()
        })?;
        apply_d3_fibers(&plane, &mut term, k);
        for (a, t) in total.iter_mut().zip(term) {
            for (x, y) in a.iter_mut().zip(t) {
                *x += y;
            }
        }
    }
    Ok(from_fibers(f.grid(), &total))
}

/// Integral remainder of the Taylor expansion in `theta`.
///
/// Gauss–Legendre panels of [`TAYLOR_NODES`] nodes each; the panel count doubles
/// until two successive estimates agree to `1e-10` relative sup-norm.
pub fn taylor_remainder(f: &SampledField, g: &SampledField, order: u32) -> Result<SampledField> {
    let mut prev = taylor_remainder_panels(f, g, order, TAYLOR_NODES, 1)?;
    let mut panels = 1;
    while panels < 128 {
        panels *= 2;
        let next = taylor_remainder_panels(f, g, order, TAYLOR_NODES, panels)?;
        let scale = next.sup_norm().max(f64::MIN_POSITIVE);
        if next.sub(&prev)?.sup_norm() <= 1e-10 * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NotConverged(format!("Taylor remainder after {panels} panels")))
}

/// Remainder on a fixed rule of `panels` Gauss–Legendre panels with `nodes` nodes each.
pub fn taylor_remainder_panels(
    f: &SampledField,
    g: &SampledField,
    order: u32,
    nodes: usize,
    panels: usize,
) -> Result<SampledField> {
    check_pair(f, g)?;
    check_order(order)?;
    let plane = Plane::new(f.grid())?;
    let nf = factorial(order);
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    let mut total = vec![vec![C64::new(0.0, 0.0); plane.len]; plane.fibers];
    let fs: Vec<(Vec<Vec<C64>>, Vec<Vec<C64>>, f64)> = multiindices(plane.n, order)
        .into_iter()
        .map(|alpha| {
            let c = nf / alpha.iter().map(|&x| factorial(x)).product::<f64>();
            Ok((to_fibers(&block_t(f, &alpha, 0)?)?, to_fibers(&block_t(g, &alpha, 1)?)?, c))
        })
        .collect::<Result<_>>()?;
    for p in 0..panels {
        let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        let (ts, ws) = gauss_legendre_on(nodes, a, b);
        for (&theta, &w) in ts.iter().zip(&ws) {
            let kernel = sign * w * (1.0 - theta).powi(order as i32 - 1) / factorial(order - 1);
            for (fa, ga, c) in &fs {
                let conv = convolve_fibers(&plane, theta, fa, ga);
                for (acc, t) in total.iter_mut().zip(conv) {
                    for (x, y) in acc.iter_mut().zip(t) {
                        *x += y * (kernel * c);
                    }
                }
            }
        }
    }
    apply_d3_fibers(&plane, &mut total, order);
    Ok(from_fibers(f.grid(), &total))
}

#[derive(Clone, Debug, Serialize)]
pub struct LeibnizTerm {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeibnizReport {
    pub gamma: Vec<u32>,
    pub terms: Vec<LeibnizTerm>,
    pub lhs_sup: f64,
    pub residual: f64,
}

impl LeibnizReport {
    pub fn relative_residual(&self) -> f64 {
        if self.lhs_sup == 0.0 {
            self.residual
        } else {
            self.residual / self.lhs_sup
        }
    }
}

type Poly = BTreeMap<Vec<u32>, f64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *out.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

/// Expansion of `u^gamma` for `u = w o_theta v` as a polynomial in `(w, v)`;
/// exponent vectors list the `w` powers first, then the `v` powers.
pub fn leibniz_terms(law: ThetaLaw, n: usize, gamma: &[u32]) -> Vec<LeibnizTerm> {
    let d = 2 * n + 1;
    let unit = |k: usize| {
        let mut e = vec![0u32; 2 * d];
        e[k] = 1;
        e
    };
    let mut poly = Poly::from([(vec![0u32; 2 * d], 1.0)]);
    for (k, &gk) in gamma.iter().enumerate() {
        let mut comp = Poly::from([(unit(k), 1.0), (unit(d + k), 1.0)]);
        if k == 2 * n && law.theta != 0.0 {
            for j in 0..n {
                let mut e = vec![0u32; 2 * d];
                e[j] = 1;
                e[d + n + j] = 1;
                comp.insert(e, law.theta);
            }
        }
        for _ in 0..gk {
            poly = poly_mul(&poly, &comp);
        }
    }
    poly.into_iter()
        .map(|(e, c)| LeibnizTerm { alpha: e[..d].to_vec(), beta: e[d..].to_vec(), coeff: c })
        .collect()
}

/// Compares `T^gamma (f *_theta g)` with its expansion `sum c T^alpha f *_theta T^beta g`.
pub fn leibniz_check(
    law: ThetaLaw,
    f: &SampledField,
    g: &SampledField,
    gamma: &[u32],
) -> Result<LeibnizReport> {
    check_pair(f, g)?;
    let n = f.grid().n;
    if gamma.len() != 2 * n + 1 {
        return Err(Error::MultiindexLength { expected: 2 * n + 1, found: gamma.len() });
    }
    if gamma.iter().sum::<u32>() > 2 {
        return Err(Error::UnsupportedMultiindex(format!(
            "{gamma:?}: only |gamma| <= 2 has explicit coefficients"
        )));
    }
    let lhs = grid::apply_t(&convolve(law, f, g, ConvMethod::Spectral)?, gamma)?;
    let terms = leibniz_terms(law, n, gamma);
    let mut rhs = SampledField::zeros(f.grid(), Space::Position);
    for t in &terms {
        let c = convolve(law, &grid::apply_t(f, &t.alpha)?, &grid::apply_t(g, &t.beta)?, ConvMethod::Spectral)?;
        rhs = rhs.zip_with(&c, |a, b| a + b * t.coeff)?;
    }
    let residual = lhs.sub(&rhs)?.sup_norm();
    Ok(LeibnizReport { gamma: gamma.to_vec(), terms, lhs_sup: lhs.sup_norm(), residual })
}
