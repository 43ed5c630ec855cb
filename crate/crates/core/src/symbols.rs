//! Phase-space symbols, Kohn–Nirenberg quantization and the Schrödinger representations.
//!
//! Position grids here are Euclidean grids on `X = R^k`. A sampled symbol lives on the induced
//! phase-space grid `{(x_j, xi_m)}` with `xi_m` the frequency grid of the same position grid.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{forward_axes, inverse_axes, GridSpec, SampledField, Space};
use crate::group_conv::{convolve, multiindices, ConvMethod, ThetaLaw};
use crate::linalg::{self, CMat};
use crate::weights::{box_sample, check_tempered, rho, WeightReport};
use crate::C64;

pub const DEFAULT_MATRIX_CAP: usize = 4096;
const FD_STEP: f64 = 1e-4;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PhaseFn = Arc<dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync>;

#[derive(Clone)]
pub struct WeightFunctionSpec {
    pub g: ScalarFn,
    pub c: f64,
    pub m: f64,
}

impl WeightFunctionSpec {
    pub fn new(g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, c: f64, m: f64) -> Result<Self> {
        check_constants(c, m)?;
        Ok(WeightFunctionSpec { g: Arc::new(g), c, m })
    }

    /// `rho(x) = (1 + |x|^2)^{1/2}` with the given constants.
    pub fn rho(c: f64, m: f64) -> Result<Self> {
        Self::new(rho, c, m)
    }
}

#[derive(Clone)]
pub struct WeightSpec {
    pub m: ScalarFn,
    pub g: WeightFunctionSpec,
    pub c: f64,
    pub big_m: f64,
}

impl WeightSpec {
    pub fn new(
        m: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: WeightFunctionSpec,
        c: f64,
        big_m: f64,
    ) -> Result<Self> {
        check_constants(c, big_m)?;
        Ok(WeightSpec { m: Arc::new(m), g, c, big_m })
    }
}

fn check_constants(c: f64, m: f64) -> Result<()> {
    if !(c >= 0.0 && m >= 0.0 && c.is_finite() && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("constants must be finite and >= 0, got C = {c}, M = {m}")));
    }
    Ok(())
}

/// Self-temperance of `g` and the uncertainty principle `g >= 1` on all ordered sample pairs.
pub fn check_weight_function(spec: &WeightFunctionSpec, points: &[Vec<f64>]) -> Result<WeightReport> {
    check_tempered(&*spec.g, &*spec.g, points, spec.c, spec.m, true)
}

/// Temperance of `m` relative to `g`.
pub fn check_weight(spec: &WeightSpec, points: &[Vec<f64>]) -> Result<WeightReport> {
    check_tempered(&*spec.m, &*spec.g.g, points, spec.c, spec.big_m, false)
}

/// `d^alpha a (x)` by nested central differences with step `scale * 1e-4 * (1 + |x_k|)`.
pub fn fd_derivative(a: &dyn Fn(&[f64]) -> C64, x: &[f64], alpha: &[u32], scale: f64) -> C64 {
    let Some(k) = alpha.iter().position(|&v| v > 0) else {
        return a(x);
    };
    let mut lower = alpha.to_vec();
    lower[k] -= 1;
    let h = scale * FD_STEP * (1.0 + x[k].abs());
    let mut p = x.to_vec();
    p[k] = x[k] + h;
    let up = fd_derivative(a, &p, &lower, scale);
    p[k] = x[k] - h;
    let down = fd_derivative(a, &p, &lower, scale);
    (up - down) / (2.0 * h)
}

/// Sample estimate of `sup |d^alpha a| m^{-1} g^{|alpha|}` over `|alpha| = order`.
///
/// Only the sample points are visited, so the value is a lower bound of the true seminorm.
pub fn seminorm(
    a: &dyn Fn(&[f64]) -> C64,
    m: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    order: u32,
    points: &[Vec<f64>],
    step_scale: f64,
) -> Result<f64> {
    let Some(first) = points.first() else {
        return Err(Error::InvalidArgument("no sample points".into()));
    };
    let alphas = multiindices(first.len(), order);
    let mut sup = 0.0f64;
    for p in points {
        let w = g(p).powi(order as i32) / m(p);
        for alpha in &alphas {
            let d = fd_derivative(a, p, alpha, step_scale);
            let v = d.norm() * w;
            if !v.is_finite() {
                return Err(Error::NonFinite { coordinate: p.clone() });
            }
            sup = sup.max(v);
        }
    }
    Ok(sup)
}

#[derive(Clone, Debug, Serialize)]
pub struct RichardsonCheck {
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
}

/// Seminorm at the default step and at half the step.
pub fn seminorm_richardson(
    a: &dyn Fn(&[f64]) -> C64,
    m: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    order: u32,
    points: &[Vec<f64>],
) -> Result<RichardsonCheck> {
    let coarse = seminorm(a, m, g, order, points, 1.0)?;
    let fine = seminorm(a, m, g, order, points, 0.5)?;
    let relative_change = if fine == 0.0 { (coarse - fine).abs() } else { (coarse - fine).abs() / fine };
    Ok(RichardsonCheck { coarse, fine, relative_change })
}

#[derive(Clone, Debug, Serialize)]
pub struct SeminormGrowth {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Values keep increasing and at least double across the boxes.
    pub unbounded: bool,
}

/// Seminorm over the boxes `[-r, r]^dim` for increasing `r`.
pub fn seminorm_growth(
    a: &dyn Fn(&[f64]) -> C64,
    m: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    order: u32,
    dim: usize,
    radii: &[f64],
    per_axis: usize,
) -> Result<SeminormGrowth> {
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("need at least two increasing radii".into()));
    }
    let values = radii
        .iter()
        .map(|&r| seminorm(a, m, g, order, &box_sample(dim, r, per_axis), 1.0))
        .collect::<Result<Vec<_>>>()?;
    let increasing = values.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    let unbounded = increasing && values[values.len() - 1] >= 2.0 * values[0];
    Ok(SeminormGrowth { radii: radii.to_vec(), values, unbounded })
}

/// A closed-form symbol on `X + X*` with an optional weight pair `(m, g)` on phase space.
#[derive(Clone)]
pub struct ClosedSymbol {
    pub dim: usize,
    pub a: PhaseFn,
    pub weights: Option<(ScalarFn, ScalarFn)>,
}

impl ClosedSymbol {
    pub fn new(dim: usize, a: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static) -> Self {
        ClosedSymbol { dim, a: Arc::new(a), weights: None }
    }

    pub fn with_weights(
        mut self,
        m: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.weights = Some((Arc::new(m), Arc::new(g)));
        self
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> C64 {
        (self.a)(x, xi)
    }

    /// The symbol as a function of the stacked point `(x, xi)`.
    pub fn stacked(&self) -> impl Fn(&[f64]) -> C64 + '_ {
        move |p: &[f64]| (self.a)(&p[..self.dim], &p[self.dim..])
    }

    /// Seminorms of orders `0..=n_max` on the sample; requires the weight pair.
    pub fn seminorms(&self, n_max: u32, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let Some((m, g)) = &self.weights else {
            return Err(Error::InvalidArgument("symbol carries no weight pair".into()));
        };
        let f = self.stacked();
        (0..=n_max).map(|k| seminorm(&f, &**m, &**g, k, points, 1.0)).collect()
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<PhaseSpaceSymbol> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!("symbol dimension {} on a {}-d grid", self.dim, grid.dim())));
        }
        PhaseSpaceSymbol::sample(grid, |x, xi| (self.a)(x, xi))
    }
}

/// Symbol values on the phase-space grid of a position grid, `values[j * N + m] = a(x_j, xi_m)`.
#[derive(Clone, Debug)]
pub struct PhaseSpaceSymbol {
    grid: GridSpec,
    values: Vec<C64>,
}

impl PhaseSpaceSymbol {
    pub fn new(grid: GridSpec, values: Vec<C64>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * n {
            return Err(Error::GridMismatch(format!("{} values for {n} x {n} phase-space points", values.len())));
        }
        Ok(PhaseSpaceSymbol { grid, values })
    }

    pub fn sample(grid: &GridSpec, a: impl Fn(&[f64], &[f64]) -> C64 + Sync) -> Result<Self> {
        let n = grid.len();
        let xs: Vec<Vec<f64>> = (0..n).map(|j| grid.point(j, Space::Position)).collect();
        let xis: Vec<Vec<f64>> = (0..n).map(|m| grid.point(m, Space::Frequency)).collect();
        let values: Vec<C64> = (0..n * n).into_par_iter().map(|i| a(&xs[i / n], &xis[i % n])).collect();
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            let mut coordinate = xs[i / n].clone();
            coordinate.extend(&xis[i % n]);
            return Err(Error::NonFinite { coordinate });
        }
        Ok(PhaseSpaceSymbol { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn at(&self, j: usize, m: usize) -> C64 {
        self.values[j * self.grid.len() + m]
    }

    pub fn sub(&self, other: &PhaseSpaceSymbol) -> Result<PhaseSpaceSymbol> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("symbols live on different phase-space grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(PhaseSpaceSymbol { grid: self.grid.clone(), values })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Sup over phase-space points whose coordinates all satisfy `|x_k| <= rx` and `|xi_k| <= rxi`.
    pub fn sup_norm_within(&self, rx: f64, rxi: f64) -> f64 {
        let n = self.grid.len();
        let inside = |p: Vec<f64>, r: f64| p.iter().all(|v| v.abs() <= r);
        let xin: Vec<bool> = (0..n).map(|j| inside(self.grid.point(j, Space::Position), rx)).collect();
        let xiin: Vec<bool> = (0..n).map(|m| inside(self.grid.point(m, Space::Frequency), rxi)).collect();
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| xin[i / n] && xiin[i % n])
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Field-style JSON with the position grid as the phase-space header.
    pub fn to_json_value(&self) -> serde_json::Value {
        let header = SampledField::zeros(&self.grid, Space::Position).to_json_value()["grid"].clone();
        serde_json::json!({
            "phase_space": header,
            "values": self.values.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
        })
    }
}

fn check_cap(grid: &GridSpec, cap: usize) -> Result<usize> {
    if grid.is_heisenberg() {
        return Err(Error::InvalidDimension("position grids for quantization are Euclidean".into()));
    }
    let n = grid.len();
    if n > cap {
        return Err(Error::CapExceeded { dim: n, cap });
    }
    Ok(n)
}

fn all_axes(grid: &GridSpec) -> Vec<usize> {
    (0..grid.dim()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Kohn–Nirenberg matrix `A[j, k] = N^{-1} sum_m exp(i (x_j - x_k) . xi_m) a(x_j, xi_m)`.
pub fn quantize(symbol: &PhaseSpaceSymbol, cap: usize) -> Result<CMat> {
    let grid = &symbol.grid;
    let n = check_cap(grid, cap)?;
    let axes = all_axes(grid);
    let scale = grid.half_extent.iter().map(|l| 2.0 * l).product::<f64>() / n as f64;
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let x = grid.point(j, Space::Position);
            // sum_m b_m e^{-i x_k xi_m} = conj((2L)^d * inverse(conj b))_k
            let mut row: Vec<C64> = (0..n)
                .map(|m| {
                    let xi = grid.point(m, Space::Frequency);
                    (C64::from_polar(1.0, dot(&x, &xi)) * symbol.values[j * n + m]).conj()
                })
                .collect();
            inverse_axes(&mut row, grid, &axes);
            row.iter_mut().for_each(|v| *v = v.conj() * scale);
            row
        })
        .collect();
    Ok(CMat::from_fn(n, n, |j, k| rows[j][k]))
}

/// Samples `a` on the phase-space grid of `grid` and quantizes it.
pub fn kn_quantize(a: impl Fn(&[f64], &[f64]) -> C64 + Sync, grid: &GridSpec, cap: usize) -> Result<CMat> {
    check_cap(grid, cap)?;
    quantize(&PhaseSpaceSymbol::sample(grid, a)?, cap)
}

/// Inverse of [`quantize`]: `a(x_j, xi_m) = exp(-i x_j . xi_m) sum_k A[j, k] exp(i x_k . xi_m)`.
pub fn symbol_of(matrix: &CMat, grid: &GridSpec) -> Result<PhaseSpaceSymbol> {
    let n = check_cap(grid, usize::MAX)?;
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::GridMismatch(format!("{}x{} matrix on a grid of {n} points", matrix.nrows(), matrix.ncols())));
    }
    let axes = all_axes(grid);
    let cell = grid.cell_volume();
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let x = grid.point(j, Space::Position);
            // sum_k c_k e^{i x_k xi_m} = conj(forward(conj c))_m / h^d
            let mut row: Vec<C64> = (0..n).map(|k| matrix[(j, k)].conj()).collect();
            forward_axes(&mut row, grid, &axes);
            row.iter()
                .enumerate()
                .map(|(m, v)| {
                    let xi = grid.point(m, Space::Frequency);
                    v.conj() / cell * C64::from_polar(1.0, -dot(&x, &xi))
                })
                .collect()
        })
        .collect();
    PhaseSpaceSymbol::new(grid.clone(), rows.concat())
}

/// Symbol of `Op(a) Op(b)` by matrix product and symbol recovery.
pub fn sharp_compose(a: &PhaseSpaceSymbol, b: &PhaseSpaceSymbol, cap: usize) -> Result<PhaseSpaceSymbol> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("composition needs a common phase-space grid".into()));
    }
    let prod = quantize(a, cap)? * quantize(b, cap)?;
    symbol_of(&prod, &a.grid)
}

fn factorial(alpha: &[u32]) -> f64 {
    alpha.iter().flat_map(|&k| 1..=k).map(|i| i as f64).product()
}

/// `sum_{|alpha| < terms} i^{-|alpha|} / alpha! d_xi^alpha a d_x^alpha b` on the phase-space grid.
pub fn sharp_expansion(a: &ClosedSymbol, b: &ClosedSymbol, terms: u32, grid: &GridSpec) -> Result<PhaseSpaceSymbol> {
    let k = grid.dim();
    if a.dim != k || b.dim != k {
        return Err(Error::GridMismatch("symbol dimensions differ from the grid".into()));
    }
    let mut coeffs = Vec::new();
    for order in 0..terms {
        for alpha in multiindices(k, order) {
            let c = C64::new(0.0, -1.0).powu(order) / factorial(&alpha);
            let mut da = vec![0u32; 2 * k];
            da[k..].copy_from_slice(&alpha);
            let mut db = vec![0u32; 2 * k];
            db[..k].copy_from_slice(&alpha);
            coeffs.push((c, da, db));
        }
    }
    let fa = a.stacked();
    let fb = b.stacked();
    let n = grid.len();
    let xs: Vec<Vec<f64>> = (0..n).map(|j| grid.point(j, Space::Position)).collect();
    let xis: Vec<Vec<f64>> = (0..n).map(|m| grid.point(m, Space::Frequency)).collect();
    let values: Vec<C64> = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let mut p = xs[i / n].clone();
            p.extend(&xis[i % n]);
            coeffs
                .iter()
                .map(|(c, da, db)| c * fd_derivative(&fa, &p, da, 1.0) * fd_derivative(&fb, &p, db, 1.0))
                .sum()
        })
        .collect();
    PhaseSpaceSymbol::new(grid.clone(), values)
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderReport {
    pub terms: u32,
    pub sup: f64,
    /// `sup |R| / (m m' g^{-2N})` when both symbols carry weights.
    pub weighted_sup: Option<f64>,
}

/// Size of `a # b - sharp_expansion(a, b, terms)` on the grid.
pub fn composition_remainder(
    a: &ClosedSymbol,
    b: &ClosedSymbol,
    terms: u32,
    grid: &GridSpec,
    cap: usize,
) -> Result<RemainderReport> {
    let exact = sharp_compose(&a.sample(grid)?, &b.sample(grid)?, cap)?;
    let r = exact.sub(&sharp_expansion(a, b, terms, grid)?)?;
    let weighted_sup = match (&a.weights, &b.weights) {
        (Some((m1, g)), Some((m2, _))) => {
            let n = grid.len();
            let mut sup = 0.0f64;
            for j in 0..n {
                let mut p = grid.point(j, Space::Position);
                for m in 0..n {
                    p.truncate(grid.dim());
                    p.extend(grid.point(m, Space::Frequency));
                    let w = m1(&p) * m2(&p) * g(&p).powi(-2 * terms as i32);
                    sup = sup.max(r.at(j, m).norm() / w);
                }
            }
            Some(sup)
        }
        _ => None,
    };
    Ok(RemainderReport { terms, sup: r.sup_norm(), weighted_sup })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!("Planck parameter must be finite and non-zero, got {lambda}")));
    }
    Ok(())
}

/// `f(x + s a)` by a spectral shift, `s = |lambda|^{1/2}`.
fn spectral_shift(f: &[C64], grid: &GridSpec, shift: &[f64]) -> Vec<C64> {
    let axes = all_axes(grid);
    let mut v = f.to_vec();
    forward_axes(&mut v, grid, &axes);
    for (m, c) in v.iter_mut().enumerate() {
        *c *= C64::from_polar(1.0, dot(&grid.point(m, Space::Frequency), shift));
    }
    inverse_axes(&mut v, grid, &axes);
    v
}

fn check_probe(grid: &GridSpec, f: &SampledField) -> Result<usize> {
    f.expect_space(Space::Position)?;
    if f.grid() != grid || grid.is_heisenberg() {
        return Err(Error::GridMismatch("probe must live on the Euclidean position grid".into()));
    }
    Ok(grid.dim())
}

/// `pi_h^lambda f(x) = exp(-i sgn(lambda) s b.x) exp(-i lambda c) f(x + s a)` for `h = (a, b, c)`, `s = |lambda|^{1/2}`.
pub fn schrodinger_point(lambda: f64, h: &[f64], f: &SampledField) -> Result<SampledField> {
    check_lambda(lambda)?;
    let grid = f.grid().clone();
    let n = check_probe(&grid, f)?;
    if h.len() != 2 * n + 1 {
        return Err(Error::InvalidDimension(format!("group element needs {} coordinates, got {}", 2 * n + 1, h.len())));
    }
    let s = lambda.abs().sqrt();
    let sg = lambda.signum();
    let shift: Vec<f64> = h[..n].iter().map(|a| s * a).collect();
    let mut v = spectral_shift(f.values(), &grid, &shift);
    let phase_c = -lambda * h[2 * n];
    for (j, c) in v.iter_mut().enumerate() {
        let x = grid.point(j, Space::Position);
        *c *= C64::from_polar(1.0, phase_c - sg * s * dot(&h[n..2 * n], &x));
    }
    SampledField::new(grid, v, Space::Position)
}

/// `F~(a, b) = sum_c F(a, b, c) exp(-i lambda c) h_3`, laid out as `[a][b]` over the first 2n axes.
fn fold_center(lambda: f64, field: &SampledField) -> Result<(Vec<C64>, usize)> {
    field.expect_space(Space::Position)?;
    let g = field.grid();
    let n = g.heisenberg_n()?;
    let n3 = g.points[2 * n];
    let h3 = g.spacing(2 * n);
    let phases: Vec<C64> = (0..n3).map(|k| C64::from_polar(h3, -lambda * g.coordinate(2 * n, k))).collect();
    let out = field.values().chunks_exact(n3).map(|line| line.iter().zip(&phases).map(|(a, p)| a * p).sum()).collect();
    Ok((out, n))
}

fn block_points(grid: &GridSpec, n: usize, block: usize) -> (Vec<Vec<f64>>, f64) {
    let axes: Vec<usize> = (block * n..(block + 1) * n).collect();
    let sub = GridSpec::euclidean(
        &axes.iter().map(|&k| grid.points[k]).collect::<Vec<_>>(),
        &axes.iter().map(|&k| grid.half_extent[k]).collect::<Vec<_>>(),
    )
    .expect("sub-grid of a valid grid");
    ((0..sub.len()).map(|j| sub.point(j, Space::Position)).collect(), sub.cell_volume())
}

/// `pi_F^lambda f`: Riemann sum of `F(h) pi_h^lambda f` over the Heisenberg grid of `F`.
pub fn schrodinger_integrated(lambda: f64, field: &SampledField, f: &SampledField) -> Result<SampledField> {
    check_lambda(lambda)?;
    let pgrid = f.grid().clone();
    let n = check_probe(&pgrid, f)?;
    if field.grid().heisenberg_n()? != n {
        return Err(Error::GridMismatch("group and probe dimensions differ".into()));
    }
    let (folded, _) = fold_center(lambda, field)?;
    let (avals, acell) = block_points(field.grid(), n, 0);
    let (bvals, bcell) = block_points(field.grid(), n, 1);
    let s = lambda.abs().sqrt();
    let sg = lambda.signum();
    let xs: Vec<Vec<f64>> = (0..pgrid.len()).map(|j| pgrid.point(j, Space::Position)).collect();
    let nb = bvals.len();
    let zero = vec![C64::new(0.0, 0.0); pgrid.len()];
    let out = (0..avals.len())
        .into_par_iter()
        .filter(|&ia| folded[ia * nb..(ia + 1) * nb].iter().any(|v| v.norm() > 0.0))
        .map(|ia| {
            let shift: Vec<f64> = avals[ia].iter().map(|a| s * a).collect();
            let shifted = spectral_shift(f.values(), &pgrid, &shift);
            let row = &folded[ia * nb..(ia + 1) * nb];
            xs.iter()
                .zip(&shifted)
                .map(|(x, fv)| {
                    let m: C64 = row
                        .iter()
                        .zip(&bvals)
                        .filter(|(c, _)| c.norm() > 0.0)
                        .map(|(c, b)| c * C64::from_polar(1.0, -sg * s * dot(b, x)))
                        .sum();
                    m * fv * (acell * bcell)
                })
                .collect::<Vec<C64>>()
        })
        .reduce(|| zero.clone(), |a, b| a.iter().zip(&b).map(|(u, v)| u + v).collect());
    SampledField::new(pgrid, out, Space::Position)
}

/// Matrix of `pi_F^lambda` on the position grid, column by column.
pub fn schrodinger_matrix(lambda: f64, field: &SampledField, grid: &GridSpec, cap: usize) -> Result<CMat> {
    let n = check_cap(grid, cap)?;
    let cols = (0..n)
        .map(|k| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[k] = C64::new(1.0, 0.0);
            Ok(schrodinger_integrated(lambda, field, &SampledField::new(grid.clone(), e, Space::Position)?)?.into_values())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CMat::from_fn(n, n, |j, k| cols[k][j]))
}

/// Relative l2 error of `pi_{F *_1 G} f` against `pi_F pi_G f`.
pub fn homomorphism_residual(lambda: f64, f_field: &SampledField, g_field: &SampledField, probe: &SampledField) -> Result<f64> {
    let fg = convolve(ThetaLaw::heisenberg(), f_field, g_field, ConvMethod::Spectral)?;
    let lhs = schrodinger_integrated(lambda, &fg, probe)?;
    let rhs = schrodinger_integrated(lambda, f_field, &schrodinger_integrated(lambda, g_field, probe)?)?;
    Ok((lhs.sub(&rhs)?.l2_norm_sq() / rhs.l2_norm_sq()).sqrt())
}

/// `F^(-s xi, sgn(lambda) s x, lambda)` by direct quadrature of `F` over its grid.
pub fn representation_symbol(lambda: f64, field: &SampledField, grid: &GridSpec) -> Result<PhaseSpaceSymbol> {
    check_lambda(lambda)?;
    let n = field.grid().heisenberg_n()?;
    if grid.dim() != n || grid.is_heisenberg() {
        return Err(Error::GridMismatch("position grid must have dimension n".into()));
    }
    let (folded, _) = fold_center(lambda, field)?;
    let (avals, acell) = block_points(field.grid(), n, 0);
    let (bvals, bcell) = block_points(field.grid(), n, 1);
    let s = lambda.abs().sqrt();
    let sg = lambda.signum();
    let np = grid.len();
    let nb = bvals.len();
    // G(a, x_j) = sum_b F~(a, b) exp(-i sgn s b.x_j)
    let partial: Vec<Vec<C64>> = (0..np)
        .into_par_iter()
        .map(|j| {
            let x = grid.point(j, Space::Position);
            let phases: Vec<C64> = bvals.iter().map(|b| C64::from_polar(bcell, -sg * s * dot(b, &x))).collect();
            (0..avals.len()).map(|ia| folded[ia * nb..(ia + 1) * nb].iter().zip(&phases).map(|(c, p)| c * p).sum()).collect()
        })
        .collect();
    let xis: Vec<Vec<f64>> = (0..np).map(|m| grid.point(m, Space::Frequency)).collect();
    let values: Vec<C64> = (0..np * np)
        .into_par_iter()
        .map(|i| {
            let (j, m) = (i / np, i % np);
            avals.iter().zip(&partial[j]).map(|(a, g)| g * C64::from_polar(acell, s * dot(a, &xis[m]))).sum()
        })
        .collect();
    PhaseSpaceSymbol::new(grid.clone(), values)
}

#[derive(Clone, Debug, Serialize)]
pub struct RepSymbolReport {
    pub lambda: f64,
    pub operator_norm: f64,
    pub residual: f64,
    pub relative_residual: f64,
}

/// Compares `pi_F^lambda` with the Kohn–Nirenberg quantization of `F^(-s xi, s x, lambda)` in operator norm.
pub fn rep_symbol_check(lambda: f64, field: &SampledField, grid: &GridSpec, cap: usize) -> Result<RepSymbolReport> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("symbol check needs lambda > 0, got {lambda}")));
    }
    let direct = schrodinger_matrix(lambda, field, grid, cap)?;
    let quantized = quantize(&representation_symbol(lambda, field, grid)?, cap)?;
    let operator_norm = linalg::operator_norm(&direct);
    let residual = linalg::operator_norm(&(&direct - &quantized));
    Ok(RepSymbolReport {
        lambda,
        operator_norm,
        residual,
        relative_residual: if operator_norm > 0.0 { residual / operator_norm } else { residual },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityReport {
    pub lambdas: Vec<f64>,
    /// `seminorms[i][k]`: order `k` at `lambdas[i]`.
    pub seminorms: Vec<Vec<f64>>,
    /// Largest `(max - min) / max` across lambda, per order.
    pub variation: Vec<f64>,
}

/// Seminorms of `a^lambda(w) = A^(s w, lambda)` against `m_(lambda)(w) = m(s w, lambda)` and
/// `g^(lambda)(w) = s^{-1} g(s w, lambda)` on a fixed sample of `W = R^{2n}`.
pub fn parameter_uniformity(
    a_hat: &(dyn Fn(&[f64]) -> C64 + Sync),
    m: &(dyn Fn(&[f64]) -> f64 + Sync),
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_max: u32,
    lambdas: &[f64],
    points: &[Vec<f64>],
) -> Result<UniformityReport> {
    let lift = |lambda: f64, w: &[f64]| -> Vec<f64> {
        let s = lambda.sqrt();
        let mut p: Vec<f64> = w.iter().map(|v| s * v).collect();
        p.push(lambda);
        p
    };
    let mut seminorms = Vec::new();
    for &lambda in lambdas {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        let s = lambda.sqrt();
        let a = |w: &[f64]| a_hat(&lift(lambda, w));
        let ml = |w: &[f64]| m(&lift(lambda, w));
        let gl = |w: &[f64]| g(&lift(lambda, w)) / s;
        seminorms.push((0..=n_max).map(|k| seminorm(&a, &ml, &gl, k, points, 1.0)).collect::<Result<Vec<_>>>()?);
    }
    let variation = (0..=n_max as usize)
        .map(|k| {
            let col: Vec<f64> = seminorms.iter().map(|s| s[k]).collect();
            let hi = col.iter().cloned().fold(0.0, f64::max);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi > 0.0 { (hi - lo) / hi } else { 0.0 }
        })
        .collect();
    Ok(UniformityReport { lambdas: lambdas.to_vec(), seminorms, variation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;

    fn line(n: usize, l: f64) -> GridSpec {
        GridSpec::euclidean(&[n], &[l]).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn weight_function_examples() {
        let pts = box_sample(2, 10.0, 21);
        let r = check_weight_function(&WeightFunctionSpec::rho(2.0, 1.0).unwrap(), &pts).unwrap();
        assert!(r.passes);
        let one = WeightFunctionSpec::new(|_| 1.0, 1.0, 0.0).unwrap();
        let r = check_weight_function(&one, &pts).unwrap();
        assert!(r.passes && r.b_violations == 0 && r.min_g == 1.0);
        let half = WeightFunctionSpec::new(|_| 0.5, 1.0, 0.0).unwrap();
        assert!(check_weight_function(&half, &pts).unwrap().b_violations > 0);
        assert!(WeightFunctionSpec::new(|_| 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn seminorm_examples() {
        let pts = box_sample(2, 5.0, 11);
        let m = |x: &[f64]| 1.0 + x[0];
        let a = |x: &[f64]| c(1.0 + x[0]);
        let pos = box_sample(1, 0.9, 11);
        assert!((seminorm(&a, &m, &rho, 0, &pos, 1.0).unwrap() - 1.0).abs() < 1e-15);

        let log = |x: &[f64]| 1.0 + (1.0 + x.iter().map(|v| v * v).sum::<f64>()).ln();
        let a = |x: &[f64]| c(log(x));
        let r = seminorm_richardson(&a, &log, &rho, 1, &pts).unwrap();
        assert!(r.fine.is_finite() && r.fine > 0.0);
        assert!(r.relative_change < 0.05);

        let x1 = |x: &[f64]| c(x[0]);
        let one = |_: &[f64]| 1.0;
        let grow = seminorm_growth(&x1, &one, &rho, 0, 1, &[1.0, 10.0, 100.0], 11).unwrap();
        assert!(grow.unbounded);
        let bounded = seminorm_growth(&|x: &[f64]| c(x[0].sin()), &one, &rho, 0, 1, &[1.0, 10.0, 100.0], 11).unwrap();
        assert!(!bounded.unbounded);
    }

    #[test]
    fn quantization_basics() {
        let g = line(64, 8.0);
        let id = kn_quantize(|_, _| c(1.0), &g, DEFAULT_MATRIX_CAP).unwrap();
        assert!((id - CMat::identity(64, 64)).camax() < 1e-10);
        let x = kn_quantize(|x, _| c(x[0]), &g, DEFAULT_MATRIX_CAP).unwrap();
        for j in 0..64 {
            for k in 0..64 {
                let want = if j == k { g.coordinate(0, j) } else { 0.0 };
                assert!((x[(j, k)] - c(want)).norm() < 1e-10);
            }
        }
        let d = kn_quantize(|_, xi| c(xi[0]), &g, DEFAULT_MATRIX_CAP).unwrap();
        let gauss = sample(|x| c((-x[0] * x[0] / 2.0).exp()), &g).unwrap();
        let out = &d * linalg::CVec::from_vec(gauss.values().to_vec());
        for j in 0..64 {
            let xj = g.coordinate(0, j);
            let want = C64::new(0.0, xj * (-xj * xj / 2.0).exp());
            assert!((out[j] - want).norm() < 1e-8);
        }
        assert!(matches!(kn_quantize(|_, _| c(1.0), &g, 32), Err(Error::CapExceeded { dim: 64, cap: 32 })));
    }

    #[test]
    fn symbol_matrix_roundtrip() {
        let g = GridSpec::euclidean(&[8, 6], &[2.0, 3.0]).unwrap();
        let s = PhaseSpaceSymbol::sample(&g, |x, xi| C64::new(x[0] * xi[1] + 1.0, (x[1] - xi[0]).sin())).unwrap();
        let back = symbol_of(&quantize(&s, DEFAULT_MATRIX_CAP).unwrap(), &g).unwrap();
        assert!(back.sub(&s).unwrap().sup_norm() < 1e-10 * s.sup_norm());
    }

    #[test]
    fn identity_composition() {
        let g = line(32, 6.0);
        let one = PhaseSpaceSymbol::sample(&g, |_, _| c(1.0)).unwrap();
        let b = PhaseSpaceSymbol::sample(&g, |x, xi| C64::new((-x[0] * x[0]).exp(), xi[0] / (1.0 + xi[0] * xi[0]))).unwrap();
        let ab = sharp_compose(&one, &b, DEFAULT_MATRIX_CAP).unwrap();
        assert!(ab.sub(&b).unwrap().sup_norm() < 1e-10);
        let other = PhaseSpaceSymbol::sample(&line(16, 6.0), |_, _| c(1.0)).unwrap();
        assert!(sharp_compose(&one, &other, DEFAULT_MATRIX_CAP).is_err());
    }

    #[test]
    fn point_representation_is_unitary() {
        let g = line(64, 8.0);
        let f = sample(|x| C64::new((-x[0] * x[0] / 2.0).exp(), 0.3 * x[0] * (-x[0] * x[0]).exp()), &g).unwrap();
        let id = schrodinger_point(1.5, &[0.0; 3], &f).unwrap();
        assert!(id.sub(&f).unwrap().sup_norm() < 1e-12);
        for h in [[0.3, -1.1, 2.0], [1.7, 0.4, -0.6]] {
            for lambda in [1.0, -2.0] {
                let out = schrodinger_point(lambda, &h, &f).unwrap();
                assert!((out.l2_norm_sq() - f.l2_norm_sq()).abs() < 1e-10 * f.l2_norm_sq());
            }
        }
        assert!(schrodinger_point(0.0, &[0.0; 3], &f).is_err());
    }

    #[test]
    fn point_representation_is_a_homomorphism() {
        let g = line(128, 16.0);
        let f = sample(|x| c((-x[0] * x[0] / 2.0).exp()), &g).unwrap();
        let law = ThetaLaw::heisenberg();
        let (u, v) = ([0.4, -0.7, 0.2], [-0.3, 0.5, 1.1]);
        for lambda in [1.0, -2.0] {
            let lhs = schrodinger_point(lambda, &u, &schrodinger_point(lambda, &v, &f).unwrap()).unwrap();
            let rhs = schrodinger_point(lambda, &crate::group_conv::group_mul(law, &u, &v).unwrap(), &f).unwrap();
            assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-10, "lambda {lambda}");
        }
    }
}
