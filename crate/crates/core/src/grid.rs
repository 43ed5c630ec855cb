//! Uniform periodic grids and sampled complex fields.
//!
//! Axis `k` covers `[-L_k, L_k)` with `N_k` points and spacing `h_k = 2 L_k / N_k`.
//! Frequency fields use the centered grid `xi = (i - N_k/2) * pi / L_k`, so the
//! zero frequency sits at index `N_k/2`, just like the origin in position space.
//!
//! The forward transform is the Riemann sum `prod(h) * sum exp(-i x.xi) f(x)`; the
//! inverse carries the `(2 pi)^{-d}` factor in its weight `prod(1 / 2 L_k)`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Position,
    Frequency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Heisenberg index, `d = 2n + 1`. Zero marks a plain Euclidean grid.
    pub n: usize,
    #[serde(rename = "N")]
    pub points: Vec<usize>,
    #[serde(rename = "L")]
    pub half_extent: Vec<f64>,
}

/// Validated grid on the Heisenberg space of index `n`.
pub fn make_grid(n: usize, points: &[usize], half_extent: &[f64]) -> Result<GridSpec> {
    if n < 1 {
        return Err(Error::InvalidDimension("Heisenberg index n must be >= 1".into()));
    }
    let d = 2 * n + 1;
    if points.len() != d || half_extent.len() != d {
        return Err(Error::InvalidDimension(format!(
            "n = {n} needs {d} axes, got {} point counts and {} extents",
            points.len(),
            half_extent.len()
        )));
    }
    GridSpec::build(n, points.to_vec(), half_extent.to_vec())
}

impl GridSpec {
    fn build(n: usize, points: Vec<usize>, half_extent: Vec<f64>) -> Result<Self> {
        for (k, &p) in points.iter().enumerate() {
            if p < 4 || p % 2 != 0 {
                return Err(Error::InvalidDimension(format!(
                    "axis {k} has {p} points; need an even count >= 4"
                )));
            }
        }
        for (k, &l) in half_extent.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::NonPositiveExtent { axis: k, value: l });
            }
        }
        Ok(GridSpec { n, points, half_extent })
    }

    /// Heisenberg grid with the same point count and extent on every axis.
    pub fn cubic(n: usize, points: usize, half_extent: f64) -> Result<Self> {
        let d = 2 * n + 1;
        make_grid(n, &vec![points; d], &vec![half_extent; d])
    }

    /// Euclidean grid of arbitrary dimension (no Heisenberg block structure).
    pub fn euclidean(points: &[usize], half_extent: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() != half_extent.len() {
            return Err(Error::InvalidDimension(format!(
                "{} point counts vs {} extents",
                points.len(),
                half_extent.len()
            )));
        }
        Self::build(0, points.to_vec(), half_extent.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_heisenberg(&self) -> bool {
        self.n >= 1 && self.dim() == 2 * self.n + 1
    }

    pub fn heisenberg_n(&self) -> Result<usize> {
        if self.is_heisenberg() {
            Ok(self.n)
        } else {
            Err(Error::InvalidDimension("grid has no Heisenberg block structure".into()))
        }
    }

    /// Axis index of the central coordinate `x3`.
    pub fn x3_axis(&self) -> usize {
        2 * self.n
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_extent[axis] / self.points[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.spacing(k)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn freq_step(&self, axis: usize) -> f64 {
        PI / self.half_extent[axis]
    }

    /// Frequency quadrature weight including `(2 pi)^{-d}`.
    pub fn freq_cell_volume(&self) -> f64 {
        self.half_extent.iter().map(|l| 0.5 / l).product()
    }

    pub fn coordinate(&self, axis: usize, j: usize) -> f64 {
        -self.half_extent[axis] + j as f64 * self.spacing(axis)
    }

    pub fn frequency(&self, axis: usize, j: usize) -> f64 {
        (j as f64 - (self.points[axis] / 2) as f64) * self.freq_step(axis)
    }

    pub fn axis_values(&self, axis: usize, space: Space) -> Vec<f64> {
        (0..self.points[axis])
            .map(|j| match space {
                Space::Position => self.coordinate(axis, j),
                Space::Frequency => self.frequency(axis, j),
            })
            .collect()
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for k in (0..d.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.points[k + 1];
        }
        s
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.points[k];
            flat /= self.points[k];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.points).fold(0, |acc, (&i, &p)| acc * p + i)
    }

    pub fn point(&self, flat: usize, space: Space) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(k, &j)| match space {
                Space::Position => self.coordinate(k, j),
                Space::Frequency => self.frequency(k, j),
            })
            .collect()
    }

    /// Flat index of the origin (and of the zero frequency).
    pub fn origin_index(&self) -> usize {
        let idx: Vec<usize> = self.points.iter().map(|p| p / 2).collect();
        self.ravel(&idx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<C64>,
    space: Space,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<C64>, space: Space) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(SampledField { grid, values, space })
    }

    pub fn zeros(grid: &GridSpec, space: Space) -> Self {
        SampledField { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()], space }
    }

    /// Discrete delta: `1 / prod(h)` at the origin, unit Riemann mass.
    pub fn delta(grid: &GridSpec) -> Self {
        let mut f = Self::zeros(grid, Space::Position);
        f.values[grid.origin_index()] = C64::new(1.0 / grid.cell_volume(), 0.0);
        f
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn expect_space(&self, expected: Space) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::WrongSpace { expected, found: self.space })
        }
    }

    pub fn same_grid(&self, other: &SampledField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        SampledField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            space: self.space,
        }
    }

    /// Pointwise map that also sees the coordinate in the field's own space.
    pub fn map_with_point(&self, f: impl Fn(&[f64], C64) -> C64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(&self.grid.point(i, self.space), v))
            .collect();
        SampledField { grid: self.grid.clone(), values, space: self.space }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &SampledField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &SampledField, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.same_grid(other)?;
        other.expect_space(self.space)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(SampledField { grid: self.grid.clone(), values, space: self.space })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    fn weight(&self) -> f64 {
        match self.space {
            Space::Position => self.grid.cell_volume(),
            Space::Frequency => self.grid.freq_cell_volume(),
        }
    }

    /// Quadrature of the field with the weight of its space.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.weight()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.weight()
    }

    /// Largest modulus on the outermost index layer, relative to the sup norm.
    pub fn boundary_mass(&self) -> f64 {
        let sup = self.sup_norm();
        if sup == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (i, v) in self.values.iter().enumerate() {
            let idx = self.grid.unravel(i);
            if idx.iter().any(|&j| j == 0) {
                worst = worst.max(v.norm());
            }
        }
        worst / sup
    }

    /// Value at the nearest-lower grid point of a position (no interpolation).
    pub fn at_index(&self, idx: &[usize]) -> C64 {
        self.values[self.grid.ravel(idx)]
    }
}

/// Samples `f` at every position-space grid point.
pub fn sample(f: impl Fn(&[f64]) -> C64, grid: &GridSpec) -> Result<SampledField> {
    sample_in(f, grid, Space::Position)
}

/// Samples `f` at every frequency-space grid point.
pub fn sample_frequency(f: impl Fn(&[f64]) -> C64, grid: &GridSpec) -> Result<SampledField> {
    sample_in(f, grid, Space::Frequency)
}

fn sample_in(f: impl Fn(&[f64]) -> C64, grid: &GridSpec, space: Space) -> Result<SampledField> {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = grid.point(i, space);
        let v = f(&p);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite { coordinate: p });
        }
        values.push(v);
    }
    Ok(SampledField { grid: grid.clone(), values, space })
}

/// Applies `op` to every 1-D line of `data` along `axis`.
pub(crate) fn for_each_line(
    data: &mut [C64],
    shape: &[usize],
    axis: usize,
    mut op: impl FnMut(&mut [C64]),
) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    if stride == 1 {
        for line in data.chunks_exact_mut(n) {
            op(line);
        }
        return;
    }
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for o in 0..outer {
        let base = o * n * stride;
        for s in 0..stride {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = data[base + s + j * stride];
            }
            op(&mut buf);
            for (j, b) in buf.iter().enumerate() {
                data[base + s + j * stride] = *b;
            }
        }
    }
}

/// Centered forward transform along one axis: `h * sum_j exp(-i x_j xi_i) f_j`.
pub(crate) fn centered_forward_axis(
    data: &mut [C64],
    shape: &[usize],
    axis: usize,
    h: f64,
    planner: &mut FftPlanner<f64>,
) {
    let n = shape[axis];
    let half = n / 2;
    let fft = planner.plan_fft_forward(n);
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    for_each_line(data, shape, axis, |line| {
        fft.process(line);
        for (i, t) in tmp.iter_mut().enumerate() {
            let sign = if (i + half) % 2 == 0 { h } else { -h };
            *t = line[(i + half) % n] * sign;
        }
        line.copy_from_slice(&tmp);
    });
}

/// Centered inverse transform along one axis with weight `1 / (2 L)`.
pub(crate) fn centered_inverse_axis(
    data: &mut [C64],
    shape: &[usize],
    axis: usize,
    half_extent: f64,
    planner: &mut FftPlanner<f64>,
) {
    let n = shape[axis];
    let half = n / 2;
    let ifft = planner.plan_fft_inverse(n);
    let w = 0.5 / half_extent;
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    for_each_line(data, shape, axis, |line| {
        for (m, t) in tmp.iter_mut().enumerate() {
            let sign = if m % 2 == 0 { w } else { -w };
            *t = line[(m + half) % n] * sign;
        }
        ifft.process(&mut tmp);
        line.copy_from_slice(&tmp);
    });
}

pub(crate) fn forward_axes(values: &mut [C64], grid: &GridSpec, axes: &[usize]) {
    let mut planner = FftPlanner::new();
    for &k in axes {
        centered_forward_axis(values, &grid.points, k, grid.spacing(k), &mut planner);
    }
}

pub(crate) fn inverse_axes(values: &mut [C64], grid: &GridSpec, axes: &[usize]) {
    let mut planner = FftPlanner::new();
    for &k in axes {
        centered_inverse_axis(values, &grid.points, k, grid.half_extent[k], &mut planner);
    }
}

pub fn fourier_forward(field: &SampledField) -> Result<SampledField> {
    field.expect_space(Space::Position)?;
    let mut values = field.values.clone();
    let axes: Vec<usize> = (0..field.grid.dim()).collect();
    forward_axes(&mut values, &field.grid, &axes);
    Ok(SampledField { grid: field.grid.clone(), values, space: Space::Frequency })
}

pub fn fourier_inverse(field: &SampledField) -> Result<SampledField> {
    field.expect_space(Space::Frequency)?;
    let mut values = field.values.clone();
    let axes: Vec<usize> = (0..field.grid.dim()).collect();
    inverse_axes(&mut values, &field.grid, &axes);
    Ok(SampledField { grid: field.grid.clone(), values, space: Space::Position })
}

fn check_multiindex(grid: &GridSpec, alpha: &[u32]) -> Result<()> {
    if alpha.len() != grid.dim() {
        return Err(Error::MultiindexLength { expected: grid.dim(), found: alpha.len() });
    }
    Ok(())
}

fn monomial(p: &[f64], alpha: &[u32]) -> f64 {
    p.iter().zip(alpha).map(|(x, &a)| x.powi(a as i32)).product()
}

/// `T^alpha`: multiplication by the coordinate monomial of the field's own space.
pub fn apply_t(field: &SampledField, alpha: &[u32]) -> Result<SampledField> {
    check_multiindex(&field.grid, alpha)?;
    if alpha.iter().all(|&a| a == 0) {
        return Ok(field.clone());
    }
    Ok(field.map_with_point(|p, v| v * monomial(p, alpha)))
}

/// Multiplier `(-xi)^alpha` on the centered frequency grid, with the Nyquist
/// row removed along axes of odd order.
pub(crate) fn derivative_multiplier(grid: &GridSpec, alpha: &[u32]) -> Vec<f64> {
    let d = grid.dim();
    let per_axis: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            (0..grid.points[k])
                .map(|j| {
                    if alpha[k] % 2 == 1 && j == 0 {
                        0.0
                    } else {
                        (-grid.frequency(k, j)).powi(alpha[k] as i32)
                    }
                })
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            grid.unravel(i).iter().enumerate().map(|(k, &j)| per_axis[k][j]).product()
        })
        .collect()
}

/// `D^alpha = (i d)^alpha`, computed spectrally.
pub fn apply_d(field: &SampledField, alpha: &[u32]) -> Result<SampledField> {
    check_multiindex(&field.grid, alpha)?;
    if alpha.iter().all(|&a| a == 0) {
        return Ok(field.clone());
    }
    match field.space {
        Space::Position => {
            let mut hat = fourier_forward(field)?;
            let mult = derivative_multiplier(&field.grid, alpha);
            for (v, m) in hat.values.iter_mut().zip(mult) {
                *v *= m;
            }
            fourier_inverse(&hat)
        }
        Space::Frequency => {
            // (i d_xi)^alpha fhat is the transform of x^alpha f
            let f = fourier_inverse(field)?;
            fourier_forward(&apply_t(&f, alpha)?)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    n: usize,
    #[serde(rename = "N")]
    points: Vec<usize>,
    #[serde(rename = "L")]
    half_extent: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    grid: GridHeader,
    space: Space,
    values: Vec<[f64; 2]>,
}

impl SampledField {
    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = FieldJson {
            grid: GridHeader {
                n: self.grid.n,
                points: self.grid.points.clone(),
                half_extent: self.grid.half_extent.clone(),
            },
            space: self.space,
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        };
        serde_json::to_value(doc).expect("field serializes")
    }

    pub fn from_json_value(value: &serde_json::Value) -> Result<Self> {
        let doc: FieldJson = serde_json::from_value(value.clone())?;
        let grid = if doc.grid.n == 0 {
            GridSpec::euclidean(&doc.grid.points, &doc.grid.half_extent)?
        } else {
            make_grid(doc.grid.n, &doc.grid.points, &doc.grid.half_extent)?
        };
        let values = doc.values.iter().map(|v| C64::new(v[0], v[1])).collect();
        SampledField::new(grid, values, doc.space)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.grid.dim();
        let coord = match self.space {
            Space::Position => "x",
            Space::Frequency => "xi",
        };
        let mut header: Vec<String> = (0..d).map(|k| format!("i{k}")).collect();
        header.extend((0..d).map(|k| format!("{coord}{k}")));
        header.push("re".into());
        header.push("im".into());
        writeln!(w, "{}", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let idx = self.grid.unravel(i);
            let p = self.grid.point(i, self.space);
            let mut cols: Vec<String> = idx.iter().map(|j| j.to_string()).collect();
            cols.extend(p.iter().map(|x| format!("{x:e}")));
            cols.push(format!("{:e}", v.re));
            cols.push(format!("{:e}", v.im));
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }

    /// Reads values back from CSV written by [`SampledField::write_csv`] onto a known grid.
    pub fn read_csv<R: BufRead>(grid: &GridSpec, space: Space, r: R) -> Result<Self> {
        let d = grid.dim();
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        let mut seen = 0usize;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 2 * d + 2 {
                return Err(Error::Parse(format!("line {}: expected {} columns", lineno + 1, 2 * d + 2)));
            }
            let idx = cols[..d]
                .iter()
                .map(|c| c.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if idx.iter().zip(&grid.points).any(|(&j, &p)| j >= p) {
                return Err(Error::Parse(format!("line {}: index out of range", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            values[grid.ravel(&idx)] = C64::new(parse(cols[2 * d])?, parse(cols[2 * d + 1])?);
            seen += 1;
        }
        if seen != grid.len() {
            return Err(Error::Parse(format!("expected {} rows, got {seen}", grid.len())));
        }
        SampledField::new(grid.clone(), values, space)
    }
}
