//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [f64; 5] = [1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1, 2.097847961257068e0, 5.371920351148152e0];

/// Row-major `n x n` buffer into a matrix.
pub fn from_row_major(n: usize, data: &[C64]) -> CMat {
    CMat::from_row_slice(n, n, data)
}

pub fn norm1(a: &CMat) -> f64 {
    a.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn scaled(a: &CMat, c: f64) -> CMat {
    a * C64::new(c, 0.0)
}

fn pade_low(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let a2 = a * a;
    let mut pow = CMat::identity(n, n);
    let mut u = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    for k in 0..b.len() / 2 {
        v += scaled(&pow, b[2 * k]);
        u += scaled(&pow, b[2 * k + 1]);
        pow = &pow * &a2;
    }
    (a * u, v)
}

fn pade13(a: &CMat) -> (CMat, CMat) {
    let b = &PADE13;
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]));
    let u = a * (inner_u + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&id, b[1]));
    let inner_v = &a6 * (scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]));
    let v = inner_v + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);
    (u, v)
}

/// Matrix exponential by scaling and squaring with Padé approximants of degree 3 to 13.
pub fn expm(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument("expm needs a square matrix".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotConverged("expm input is not finite".into()));
    }
    let nrm = norm1(a);
    let lows: [&[f64]; 4] = [&PADE3, &PADE5, &PADE7, &PADE9];
    for (k, b) in lows.iter().enumerate() {
        if nrm <= THETA[k] {
            let (u, v) = pade_low(a, b);
            return pade_solve(&u, &v);
        }
    }
    let s = if nrm > THETA[4] { (nrm / THETA[4]).log2().ceil() as i32 } else { 0 };
    let a_s = scaled(a, 0.5f64.powi(s));
    let (u, v) = pade13(&a_s);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotConverged("expm overflowed".into()));
    }
    Ok(r)
}

fn pade_solve(u: &CMat, v: &CMat) -> Result<CMat> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).ok_or_else(|| Error::Singular("Padé denominator".into()))
}

/// Dense solve `a x = b`.
pub fn solve(a: CMat, b: &CVec) -> Result<CVec> {
    a.lu().solve(b).ok_or_else(|| Error::Singular("singular linear system".into()))
}

/// Unitary reduction `a = q h q^*` with `h` upper Hessenberg.
pub struct HessenbergForm {
    pub q: CMat,
    pub h: CMat,
}

impl HessenbergForm {
    pub fn new(a: CMat) -> Self {
        let (q, h) = a.hessenberg().unpack();
        HessenbergForm { q, h }
    }

    /// Solves `(z I - h) y = c` in O(n^2) by Gaussian elimination with adjacent-row pivoting.
    pub fn shifted_solve(&self, z: C64, c: &CVec) -> Result<CVec> {
        let n = self.h.nrows();
        let mut a = -self.h.clone();
        for i in 0..n {
            a[(i, i)] += z;
        }
        let mut b = c.clone();
        for k in 0..n.saturating_sub(1) {
            if a[(k + 1, k)].norm() > a[(k, k)].norm() {
                for j in k..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(k + 1, j)];
                    a[(k + 1, j)] = t;
                }
                b.swap_rows(k, k + 1);
            }
            let piv = a[(k, k)];
            if piv.norm() == 0.0 {
                continue;
            }
            let l = a[(k + 1, k)] / piv;
            if l.norm() == 0.0 {
                continue;
            }
            for j in k..n {
                let t = a[(k, j)];
                a[(k + 1, j)] -= l * t;
            }
            let t = b[k];
            b[k + 1] -= l * t;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= a[(i, j)] * b[j];
            }
            let d = a[(i, i)];
            if d.norm() < 1e-300 {
                return Err(Error::Singular(format!("z = {z} hits the spectrum")));
            }
            b[i] = s / d;
        }
        Ok(b)
    }
}

/// Largest singular value.
pub fn operator_norm(a: &CMat) -> f64 {
    a.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Complex eigenvalues via the Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    let (_, t) = a.clone().schur().unpack();
    t.diagonal().iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_diagonal_and_nilpotent() {
        for scale in [0.001, 0.2, 1.0, 3.0, 40.0] {
            let d = CMat::from_diagonal(&CVec::from_vec(vec![c(-scale, 0.0), c(0.5 * scale, scale), c(0.0, -scale)]));
            let e = expm(&d).unwrap();
            for i in 0..3 {
                let want = d[(i, i)].exp();
                assert!((e[(i, i)] - want).norm() < 1e-13 * want.norm().max(1.0), "scale {scale}");
            }
        }
        let mut n = CMat::zeros(3, 3);
        n[(0, 1)] = c(2.0, 0.0);
        n[(1, 2)] = c(3.0, 0.0);
        let e = expm(&n).unwrap();
        assert!((e[(0, 2)] - c(3.0, 0.0)).norm() < 1e-13);
        assert!((e[(0, 1)] - c(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn expm_rotation() {
        let t = 7.5;
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-t, 0.0), c(t, 0.0), c(0.0, 0.0)]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn hessenberg_shifted_solve_matches_lu() {
        let n = 9;
        let a = CMat::from_fn(n, n, |i, j| c(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 * 0.3));
        let hf = HessenbergForm::new(a.clone());
        let rec = &hf.q * &hf.h * hf.q.adjoint();
        assert!((rec - &a).norm() < 1e-12);
        let b = CVec::from_fn(n, |i, _| c(i as f64, 1.0));
        for z in [c(10.0, 0.0), c(-1.0, 2.0), c(0.3, -5.0)] {
            let y = hf.q.clone() * hf.shifted_solve(z, &(hf.q.adjoint() * &b)).unwrap();
            let mut m = -a.clone();
            for i in 0..n {
                m[(i, i)] += z;
            }
            let x = solve(m, &b).unwrap();
            assert!((y - x).norm() < 1e-11);
        }
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, -3.0)]));
        assert!((operator_norm(&d) - 3.0).abs() < 1e-14);
        let ev = eigenvalues(&d);
        assert!(ev.iter().any(|z| (z - c(0.0, -3.0)).norm() < 1e-14));
    }
}
