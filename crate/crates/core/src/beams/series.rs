//! Truncated power series in the normal coordinate `y`.

use crate::{CMat, CVec, C64};

pub fn mul(a: &[C64], b: &[C64], deg: usize) -> Vec<C64> {
    let mut out = vec![C64::from(0.0); deg + 1];
    for (i, ai) in a.iter().enumerate().take(deg + 1) {
        for (j, bj) in b.iter().enumerate().take(deg + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or_default() + b.get(i).copied().unwrap_or_default()).collect()
}

pub fn deriv(a: &[C64]) -> Vec<C64> {
    a.iter().enumerate().skip(1).map(|(k, v)| v * k as f64).collect()
}

pub fn real(a: &[f64]) -> Vec<C64> {
    a.iter().map(|v| C64::from(*v)).collect()
}

/// Value and first two derivatives at `y`.
pub fn eval3(a: &[C64], y: f64) -> (C64, C64, C64) {
    let (mut p, mut d, mut dd) = (C64::from(0.0), C64::from(0.0), C64::from(0.0));
    for c in a.iter().rev() {
        dd = dd * y + d * 2.0;
        d = d * y + p;
        p = p * y + c;
    }
    (p, d, dd)
}

/// `Σ_l M_l y^l` applied to `Σ_k v_k y^k`, truncated at `deg`.
pub fn mat_vec(m: &[CMat], v: &[CVec], deg: usize, n: usize) -> Vec<CVec> {
    let mut out = vec![CVec::zeros(n); deg + 1];
    for (i, mi) in m.iter().enumerate().take(deg + 1) {
        for (j, vj) in v.iter().enumerate().take(deg + 1 - i) {
            out[i + j] += mi * vj;
        }
    }
    out
}

pub fn scal_vec(s: &[C64], v: &[CVec], deg: usize, n: usize) -> Vec<CVec> {
    let mut out = vec![CVec::zeros(n); deg + 1];
    for (i, si) in s.iter().enumerate().take(deg + 1) {
        for (j, vj) in v.iter().enumerate().take(deg + 1 - i) {
            out[i + j] += vj * *si;
        }
    }
    out
}

pub fn mat_mat(a: &[CMat], b: &[CMat], deg: usize, n: usize) -> Vec<CMat> {
    let mut out = vec![CMat::zeros(n, n); deg + 1];
    for (i, ai) in a.iter().enumerate().take(deg + 1) {
        for (j, bj) in b.iter().enumerate().take(deg + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub fn vec_deriv(v: &[CVec]) -> Vec<CVec> {
    v.iter().enumerate().skip(1).map(|(k, x)| x * C64::from(k as f64)).collect()
}

/// `Σ v_k y^k` and its first two `y`-derivatives.
pub fn vec_eval3(v: &[CVec], y: f64, n: usize) -> (CVec, CVec, CVec) {
    let (mut p, mut d, mut dd) = (CVec::zeros(n), CVec::zeros(n), CVec::zeros(n));
    for c in v.iter().rev() {
        dd = dd * C64::from(y) + &d * C64::from(2.0);
        d = d * C64::from(y) + &p;
        p = p * C64::from(y) + c;
    }
    (p, d, dd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_derivatives() {
        let a = real(&[1.0, -2.0, 0.5, 3.0]);
        let (p, d, dd) = eval3(&a, 0.7);
        let y: f64 = 0.7;
        assert!((p.re - (1.0 - 2.0 * y + 0.5 * y * y + 3.0 * y.powi(3))).abs() < 1e-14);
        assert!((d.re - (-2.0 + y + 9.0 * y * y)).abs() < 1e-14);
        assert!((dd.re - (1.0 + 18.0 * y)).abs() < 1e-14);
        let sq = mul(&a, &a, 2);
        assert_eq!(sq, real(&[1.0, -4.0, 5.0]));
    }
}
