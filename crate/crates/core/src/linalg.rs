//! Small dense complex linear algebra: matrix exponential, unitary projection,
//! structured random matrices.

use crate::{CMat, CVec, C64};
use nalgebra::DMatrix;
use rand::Rng;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Frobenius norm.
pub fn fro(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
///
/// After scaling, `‖X‖₁ ≤ 1/4` and the series is summed until the next term
/// is below machine precision relative to the partial sum.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let nrm = norm1(a);
    let squarings = if nrm > 0.25 { (nrm / 0.25).log2().ceil() as i32 } else { 0 };
    let x = a * C64::from(0.5f64.powi(squarings));
    let mut sum = identity(n);
    let mut term = identity(n);
    for k in 1..40 {
        term = &term * &x * C64::from(1.0 / k as f64);
        sum += &term;
        if norm1(&term) <= 1e-18 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Returns `(exp(X), D exp(X)[E])`, the exponential and its directional
/// derivative, read off the block exponential of `[[X, E], [0, X]]`.
pub fn expm_frechet(x: &CMat, e: &CMat) -> (CMat, CMat) {
    let n = x.nrows();
    let mut big = CMat::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(x);
    big.view_mut((n, n), (n, n)).copy_from(x);
    big.view_mut((0, n), (n, n)).copy_from(e);
    let ex = expm(&big);
    (ex.view((0, 0), (n, n)).into_owned(), ex.view((0, n), (n, n)).into_owned())
}

/// `‖U*U − Id‖_F`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    fro(&(u.adjoint() * u - identity(u.nrows())))
}

/// `‖A + A*‖_F`.
pub fn skew_defect(a: &CMat) -> f64 {
    fro(&(a + a.adjoint()))
}

/// `‖A − A*‖_F`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    fro(&(a - a.adjoint()))
}

/// Closest unitary matrix in Frobenius norm (polar factor).
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Leading singular triple `(σ, left, right)`: `M right = σ left`.
pub fn top_singular(m: &CMat) -> (f64, CVec, CVec) {
    let svd = m.clone().svd(true, true);
    let (mut k, mut best) = (0, -1.0);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > best {
            best = *s;
            k = i;
        }
    }
    let u = svd.u.expect("svd u").column(k).into_owned();
    let v = svd.v_t.expect("svd v_t").row(k).adjoint();
    (best, u, v)
}

/// Hermitian inner product `⟨u, v⟩ = v* u`, linear in the first slot.
pub fn inner(u: &CVec, v: &CVec) -> C64 {
    v.dotc(u)
}

/// Trace inner product `⟨X, Y⟩ = tr(X* Y)`.
pub fn trace_inner(x: &CMat, y: &CMat) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// A basis of the traceless skew-Hermitian matrices `i·λ_k` (generalised
/// Gell-Mann; Pauli matrices times `i` when `n = 2`) followed by `i·Id`.
pub fn skew_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n);
    let i = C64::new(0.0, 1.0);
    for a in 0..n {
        for b in (a + 1)..n {
            let mut s = CMat::zeros(n, n);
            s[(a, b)] = i;
            s[(b, a)] = i;
            out.push(s);
            let mut t = CMat::zeros(n, n);
            t[(a, b)] = C64::from(1.0);
            t[(b, a)] = C64::from(-1.0);
            out.push(t);
        }
    }
    for d in 1..n {
        let scale = (2.0 / (d * (d + 1)) as f64).sqrt();
        let mut m = CMat::zeros(n, n);
        for k in 0..d {
            m[(k, k)] = i * scale;
        }
        m[(d, d)] = i * (-(d as f64) * scale);
        out.push(m);
    }
    out.push(identity(n) * i);
    out
}

/// Random skew-Hermitian matrix with i.i.d. Gaussian-like entries of size `scale`.
pub fn random_skew_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMat {
    let h = random_hermitian(rng, n, scale);
    h * C64::new(0.0, 1.0)
}

/// Random Hermitian matrix with entries uniform in `[-scale, scale]`.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMat {
    let m = DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
    });
    (&m + m.adjoint()) * C64::from(0.5)
}

/// Random unit vector in `C^n`.
pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
    let v = CVec::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let nrm = v.norm();
    v / C64::from(nrm)
}

/// `e_k` in `C^n`.
pub fn basis_vector(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = C64::from(1.0);
    v
}

/// Column-major vectorisation.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_iterator(m.len(), m.iter().copied())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &[C64], rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expm_of_diagonal() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = C64::new(1.5, 0.3);
        a[(1, 1)] = C64::new(-4.0, 2.0);
        let e = expm(&a);
        assert!((e[(0, 0)] - a[(0, 0)].exp()).norm() < 1e-13);
        assert!((e[(1, 1)] - a[(1, 1)].exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp(θ J) with J = [[0,-1],[1,0]] is the rotation by θ.
        let th = 2.7;
        let j = CMat::from_row_slice(2, 2, &[0.0, -th, th, 0.0].map(C64::from));
        let e = expm(&j);
        assert!((e[(0, 0)].re - th.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - th.sin()).abs() < 1e-14);
    }

    #[test]
    fn frechet_matches_difference_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_skew_hermitian(&mut rng, 3, 1.0);
        let e = random_hermitian(&mut rng, 3, 1.0);
        let (ex, d) = expm_frechet(&x, &e);
        assert!(fro(&(ex - expm(&x))) < 1e-13);
        let h = 1e-5;
        let fd = (expm(&(&x + &e * C64::from(h))) - expm(&(&x - &e * C64::from(h)))) / C64::from(2.0 * h);
        assert!(fro(&(d - fd)) < 1e-8);
    }

    #[test]
    fn skew_basis_is_skew_and_independent() {
        for n in 1..5 {
            let b = skew_basis(n);
            assert_eq!(b.len(), n * n);
            for m in &b {
                assert!(skew_defect(m) < 1e-15);
            }
            let gram = DMatrix::from_fn(b.len(), b.len(), |i, j| trace_inner(&b[i], &b[j]));
            assert!(gram.determinant().norm() > 1e-6);
        }
    }

    #[test]
    fn polar_of_unitary_times_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = expm(&random_skew_hermitian(&mut rng, 2, 1.0));
        let p = identity(2) * C64::from(2.0) + random_hermitian(&mut rng, 2, 0.1);
        let q = polar_unitary(&(&u * p));
        assert!(fro(&(q - u)) < 1e-12);
    }

    #[test]
    fn kron_vec_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian(&mut rng, 2, 1.0);
        let b = random_hermitian(&mut rng, 2, 1.0);
        let x = random_hermitian(&mut rng, 2, 1.0);
        let lhs = vec_of(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_of(&x);
        assert!((lhs - rhs).norm() < 1e-13);
    }
}
