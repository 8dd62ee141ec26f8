//! Small complex-vector helpers shared by the solvers.

use nalgebra::DVector;
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;

/// `aᴴ b`
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `|aᴴ b|²`
pub fn gain(a: &CVector, b: &CVector) -> f64 {
    inner(a, b).norm_sqr()
}

pub fn norm_sqr(a: &CVector) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn zeros(m: usize) -> CVector {
    CVector::from_element(m, Complex64::new(0.0, 0.0))
}

/// Orthonormal basis of span{first, second}, padded to two vectors when the
/// span is one-dimensional and `m ≥ 2`. The first basis vector is parallel to
/// `first` whenever `first` is nonzero.
pub fn span_basis(first: &CVector, second: &CVector) -> Vec<CVector> {
    let m = first.len();
    let mut basis: Vec<CVector> = Vec::with_capacity(2);
    for v in [first, second] {
        let mut r = v.clone();
        for b in &basis {
            let c = inner(b, &r);
            r -= b * c;
        }
        let n = norm_sqr(&r).sqrt();
        let scale = norm_sqr(v).sqrt();
        if n > 1e-12 * scale.max(f64::MIN_POSITIVE) && n > 0.0 {
            basis.push(r / Complex64::new(n, 0.0));
        }
    }
    if basis.is_empty() {
        let mut e = zeros(m);
        e[0] = Complex64::new(1.0, 0.0);
        basis.push(e);
    }
    if basis.len() == 1 && m >= 2 {
        // any unit vector orthogonal to the first
        for k in 0..m {
            let mut e = zeros(m);
            e[k] = Complex64::new(1.0, 0.0);
            let c = inner(&basis[0], &e);
            e -= &basis[0] * c;
            let n = norm_sqr(&e).sqrt();
            if n > 1e-6 {
                basis.push(e / Complex64::new(n, 0.0));
                break;
            }
        }
    }
    basis
}

/// Coordinates of `v` in an orthonormal basis: `[bᴴ v for b in basis]`.
pub fn coordinates(basis: &[CVector], v: &CVector) -> CVector {
    CVector::from_iterator(basis.len(), basis.iter().map(|b| inner(b, v)))
}

/// `Σ_k c_k b_k`
pub fn lift(basis: &[CVector], coords: &CVector) -> CVector {
    let m = basis[0].len();
    let mut out = zeros(m);
    for (b, c) in basis.iter().zip(coords.iter()) {
        out += b * *c;
    }
    out
}

/// Rotate `v` so its largest-magnitude entry is real and nonnegative.
pub fn fix_phase(v: &CVector) -> CVector {
    let Some((k, pivot)) = v
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best: Option<(usize, Complex64)>, (k, z)| match best {
            Some((_, b)) if z.norm_sqr() <= b.norm_sqr() => best,
            _ => Some((k, z)),
        })
    else {
        return v.clone();
    };
    if pivot.norm_sqr() == 0.0 {
        return v.clone();
    }
    let mut out = v * (pivot.conj() / pivot.norm());
    out[k] = Complex64::new(pivot.norm(), 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn span_basis_is_orthonormal_and_reproduces_inputs() {
        let g = CVector::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.7, -1.1)]);
        let f = CVector::from_vec(vec![c(0.2, 0.1), c(0.9, 0.0), c(-0.4, 0.3)]);
        let basis = span_basis(&g, &f);
        assert_eq!(basis.len(), 2);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let ip = inner(a, b);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - c(want, 0.0)).norm() < 1e-12);
            }
        }
        for v in [&g, &f] {
            let back = lift(&basis, &coordinates(&basis, v));
            assert!((back - v).norm() < 1e-12);
        }
    }

    #[test]
    fn parallel_inputs_get_padded_basis() {
        let g = CVector::from_vec(vec![c(1.0, 1.0), c(2.0, 0.0)]);
        let f = &g * c(0.0, 3.0);
        let basis = span_basis(&g, &f);
        assert_eq!(basis.len(), 2);
        assert!(inner(&basis[0], &basis[1]).norm() < 1e-12);
    }

    #[test]
    fn phase_gauge_makes_pivot_real_positive() {
        let v = CVector::from_vec(vec![c(0.1, 0.0), c(-2.0, 1.0)]);
        let w = fix_phase(&v);
        assert!(w[1].im == 0.0 && w[1].re > 0.0);
        assert!((norm_sqr(&w) - norm_sqr(&v)).abs() < 1e-12);
    }
}
