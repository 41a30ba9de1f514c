//! Polynomials in the unit delay, stored in ascending powers of `z^-1`.

use nalgebra::{Complex, DMatrix};

pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `a + z^-shift * b`.
pub(crate) fn add_shifted(a: &[f64], b: &[f64], shift: usize) -> Vec<f64> {
    let len = a.len().max(b.len() + shift);
    let mut out = vec![0.0; len];
    out[..a.len()].copy_from_slice(a);
    for (k, &bk) in b.iter().enumerate() {
        out[k + shift] += bk;
    }
    out
}

/// Drops trailing (highest power) zeros, keeping at least one coefficient.
pub(crate) fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

pub(crate) fn leading_zeros(p: &[f64]) -> usize {
    p.iter().take_while(|c| **c == 0.0).count()
}

/// Roots in `z` of `sum_k p[k] z^-k` (after multiplying through by `z^n`).
///
/// `p[0]` must be nonzero.
pub(crate) fn roots(p: &[f64]) -> Vec<Complex<f64>> {
    let p = trim(p.to_vec());
    let n = p.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = p[0];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        companion[(0, k)] = -p[k + 1] / lead;
    }
    for k in 1..n {
        companion[(k, k - 1)] = 1.0;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Evaluates `sum_k p[k] x^k` by Horner's rule.
pub(crate) fn horner(p: &[f64], x: Complex<f64>) -> Complex<f64> {
    p.iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_matches_hand_product() {
        // (1 + 2x)(3 - x) = 3 + 5x - 2x^2
        assert_eq!(convolve(&[1.0, 2.0], &[3.0, -1.0]), vec![3.0, 5.0, -2.0]);
    }

    #[test]
    fn roots_of_first_order_section() {
        let r = roots(&[1.0, -0.5]);
        assert_eq!(r.len(), 1);
        assert!((r[0].re - 0.5).abs() < 1e-14 && r[0].im.abs() < 1e-14);
    }

    #[test]
    fn roots_of_resonant_pair() {
        // 1 - 2 c z^-1 + rho^2 z^-2 with rho = 0.9
        let rho: f64 = 0.9;
        let theta: f64 = 0.3;
        let r = roots(&[1.0, -2.0 * rho * theta.cos(), rho * rho]);
        for z in r {
            assert!((z.norm() - rho).abs() < 1e-12);
        }
    }
}
