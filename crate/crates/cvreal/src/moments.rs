//! Derivatives at zero of `exp(x A x^T / 2 + L x + c0)`, the single evaluation
//! primitive behind every generating-functional criterion in the crate.
//!
//! The derivative with multi-index `k` is the Wick pairing sum over the labelled
//! multiset that repeats variable `i` exactly `k_i` times: each pair `{i, j}`
//! contributes `A_ij`, each singleton contributes `L_i`. The sum is evaluated by
//! dynamic programming over remaining-count vectors, which collapses the
//! factorially many matchings to a table of size `prod (k_i + 1)`.

use crate::error::{CvError, Result};

/// Total derivative order beyond which the pairing sum is refused.
pub const ORDER_GUARD: u32 = 24;

/// Upper bound on the DP table size.
pub const TABLE_GUARD: u64 = 10_000_000;

/// Symmetry tolerance on the quadratic coefficient matrix.
pub const SYMMETRY_TOL: f64 = 1e-14;

/// `exp(x A x^T / 2 + L x + c0)` with `A` symmetric, in `n` variables.
#[derive(Debug, Clone)]
pub struct QuadraticExponent {
    n: usize,
    a: Vec<f64>,
    l: Vec<f64>,
    c0: f64,
}

impl QuadraticExponent {
    /// `a` is row-major `n x n` and must be symmetric to `SYMMETRY_TOL`.
    pub fn new(n: usize, a: Vec<f64>, l: Vec<f64>, c0: f64) -> Result<Self> {
        if a.len() != n * n || l.len() != n {
            return Err(CvError::DomainError(format!(
                "coefficient sizes {} / {} do not match dimension {n}",
                a.len(),
                l.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (a[i * n + j] - a[j * n + i]).abs();
                let scale = 1.0f64.max(a[i * n + j].abs());
                if d > SYMMETRY_TOL * scale {
                    return Err(CvError::DomainError(format!(
                        "quadratic coefficients not symmetric at ({i},{j}): residual {d:.3e}"
                    )));
                }
            }
        }
        Ok(Self { n, a, l, c0 })
    }

    pub fn from_dense4(a: [[f64; 4]; 4], l: [f64; 4], c0: f64) -> Result<Self> {
        let mut flat = Vec::with_capacity(16);
        for row in a {
            flat.extend_from_slice(&row);
        }
        Self::new(4, flat, l.to_vec(), c0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn l(&self, i: usize) -> f64 {
        self.l[i]
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Sum of two exponents over the same variables (pointwise on coefficients).
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(CvError::DomainError("dimension mismatch in exponent sum".into()));
        }
        let a = self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect();
        let l = self.l.iter().zip(&other.l).map(|(x, y)| x + y).collect();
        Ok(Self { n: self.n, a, l, c0: self.c0 + other.c0 })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            a: self.a.iter().map(|x| x * s).collect(),
            l: self.l.iter().map(|x| x * s).collect(),
            c0: self.c0 * s,
        }
    }

    /// Substitute `x = T y`: the result is the exponent as a function of `y`,
    /// with `A' = T^T A T`, `L' = L T`. `t` is row-major `n x m`.
    pub fn substitute_linear(&self, t: &[f64], m: usize) -> Result<Self> {
        if t.len() != self.n * m {
            return Err(CvError::DomainError(format!(
                "substitution matrix size {} does not match {} x {m}",
                t.len(),
                self.n
            )));
        }
        let mut at = vec![0.0; self.n * m]; // A * T
        for i in 0..self.n {
            for k in 0..m {
                let mut s = 0.0;
                for j in 0..self.n {
                    s += self.a[i * self.n + j] * t[j * m + k];
                }
                at[i * m + k] = s;
            }
        }
        let mut a2 = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                let mut s = 0.0;
                for j in 0..self.n {
                    s += t[j * m + i] * at[j * m + k];
                }
                a2[i * m + k] = s;
            }
        }
        // Re-symmetrize to wash out roundoff from the two products.
        for i in 0..m {
            for k in (i + 1)..m {
                let avg = 0.5 * (a2[i * m + k] + a2[k * m + i]);
                a2[i * m + k] = avg;
                a2[k * m + i] = avg;
            }
        }
        let mut l2 = vec![0.0; m];
        for k in 0..m {
            l2[k] = (0..self.n).map(|j| self.l[j] * t[j * m + k]).sum();
        }
        Self::new(m, a2, l2, self.c0)
    }

    /// Relabel variables: template variable `i` becomes caller variable `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(CvError::DomainError("permutation length mismatch".into()));
        }
        let mut t = vec![0.0; self.n * self.n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= self.n {
                return Err(CvError::DomainError("permutation index out of range".into()));
            }
            t[i * self.n + p] = 1.0;
        }
        self.substitute_linear(&t, self.n)
    }
}

/// Derivative of the exponent at the origin with multi-index `orders`.
pub fn gaussian_moment(q: &QuadraticExponent, orders: &[u32]) -> Result<f64> {
    if orders.len() != q.dim() {
        return Err(CvError::DomainError(format!(
            "derivative multi-index length {} does not match dimension {}",
            orders.len(),
            q.dim()
        )));
    }
    let total: u32 = orders.iter().sum();
    if total > ORDER_GUARD {
        return Err(CvError::OverflowGuard { order: total, guard: ORDER_GUARD });
    }
    let radix: Vec<usize> = orders.iter().map(|&o| o as usize + 1).collect();
    let size: u64 = radix.iter().map(|&r| r as u64).product();
    if size > TABLE_GUARD {
        return Err(CvError::CapacityExceeded { required: size, guard: TABLE_GUARD });
    }
    let size = size as usize;
    let n = q.dim();

    // Mixed-radix strides; index(counts) = sum counts_i * stride_i.
    let mut stride = vec![0usize; n];
    let mut acc = 1;
    for i in (0..n).rev() {
        stride[i] = acc;
        acc *= radix[i];
    }

    let mut table = vec![0.0f64; size];
    table[0] = 1.0;
    let mut counts = vec![0usize; n];
    for idx in 1..size {
        // decode idx into counts
        let mut rem = idx;
        for i in 0..n {
            counts[i] = rem / stride[i];
            rem %= stride[i];
        }
        let i = counts.iter().position(|&c| c > 0).unwrap();
        // Remove one copy of variable i; it is either a singleton or pairs with
        // one of the remaining copies.
        let base = idx - stride[i];
        let mut v = q.l(i) * table[base];
        for j in 0..n {
            let avail = if j == i { counts[i] - 1 } else { counts[j] };
            if avail > 0 {
                v += q.a(i, j) * avail as f64 * table[base - stride[j]];
            }
        }
        table[idx] = v;
    }
    Ok(table[size - 1] * q.c0().exp())
}

/// Number of generating-functional parameters: two creation and two annihilation
/// displacement slots on each side of the state.
pub const PARAM_DIM: usize = 8;

/// Canonical parameter ordering for every 8-parameter form in the crate.
pub mod param {
    pub const EPS1: usize = 0;
    pub const EPS2: usize = 1;
    pub const XI1: usize = 2;
    pub const XI2: usize = 3;
    pub const ETA1: usize = 4;
    pub const ETA2: usize = 5;
    pub const ZETA1: usize = 6;
    pub const ZETA2: usize = 7;
}

/// A derivative pattern over the 8 generating parameters together with the
/// normalization constant of the state it extracts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeSpec {
    pub orders: [u32; PARAM_DIM],
    pub normalization: f64,
}

impl DerivativeSpec {
    pub fn new(orders: [u32; PARAM_DIM], normalization: f64) -> Result<Self> {
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(CvError::DomainError(format!(
                "normalization {normalization} must be positive"
            )));
        }
        let total: u32 = orders.iter().sum();
        if total > ORDER_GUARD {
            return Err(CvError::OverflowGuard { order: total, guard: ORDER_GUARD });
        }
        Ok(Self { orders, normalization })
    }

    /// Pattern extracting `m`-photon subtraction from both modes.
    pub fn subtract_orders(m: u32) -> [u32; PARAM_DIM] {
        let mut o = [0; PARAM_DIM];
        o[param::XI1] = m;
        o[param::XI2] = m;
        o[param::ETA1] = m;
        o[param::ETA2] = m;
        o
    }

    /// Pattern extracting `m`-photon addition on both modes.
    pub fn add_orders(m: u32) -> [u32; PARAM_DIM] {
        let mut o = [0; PARAM_DIM];
        o[param::EPS1] = m;
        o[param::EPS2] = m;
        o[param::ZETA1] = m;
        o[param::ZETA2] = m;
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q4(a: [[f64; 4]; 4]) -> QuadraticExponent {
        QuadraticExponent::from_dense4(a, [0.0; 4], 0.0).unwrap()
    }

    #[test]
    fn zero_order_returns_exp_c0() {
        let q = QuadraticExponent::new(2, vec![0.0; 4], vec![0.0; 2], 1.5).unwrap();
        assert_abs_diff_eq!(gaussian_moment(&q, &[0, 0]).unwrap(), 1.5f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn first_orders_return_linear_coefficients() {
        let q = QuadraticExponent::new(2, vec![0.0; 4], vec![0.7, -1.2], 0.0).unwrap();
        assert_abs_diff_eq!(gaussian_moment(&q, &[1, 0]).unwrap(), 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(gaussian_moment(&q, &[1, 1]).unwrap(), 0.7 * -1.2, epsilon = 1e-14);
    }

    #[test]
    fn order_four_is_the_three_pairing_sum() {
        let mut a = [[0.0; 4]; 4];
        let vals = [
            (0, 1, 0.3), (0, 2, -0.8), (0, 3, 0.45),
            (1, 2, 1.1), (1, 3, -0.2), (2, 3, 0.9),
        ];
        for (i, j, v) in vals {
            a[i][j] = v;
            a[j][i] = v;
        }
        let got = gaussian_moment(&q4(a), &[1, 1, 1, 1]).unwrap();
        let want = a[0][1] * a[2][3] + a[0][2] * a[1][3] + a[0][3] * a[1][2];
        assert_abs_diff_eq!(got, want, epsilon = 1e-14);
    }

    #[test]
    fn repeated_variable_counts_labelled_pairings() {
        // d^2/dx^2 exp(a x^2 / 2) at 0 is a; d^4/dx^4 is 3 a^2.
        let a = 0.6;
        let q = QuadraticExponent::new(1, vec![a], vec![0.0], 0.0).unwrap();
        assert_abs_diff_eq!(gaussian_moment(&q, &[2]).unwrap(), a, epsilon = 1e-14);
        assert_abs_diff_eq!(gaussian_moment(&q, &[4]).unwrap(), 3.0 * a * a, epsilon = 1e-13);
        assert_abs_diff_eq!(gaussian_moment(&q, &[6]).unwrap(), 15.0 * a.powi(3), epsilon = 1e-13);
    }

    #[test]
    fn singletons_mix_with_pairs() {
        // d^3/dx^3 exp(a x^2/2 + l x) at 0 = l^3 + 3 a l.
        let (a, l) = (0.8, -0.5);
        let q = QuadraticExponent::new(1, vec![a], vec![l], 0.0).unwrap();
        assert_abs_diff_eq!(
            gaussian_moment(&q, &[3]).unwrap(),
            l.powi(3) + 3.0 * a * l,
            epsilon = 1e-13
        );
    }

    #[test]
    fn order_guard_trips() {
        let q = QuadraticExponent::new(1, vec![1.0], vec![0.0], 0.0).unwrap();
        assert!(matches!(
            gaussian_moment(&q, &[25]),
            Err(CvError::OverflowGuard { order: 25, .. })
        ));
    }

    #[test]
    fn asymmetric_quadratic_is_rejected() {
        let a = vec![0.0, 1.0, 0.0, 0.0];
        assert!(matches!(
            QuadraticExponent::new(2, a, vec![0.0; 2], 0.0),
            Err(CvError::DomainError(_))
        ));
    }

    #[test]
    fn permute_relabels_variables() {
        let q = QuadraticExponent::new(
            2,
            vec![0.0, 0.25, 0.25, 0.0],
            vec![2.0, 0.0],
            0.0,
        )
        .unwrap();
        // swap the two variables: linear term moves to slot 1
        let p = q.permute(&[1, 0]).unwrap();
        assert_abs_diff_eq!(p.l(1), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.a(0, 1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn substitution_matches_direct_expansion() {
        // q(x) = x0 x1; substitute x = T y with T = [[1, 2], [3, -1]]:
        // q(y) = (y0 + 2 y1)(3 y0 - y1) = 3 y0^2 + 5 y0 y1 - 2 y1^2.
        let q = QuadraticExponent::new(2, vec![0.0, 1.0, 1.0, 0.0], vec![0.0; 2], 0.0).unwrap();
        let t = vec![1.0, 2.0, 3.0, -1.0];
        let s = q.substitute_linear(&t, 2).unwrap();
        // A'/2 gives the quadratic form, so A' = [[6, 5], [5, -4]].
        assert_abs_diff_eq!(s.a(0, 0), 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.a(0, 1), 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.a(1, 1), -4.0, epsilon = 1e-14);
    }
}
