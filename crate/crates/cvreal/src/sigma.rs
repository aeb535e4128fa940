//! The commutative 4x4 matrix algebra spanned by `{I, I (x) s, s (x) I, s (x) s}`,
//! where `s` is the 2x2 swap. Every covariance-like object in the symmetric-state
//! criteria lives in this span, so inversion, multiplication and determinants reduce
//! to arithmetic on four coefficients.
//!
//! Basis convention: coefficients `[v1, v2, v3, v4]` denote
//! `v1*I4 + v2*(I (x) s) + v3*(s (x) I) + v4*(s (x) s)`, which is also the first row
//! of the dense matrix. The first tensor slot separates the creation and annihilation
//! blocks of the operator vector `(a1+, a2+, a1, a2)`; the second slot separates the
//! two modes.

use crate::error::{CvError, Result};

/// Eigenvalue magnitude below which inversion is refused.
pub const SINGULAR_TOL: f64 = 1e-12;

/// A matrix in the commutative swap-generated span, stored by its four coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaBasisMatrix {
    pub coeffs: [f64; 4],
}

impl SigmaBasisMatrix {
    pub const fn new(coeffs: [f64; 4]) -> Self {
        Self { coeffs }
    }

    pub const fn zero() -> Self {
        Self::new([0.0; 4])
    }

    pub const fn identity() -> Self {
        Self::new([1.0, 0.0, 0.0, 0.0])
    }

    /// `I (x) s`: swaps the two modes inside each block.
    pub const fn mode_swap() -> Self {
        Self::new([0.0, 1.0, 0.0, 0.0])
    }

    /// `s (x) I`: swaps the creation and annihilation blocks.
    pub const fn block_swap() -> Self {
        Self::new([0.0, 0.0, 1.0, 0.0])
    }

    /// Joint eigenvalues on the sign sectors `(s1, s2)` in the fixed order
    /// `(+,+), (+,-), (-,+), (-,-)`; the eigenvalue is `v1 + v2*s2 + v3*s1 + v4*s1*s2`.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let [v1, v2, v3, v4] = self.coeffs;
        [
            v1 + v2 + v3 + v4,
            v1 - v2 + v3 - v4,
            v1 + v2 - v3 - v4,
            v1 - v2 - v3 + v4,
        ]
    }

    /// Inverse of `eigenvalues`; the transform is its own inverse up to the 1/4.
    pub fn from_eigenvalues(ev: [f64; 4]) -> Self {
        let [a, b, c, d] = ev;
        Self::new([
            0.25 * (a + b + c + d),
            0.25 * (a - b + c - d),
            0.25 * (a + b - c - d),
            0.25 * (a - b - c + d),
        ])
    }

    pub fn det(&self) -> f64 {
        self.eigenvalues().iter().product()
    }

    pub fn inverse(&self) -> Result<Self> {
        let ev = self.eigenvalues();
        for &e in &ev {
            if e.abs() < SINGULAR_TOL {
                return Err(CvError::SingularMatrix {
                    eigenvalue: e,
                    tolerance: SINGULAR_TOL,
                });
            }
        }
        Ok(Self::from_eigenvalues(ev.map(|e| 1.0 / e)))
    }

    /// Conjugation by `diag(1,1,-1,-1)`, the sign flip of the annihilation block:
    /// negates the two block-swapping coefficients.
    pub fn conj_block_signs(&self) -> Self {
        let [v1, v2, v3, v4] = self.coeffs;
        Self::new([v1, v2, -v3, -v4])
    }

    /// Conjugation by the realignment permutation (exchange of basis slots 2 and 3):
    /// swaps the two middle coefficients.
    pub fn conj_realign(&self) -> Self {
        let [v1, v2, v3, v4] = self.coeffs;
        Self::new([v1, v3, v2, v4])
    }

    /// Conjugation by the sign-dressed realignment permutation: `{v1, -v3, -v2, v4}`.
    pub fn conj_realign_signed(&self) -> Self {
        self.conj_block_signs().conj_realign().conj_block_signs()
    }

    pub fn to_dense(&self) -> [[f64; 4]; 4] {
        let [v1, v2, v3, v4] = self.coeffs;
        // Row i of each generator: I, I(x)s, s(x)I, s(x)s.
        [
            [v1, v2, v3, v4],
            [v2, v1, v4, v3],
            [v3, v4, v1, v2],
            [v4, v3, v2, v1],
        ]
    }

    /// Matrix-vector product against a dense length-4 vector.
    pub fn apply(&self, x: [f64; 4]) -> [f64; 4] {
        let m = self.to_dense();
        let mut y = [0.0; 4];
        for i in 0..4 {
            y[i] = (0..4).map(|j| m[i][j] * x[j]).sum();
        }
        y
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.map(|v| v * s))
    }
}

impl std::ops::Add for SigmaBasisMatrix {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.coeffs;
        for i in 0..4 {
            c[i] += rhs.coeffs[i];
        }
        Self::new(c)
    }
}

impl std::ops::Sub for SigmaBasisMatrix {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut c = self.coeffs;
        for i in 0..4 {
            c[i] -= rhs.coeffs[i];
        }
        Self::new(c)
    }
}

impl std::ops::Neg for SigmaBasisMatrix {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl std::ops::Mul for SigmaBasisMatrix {
    type Output = Self;
    // Convolution over the Klein four-group indexing {1,2,3,4} ~ {(0,0),(0,1),(1,0),(1,1)}.
    fn mul(self, rhs: Self) -> Self {
        let u = self.coeffs;
        let v = rhs.coeffs;
        Self::new([
            u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3],
            u[0] * v[1] + u[1] * v[0] + u[2] * v[3] + u[3] * v[2],
            u[0] * v[2] + u[2] * v[0] + u[1] * v[3] + u[3] * v[1],
            u[0] * v[3] + u[3] * v[0] + u[1] * v[2] + u[2] * v[1],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dense_mul(a: [[f64; 4]; 4], b: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    #[test]
    fn generators_square_to_identity() {
        for g in [
            SigmaBasisMatrix::mode_swap(),
            SigmaBasisMatrix::block_swap(),
            SigmaBasisMatrix::new([0.0, 0.0, 0.0, 1.0]),
        ] {
            assert_eq!(g * g, SigmaBasisMatrix::identity());
        }
    }

    #[test]
    fn product_matches_dense_product() {
        let a = SigmaBasisMatrix::new([0.3, -1.2, 0.7, 2.1]);
        let b = SigmaBasisMatrix::new([1.1, 0.4, -0.9, 0.05]);
        let coeff = (a * b).to_dense();
        let dense = dense_mul(a.to_dense(), b.to_dense());
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(coeff[i][j], dense[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalue_transform_round_trips() {
        let a = SigmaBasisMatrix::new([0.0, -0.6667, 1.3333, 0.0]);
        assert_eq!(SigmaBasisMatrix::from_eigenvalues(a.eigenvalues()), a);
    }

    #[test]
    fn inverse_against_explicit_eigenvalues() {
        // {0, c1, b, 0} has eigenvalues b + c1, b - c1, -b + c1, -b - c1.
        let a = SigmaBasisMatrix::new([0.0, -2.0 / 3.0, 4.0 / 3.0, 0.0]);
        let ev = a.eigenvalues();
        assert_abs_diff_eq!(ev[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[1], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[2], -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[3], -2.0 / 3.0, epsilon = 1e-15);
        let inv = a.inverse().unwrap();
        assert_eq!(inv * a, a * inv);
        let id = (inv * a).coeffs;
        assert_abs_diff_eq!(id[0], 1.0, epsilon = 1e-12);
        for k in 1..4 {
            assert_abs_diff_eq!(id[k], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_inverse_reports_offending_eigenvalue() {
        let a = SigmaBasisMatrix::new([0.5, 0.5, 0.5, 0.5]); // eigenvalue 0 on three sectors
        match a.inverse() {
            Err(CvError::SingularMatrix { eigenvalue, .. }) => {
                assert!(eigenvalue.abs() < SINGULAR_TOL)
            }
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn block_sign_conjugation_matches_dense() {
        let a = SigmaBasisMatrix::new([0.2, -0.8, 1.4, 0.3]);
        let d = [1.0, 1.0, -1.0, -1.0];
        let dense = a.to_dense();
        let mut conj = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                conj[i][j] = d[i] * dense[i][j] * d[j];
            }
        }
        let got = a.conj_block_signs().to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(got[i][j], conj[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn realign_conjugations_match_dense_permutation() {
        // The permutation fixes slots 1 and 4 and exchanges slots 2 and 3.
        let perm = [0usize, 2, 1, 3];
        let a = SigmaBasisMatrix::new([0.15, -0.4, 0.9, 0.65]);
        let dense = a.to_dense();
        let mut plain = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                plain[i][j] = dense[perm[i]][perm[j]];
            }
        }
        let got = a.conj_realign().to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(got[i][j], plain[i][j], epsilon = 1e-15);
            }
        }
        // Sign-dressed variant: conjugate by diag * perm * diag.
        let d = [1.0, 1.0, -1.0, -1.0];
        let mut signed = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                // (D P D) A (D P D) with P the permutation above
                let (pi, pj) = (perm[i], perm[j]);
                signed[i][j] = d[i] * d[pi] * dense[pi][pj] * d[pj] * d[j];
            }
        }
        let got_signed = a.conj_realign_signed().to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(got_signed[i][j], signed[i][j], epsilon = 1e-15);
            }
        }
        assert_eq!(a.conj_realign_signed().coeffs, [0.15, -0.9, 0.4, 0.65]);
    }

    proptest! {
        #[test]
        fn algebra_is_commutative(a in proptest::array::uniform4(-3.0f64..3.0),
                                  b in proptest::array::uniform4(-3.0f64..3.0)) {
            let (a, b) = (SigmaBasisMatrix::new(a), SigmaBasisMatrix::new(b));
            let (ab, ba) = (a * b, b * a);
            for k in 0..4 {
                prop_assert!((ab.coeffs[k] - ba.coeffs[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn inverse_round_trips(v in proptest::array::uniform4(-2.0f64..2.0)) {
            let a = SigmaBasisMatrix::new(v);
            prop_assume!(a.eigenvalues().iter().all(|e| e.abs() > 1e-3));
            let inv = a.inverse().unwrap();
            let back = inv.inverse().unwrap();
            for k in 0..4 {
                prop_assert!((back.coeffs[k] - a.coeffs[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn det_matches_eigenvalue_product(v in proptest::array::uniform4(-2.0f64..2.0)) {
            let a = SigmaBasisMatrix::new(v);
            // Dense determinant via the eigen route is definitional here; cross-check
            // against cofactor expansion of the dense form.
            let m = a.to_dense();
            let det3 = |r: [[f64; 3]; 3]| {
                r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                    - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                    + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
            };
            let minor = |skip: usize| {
                let mut r = [[0.0; 3]; 3];
                for (ri, i) in (1..4).enumerate() {
                    let mut cj = 0;
                    for j in 0..4 {
                        if j == skip { continue; }
                        r[ri][cj] = m[i][j];
                        cj += 1;
                    }
                }
                r
            };
            let dense_det: f64 = (0..4)
                .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * m[0][j] * det3(minor(j)))
                .sum();
            prop_assert!((a.det() - dense_det).abs() < 1e-9 * (1.0 + dense_det.abs()));
        }
    }
}
