//! Symmetric two-mode states described by their complex covariance matrix (CCM)
//! and the physicality / positive-partial-transpose tests on them.
//!
//! A symmetric state is fixed by three real numbers: `b0` (mean occupation per mode
//! plus one half), `c1` (two-mode squeezing correlation) and `c2` (beam-splitter
//! correlation). Sign convention: these are the coefficients consumed by the Fock
//! generating formula, under which the emitted matrix carries `<a1 a2> = -c1` and
//! `<a1+ a2> = +c2`; all criteria are invariant under the joint sign flip of
//! `(c1, c2)`, so verdicts never depend on the choice.

use crate::error::{CvError, Result};
use crate::sigma::SigmaBasisMatrix;

/// Tolerance used by the physicality and partial-transpose tests: a state is
/// accepted when its smallest symplectic eigenvalue exceeds `1/2 - PHYSICALITY_TOL`.
pub const PHYSICALITY_TOL: f64 = 1e-12;

/// Covariance data of a symmetric two-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricCcm {
    /// Mean occupation per mode plus one half; `b0 >= 1/2` for any state.
    pub b0: f64,
    /// Creation-creation cross correlation coefficient.
    pub c1: f64,
    /// Creation-annihilation cross correlation coefficient.
    pub c2: f64,
}

impl SymmetricCcm {
    pub fn new(b0: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(b0.is_finite() && c1.is_finite() && c2.is_finite()) {
            return Err(CvError::DomainError("non-finite covariance entry".into()));
        }
        if b0 < 0.5 {
            return Err(CvError::DomainError(format!(
                "b0 = {b0} below the vacuum floor 1/2"
            )));
        }
        Ok(Self { b0, c1, c2 })
    }

    pub fn vacuum() -> Self {
        Self { b0: 0.5, c1: 0.0, c2: 0.0 }
    }

    /// Thermal product state with mean occupation `b0 - 1/2` per mode.
    pub fn thermal(b0: f64) -> Result<Self> {
        Self::new(b0, 0.0, 0.0)
    }

    /// Two-mode squeezed vacuum with squeeze parameter `0 <= lambda < 1`.
    pub fn two_mode_squeezed(lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(CvError::DomainError(format!(
                "squeeze parameter {lambda} outside [0, 1)"
            )));
        }
        let den = 1.0 - lambda * lambda;
        Ok(Self {
            b0: (1.0 + lambda * lambda) / (2.0 * den),
            c1: -lambda / den,
            c2: 0.0,
        })
    }

    /// The kernel with both cross correlations negated; evaluating any
    /// criterion on it is what appending the parity operator amounts to.
    pub fn parity_flipped(&self) -> Self {
        Self { b0: self.b0, c1: -self.c1, c2: -self.c2 }
    }

    /// `gamma = {0, c1, b0, c2}` in the swap-basis coefficients.
    pub fn gamma(&self) -> SigmaBasisMatrix {
        SigmaBasisMatrix::new([0.0, self.c1, self.b0, self.c2])
    }

    /// `gamma' = gamma + (1/2) s(x)I`, the object every inverse formula acts on.
    pub fn gamma_prime(&self) -> SigmaBasisMatrix {
        SigmaBasisMatrix::new([0.0, self.c1, self.b0 + 0.5, self.c2])
    }

    /// Coefficients of `inverse(gamma')` in closed form.
    ///
    /// With `b = b0 + 1/2` and `D = det gamma'`:
    /// `K1 = 2 b c1 c2 / D`, `K2 = c1 (c1^2 - c2^2 - b^2) / D`,
    /// `K3 = b (b^2 - c1^2 - c2^2) / D`, `K4 = c2 (c2^2 - c1^2 - b^2) / D`.
    pub fn k_coefficients(&self) -> Result<[f64; 4]> {
        let b = self.b0 + 0.5;
        let (c1, c2) = (self.c1, self.c2);
        let det = self.gamma_prime().det();
        if det.abs() < 1e-12 {
            return Err(CvError::SingularMatrix { eigenvalue: det, tolerance: 1e-12 });
        }
        Ok([
            2.0 * b * c1 * c2 / det,
            c1 * (c1 * c1 - c2 * c2 - b * b) / det,
            b * (b * b - c1 * c1 - c2 * c2) / det,
            c2 * (c2 * c2 - c1 * c1 - b * b) / det,
        ])
    }

    /// `beta = conj(inverse(gamma'))` under the block-sign conjugation; the kernel
    /// of the Fock generating formula.
    pub fn beta(&self) -> Result<SigmaBasisMatrix> {
        Ok(SigmaBasisMatrix::new(self.k_coefficients()?).conj_block_signs())
    }

    /// Quadrature couplings `(k_x, k_p) = (c1 + c2, c2 - c1)`.
    pub fn quadrature_couplings(&self) -> (f64, f64) {
        (self.c1 + self.c2, self.c2 - self.c1)
    }

    /// Squared symplectic eigenvalues `(nu_min^2, nu_max^2)` of the quadrature
    /// covariance matrix. Negative products are reported as-is so callers can
    /// reject unphysical parameter sets.
    pub fn symplectic_eigenvalues_squared(&self) -> (f64, f64) {
        let (kx, kp) = self.quadrature_couplings();
        let p1 = (self.b0 + kx) * (self.b0 + kp);
        let p2 = (self.b0 - kx) * (self.b0 - kp);
        (p1.min(p2), p1.max(p2))
    }

    /// Uncertainty-principle test: the state is physical iff the quadrature
    /// blocks are positive and `nu_min >= 1/2`.
    pub fn is_physical(&self) -> bool {
        let (kx, kp) = self.quadrature_couplings();
        if self.b0 < kx.abs() || self.b0 < kp.abs() {
            return false;
        }
        let (nu2, _) = self.symplectic_eigenvalues_squared();
        nu2 >= 0.25 - PHYSICALITY_TOL
    }

    /// Positive-partial-transpose test: transposing one mode flips `k_p`; the
    /// state stays PPT (hence separable for 1x1-mode Gaussians) iff the flipped
    /// `nu_min` still clears `1/2`.
    pub fn is_ppt(&self) -> bool {
        let (kx, kp) = self.quadrature_couplings();
        let p1 = (self.b0 + kx) * (self.b0 - kp);
        let p2 = (self.b0 - kx) * (self.b0 + kp);
        p1.min(p2) >= 0.25 - PHYSICALITY_TOL
    }
}

/// Physicality of a general swap-basis covariance matrix `{g1, g2, g3, g4}`,
/// allowing a nonzero identity component (realigned CCMs need this). The
/// quadrature blocks are `X = (g1+g3) I + (g2+g4) s` and `P = (g3-g1) I + (g4-g2) s`,
/// and the symplectic eigenvalues pair equal sign sectors of X and P.
pub fn sigma_ccm_is_physical(g: &SigmaBasisMatrix) -> bool {
    let [g1, g2, g3, g4] = g.coeffs;
    let x = [g1 + g3 + g2 + g4, g1 + g3 - g2 - g4];
    let p = [g3 - g1 + g4 - g2, g3 - g1 - g4 + g2];
    if x.iter().chain(&p).any(|&e| e < -PHYSICALITY_TOL) {
        return false;
    }
    let nu2 = (x[0] * p[0]).min(x[1] * p[1]);
    nu2 >= 0.25 - PHYSICALITY_TOL
}

/// Covariance data of a two-mode Gaussian state in standard form whose mode
/// occupations differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonsymmetricCcm {
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl NonsymmetricCcm {
    pub fn new(b1: f64, b2: f64, c1: f64, c2: f64) -> Result<Self> {
        if b1 < 0.5 || b2 < 0.5 {
            return Err(CvError::DomainError(format!(
                "mode occupation floor violated: b1 = {b1}, b2 = {b2}"
            )));
        }
        Ok(Self { b1, b2, c1, c2 })
    }

    /// Geometric-mean occupation used by the symmetric-form criterion.
    pub fn symmetrized_b0(&self) -> f64 {
        (self.b1 * self.b2).sqrt()
    }

    /// Dense `gamma'` for the Fock oracle; not expressible in the swap basis.
    pub fn gamma_prime_dense(&self) -> [[f64; 4]; 4] {
        let b1 = self.b1 + 0.5;
        let b2 = self.b2 + 0.5;
        let (c1, c2) = (self.c1, self.c2);
        [
            [0.0, c1, b1, c2],
            [c1, 0.0, c2, b2],
            [b1, c2, 0.0, c1],
            [c2, b2, c1, 0.0],
        ]
    }

    pub fn is_physical(&self) -> bool {
        // X and P quadrature blocks differ only in the sign of the coupling.
        let k = self.c1 + self.c2;
        let kp = self.c2 - self.c1;
        let x = [[self.b1, k], [k, self.b2]];
        let p = [[self.b1, kp], [kp, self.b2]];
        if self.b1 <= 0.0 || x[0][0] * x[1][1] - x[0][1] * x[1][0] < 0.0 {
            return false;
        }
        // Symplectic eigenvalues are sqrt of the eigenvalues of X*P.
        let m = [
            [
                x[0][0] * p[0][0] + x[0][1] * p[1][0],
                x[0][0] * p[0][1] + x[0][1] * p[1][1],
            ],
            [
                x[1][0] * p[0][0] + x[1][1] * p[1][0],
                x[1][0] * p[0][1] + x[1][1] * p[1][1],
            ],
        ];
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let nu2_min = 0.5 * (tr - disc);
        nu2_min >= 0.25 - PHYSICALITY_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_prime_known_cases() {
        assert_eq!(
            SymmetricCcm::vacuum().gamma_prime().coeffs,
            [0.0, 0.0, 1.0, 0.0]
        );
        let tmsv = SymmetricCcm::two_mode_squeezed(0.5).unwrap();
        assert_abs_diff_eq!(tmsv.b0, 5.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tmsv.c1, -2.0 / 3.0, epsilon = 1e-15);
        let gp = tmsv.gamma_prime().coeffs;
        assert_abs_diff_eq!(gp[1], -2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gp[2], 4.0 / 3.0, epsilon = 1e-15);
        let sep = SymmetricCcm::new(1.5, 0.5, 0.1).unwrap();
        assert_eq!(sep.gamma_prime().coeffs, [0.0, 0.5, 2.0, 0.1]);
    }

    #[test]
    fn b0_floor_is_enforced() {
        assert!(matches!(
            SymmetricCcm::new(0.3, 0.0, 0.0),
            Err(CvError::DomainError(_))
        ));
    }

    #[test]
    fn k_coefficients_invert_gamma_prime() {
        for ccm in [
            SymmetricCcm::vacuum(),
            SymmetricCcm::two_mode_squeezed(0.5).unwrap(),
            SymmetricCcm::new(1.2, 0.3, 0.4).unwrap(),
            SymmetricCcm::new(0.9, -0.35, -0.2).unwrap(),
        ] {
            let k = SigmaBasisMatrix::new(ccm.k_coefficients().unwrap());
            let prod = (k * ccm.gamma_prime()).coeffs;
            assert_abs_diff_eq!(prod[0], 1.0, epsilon = 1e-12);
            for i in 1..4 {
                assert_abs_diff_eq!(prod[i], 0.0, epsilon = 1e-12);
            }
            // and match the generic eigenvalue-route inverse
            let inv = ccm.gamma_prime().inverse().unwrap();
            for i in 0..4 {
                assert_abs_diff_eq!(k.coeffs[i], inv.coeffs[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tmsv_k_and_beta_closed_forms() {
        // For the two-mode squeezed vacuum the kernel collapses to {0, lambda, 0, 0}.
        let l = 0.5;
        let tmsv = SymmetricCcm::two_mode_squeezed(l).unwrap();
        let k = tmsv.k_coefficients().unwrap();
        assert_abs_diff_eq!(k[1], 0.5, epsilon = 1e-12); // -c1 (b^2-c1^2)^-1 = lambda
        assert_abs_diff_eq!(k[2], 1.0, epsilon = 1e-12);
        let beta = tmsv.beta().unwrap();
        let a = SigmaBasisMatrix::block_swap() + beta;
        assert_abs_diff_eq!(a.coeffs[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.coeffs[1], l, epsilon = 1e-12);
        assert_abs_diff_eq!(a.coeffs[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.coeffs[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vacuum_beta_cancels_block_swap() {
        let beta = SymmetricCcm::vacuum().beta().unwrap();
        assert_eq!(beta.coeffs, [0.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn physicality_known_cases() {
        assert!(SymmetricCcm::vacuum().is_physical());
        // Pure two-mode squeezed states sit exactly on the nu_min = 1/2 boundary.
        let tmsv = SymmetricCcm::two_mode_squeezed(0.7).unwrap();
        let (nu2, _) = tmsv.symplectic_eigenvalues_squared();
        assert_abs_diff_eq!(nu2, 0.25, epsilon = 1e-12);
        assert!(tmsv.is_physical());
        assert!(!SymmetricCcm::new(0.6, 0.5, 0.0).unwrap().is_physical());
        assert!(SymmetricCcm::new(1.5, 0.5, 0.1).unwrap().is_physical());
    }

    #[test]
    fn ppt_known_cases() {
        assert!(SymmetricCcm::vacuum().is_ppt());
        assert!(!SymmetricCcm::two_mode_squeezed(0.5).unwrap().is_ppt());
        assert!(SymmetricCcm::new(1.5, 0.5, 0.1).unwrap().is_ppt());
    }

    #[test]
    fn general_sigma_physicality_agrees_on_symmetric_states() {
        for (b0, c1, c2) in [
            (0.5, 0.0, 0.0),
            (5.0 / 6.0, -2.0 / 3.0, 0.0),
            (1.5, 0.5, 0.1),
            (0.6, 0.5, 0.0),
            (1.0, 0.2, -0.3),
        ] {
            let ccm = SymmetricCcm { b0, c1, c2 };
            let g = ccm.gamma();
            assert_eq!(sigma_ccm_is_physical(&g), ccm.is_physical(), "({b0},{c1},{c2})");
        }
    }

    #[test]
    fn nonsymmetric_physicality_and_reduction() {
        let ns = NonsymmetricCcm::new(0.9, 0.8, -0.6, 0.0).unwrap();
        assert!(ns.is_physical());
        assert_abs_diff_eq!(ns.symmetrized_b0(), 0.72f64.sqrt(), epsilon = 1e-15);
        //
        let sym = NonsymmetricCcm::new(1.5, 1.5, 0.5, 0.1).unwrap();
        let ccm = SymmetricCcm::new(1.5, 0.5, 0.1).unwrap();
        assert_eq!(sym.is_physical(), ccm.is_physical());
    }

    proptest! {
        #[test]
        fn physical_states_have_positive_branch_products(
            b0 in 0.5f64..3.0, c1 in -2.0f64..2.0, c2 in -1.0f64..1.0
        ) {
            let ccm = SymmetricCcm { b0, c1, c2 };
            prop_assume!(ccm.is_physical());
            // Both criterion denominators are nonnegative for physical states.
            prop_assert!((b0 + c1).powi(2) - c2 * c2 >= -1e-9);
            prop_assert!((b0 - c1).powi(2) - c2 * c2 >= -1e-9);
        }
    }
}
