//! Brute-force ground truth in a truncated Fock basis: density tensors for
//! every state family, photon operations and loss as explicit index algebra,
//! realignment as an index permutation, trace norms by dense SVD.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, SVD, UPLO};

use crate::ccm::SymmetricCcm;
use crate::channel::{evolve_ccm, param_evolution_matrix, ChannelParams};
use crate::error::{CvError, Result};
use crate::moments::{param, QuadraticExponent, PARAM_DIM};
use crate::photon::{p_form, photon_derivative_spec, PhotonSign};
use crate::sigma::SigmaBasisMatrix;

/// Upper bound on the number of stored coefficients or tensor entries.
pub const CAPACITY_GUARD: u64 = 100_000_000;
/// Diagonal probability allowed in the shells a photon operation truncates.
pub const OUTER_SHELL_TOL: f64 = 1e-9;
/// Below this pre-normalization trace a constructed state is considered
/// annihilated rather than merely leaky.
const DEGENERATE_TRACE_TOL: f64 = 1e-12;

/// Cutoff pairs this far apart must agree before a norm is accepted.
pub const CONVERGENCE_STEP: usize = 8;
pub const CONVERGENCE_TOL: f64 = 1e-7;
pub const MAX_CUTOFF: usize = 48;

fn ln_factorial_table(n_max: usize) -> Vec<f64> {
    let mut t = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        t[n] = t[n - 1] + (n as f64).ln();
    }
    t
}

/// Taylor coefficients of `exp(q)` on a rectangular grid of orders, the
/// constant `c0` excluded.
#[derive(Debug, Clone)]
pub struct CoefficientTensor {
    caps: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<f64>,
}

impl CoefficientTensor {
    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.caps.len());
        let flat: usize = idx.iter().zip(&self.strides).map(|(&k, &s)| k * s).sum();
        self.data[flat]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
}

/// Coefficient of `prod x_i^{k_i}` in `exp(1/2 x A x^T + L x)` for every
/// multi-index within `caps`, by the derivative recurrence
/// `k_i c_k = L_i c_{k - e_i} + sum_j A_ij c_{k - e_i - e_j}`.
pub fn taylor_coeffs(q: &QuadraticExponent, caps: &[usize]) -> Result<CoefficientTensor> {
    let n = q.dim();
    if caps.len() != n {
        return Err(CvError::DomainError(format!(
            "{} caps supplied for a {n}-variable exponent",
            caps.len()
        )));
    }
    let mut total: u64 = 1;
    for &c in caps {
        total = total.saturating_mul(c as u64 + 1);
        if total > CAPACITY_GUARD {
            return Err(CvError::CapacityExceeded { required: total, guard: CAPACITY_GUARD });
        }
    }
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * (caps[i + 1] + 1);
    }
    let mut data = vec![0.0; total as usize];
    data[0] = 1.0;
    let mut idx = vec![0usize; n];
    for flat in 1..total as usize {
        // odometer increment keeps idx in step with flat
        for d in (0..n).rev() {
            if idx[d] < caps[d] {
                idx[d] += 1;
                break;
            }
            idx[d] = 0;
        }
        let i = idx.iter().position(|&k| k > 0).unwrap();
        let base = flat - strides[i];
        let mut acc = q.l(i) * data[base];
        for j in 0..n {
            let remaining = idx[j] - usize::from(j == i);
            if remaining >= 1 {
                acc += q.a(i, j) * data[base - strides[j]];
            }
        }
        data[flat] = acc / idx[i] as f64;
    }
    Ok(CoefficientTensor { caps: caps.to_vec(), strides, data })
}

/// Two-mode density matrix truncated at `cutoff` photons per mode, stored as
/// the real 4-index array `t[k1, k2, m1, m2]` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FockTensor {
    cutoff: usize,
    data: Vec<f64>,
}

impl FockTensor {
    pub fn zero(cutoff: usize) -> Result<Self> {
        let d = cutoff as u64 + 1;
        let total = d * d * d * d;
        if total > CAPACITY_GUARD {
            return Err(CvError::CapacityExceeded { required: total, guard: CAPACITY_GUARD });
        }
        Ok(Self { cutoff, data: vec![0.0; total as usize] })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn dim(&self) -> usize {
        self.cutoff + 1
    }

    #[inline]
    fn at(&self, k1: usize, k2: usize, m1: usize, m2: usize) -> usize {
        let d = self.dim();
        ((k1 * d + k2) * d + m1) * d + m2
    }

    pub fn get(&self, k1: usize, k2: usize, m1: usize, m2: usize) -> f64 {
        self.data[self.at(k1, k2, m1, m2)]
    }

    pub fn set(&mut self, k1: usize, k2: usize, m1: usize, m2: usize, v: f64) {
        let i = self.at(k1, k2, m1, m2);
        self.data[i] = v;
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        let mut t = 0.0;
        for a in 0..d {
            for b in 0..d {
                t += self.get(a, b, a, b);
            }
        }
        t
    }

    /// Scale to unit trace; returns the trace that was there.
    pub fn renormalize(&mut self) -> Result<f64> {
        let t = self.trace();
        if !(t.is_finite() && t.abs() > DEGENERATE_TRACE_TOL) {
            return Err(CvError::DegenerateState(format!(
                "tensor trace {t:.3e} cannot be normalized"
            )));
        }
        for v in &mut self.data {
            *v /= t;
        }
        Ok(t)
    }

    /// Largest deviation from symmetry of the flattened (k-block, m-block)
    /// matrix; real tensors make hermiticity a plain transpose check.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for k1 in 0..d {
            for k2 in 0..d {
                for m1 in 0..d {
                    for m2 in 0..d {
                        let diff = self.get(k1, k2, m1, m2) - self.get(m1, m2, k1, k2);
                        worst = worst.max(diff.abs());
                    }
                }
            }
        }
        worst
    }

    /// Smallest eigenvalue of the flattened density matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d2 = self.dim() * self.dim();
        let m = Array2::from_shape_vec((d2, d2), self.data.clone())
            .expect("flattened tensor has d^2 x d^2 elements");
        let vals: Array1<f64> = m
            .eigvalsh(UPLO::Lower)
            .map_err(|e| CvError::DomainError(format!("eigenvalue computation failed: {e}")))?;
        Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Mean photon number of each mode.
    pub fn occupations(&self) -> [f64; 2] {
        let d = self.dim();
        let mut n1 = 0.0;
        let mut n2 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let p = self.get(a, b, a, b);
                n1 += a as f64 * p;
                n2 += b as f64 * p;
            }
        }
        [n1, n2]
    }

    /// Second moments read back off the tensor, in the same convention the
    /// Gaussian builder uses: `c1 = -<a1 a2>`, `c2 = +<a1^dag a2>`.
    pub fn extract_ccm(&self) -> SymmetricCcm {
        let d = self.dim();
        let [n1, n2] = self.occupations();
        let mut a1a2 = 0.0;
        for k1 in 1..d {
            for k2 in 1..d {
                a1a2 += ((k1 * k2) as f64).sqrt() * self.get(k1, k2, k1 - 1, k2 - 1);
            }
        }
        let mut a1d_a2 = 0.0;
        for k1 in 0..d - 1 {
            for k2 in 1..d {
                a1d_a2 += (((k1 + 1) * k2) as f64).sqrt() * self.get(k1, k2, k1 + 1, k2 - 1);
            }
        }
        SymmetricCcm { b0: 0.5 * (n1 + n2) + 0.5, c1: -a1a2, c2: a1d_a2 }
    }

    /// Realigned matrix: row `(k1, m1)`, column `(k2, m2)`.
    pub fn realigned(&self) -> Array2<f64> {
        let d = self.dim();
        Array2::from_shape_fn((d * d, d * d), |(r, c)| {
            self.get(r / d, c / d, r % d, c % d)
        })
    }

    /// Trace of the realigned matrix, the cheap lower bound on its trace norm.
    pub fn realigned_trace(&self) -> f64 {
        let d = self.dim();
        let mut t = 0.0;
        for a in 0..d {
            for b in 0..d {
                t += self.get(a, a, b, b);
            }
        }
        t
    }

    /// Serialize as magic, version, cutoff, then row-major little-endian f64.
    pub fn write_cvro<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"CVRO")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.cutoff as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cvro<R: Read>(r: &mut R) -> Result<Self> {
        let io_err = |e: std::io::Error| CvError::DomainError(format!("tensor dump read: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != b"CVRO" {
            return Err(CvError::DomainError(format!("bad tensor dump magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(io_err)?;
        let version = u32::from_le_bytes(word);
        if version != 1 {
            return Err(CvError::DomainError(format!("unsupported dump version {version}")));
        }
        r.read_exact(&mut word).map_err(io_err)?;
        let cutoff = u32::from_le_bytes(word) as usize;
        let mut out = Self::zero(cutoff)?;
        let mut buf = [0u8; 8];
        for v in &mut out.data {
            r.read_exact(&mut buf).map_err(io_err)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(out)
    }
}

/// Gaussian state elements from the generating exponent with quadratic matrix
/// `sigma1 (x) I + beta`:
/// `rho_k = sqrt(prod k_i!) * coeff_k / sqrt(det gamma')`.
pub fn gaussian_fock(ccm: &SymmetricCcm, cutoff: usize) -> Result<FockTensor> {
    if !ccm.is_physical() {
        return Err(CvError::DomainError(format!(
            "kernel (b0, c1, c2) = ({}, {}, {}) violates the uncertainty relation",
            ccm.b0, ccm.c1, ccm.c2
        )));
    }
    let a = SigmaBasisMatrix::block_swap() + ccm.beta()?;
    let q = QuadraticExponent::from_dense4(a.to_dense(), [0.0; 4], 0.0)?;
    let coeffs = taylor_coeffs(&q, &[cutoff; 4])?;
    let inv_sqrt_det = 1.0 / ccm.gamma_prime().det().sqrt();
    let lnf = ln_factorial_table(cutoff);
    let mut out = FockTensor::zero(cutoff)?;
    let d = cutoff + 1;
    let mut flat = 0usize;
    for k1 in 0..d {
        for k2 in 0..d {
            for m1 in 0..d {
                for m2 in 0..d {
                    let scale = (0.5 * (lnf[k1] + lnf[k2] + lnf[m1] + lnf[m2])).exp();
                    out.data[flat] = coeffs.data[flat] * scale * inv_sqrt_det;
                    flat += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Independent builder for the two-mode squeezed vacuum from its Schmidt
/// form: `t[n, n, m, m] = (1 - lambda^2) lambda^{n + m}`.
pub fn tmsv_fock(lambda: f64, cutoff: usize) -> Result<FockTensor> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(CvError::DomainError(format!(
            "squeeze parameter {lambda} outside [0, 1)"
        )));
    }
    let mut out = FockTensor::zero(cutoff)?;
    for n in 0..=cutoff {
        for m in 0..=cutoff {
            out.set(n, n, m, m, (1.0 - lambda * lambda) * lambda.powi((n + m) as i32));
        }
    }
    Ok(out)
}

/// A photon-operated tensor along with the trace it had before
/// renormalization, which should reproduce the analytic normalization.
#[derive(Debug, Clone)]
pub struct PhotonOpsOutcome {
    pub tensor: FockTensor,
    pub pre_norm_trace: f64,
}

/// `m`-fold photon subtraction or addition on both modes, renormalized.
pub fn apply_photon_ops(f: &FockTensor, sign: PhotonSign, m: u32) -> Result<PhotonOpsOutcome> {
    let m = m as usize;
    let n = f.cutoff();
    if n < m + 2 {
        return Err(CvError::CutoffTooSmall {
            cutoff: n,
            reason: format!("{m}-photon operations need cutoff at least {}", m + 2),
        });
    }
    let mut shell_mass = 0.0;
    for k1 in 0..=n {
        for k2 in 0..=n {
            if k1.max(k2) > n - m {
                shell_mass += f.get(k1, k2, k1, k2);
            }
        }
    }
    if shell_mass.abs() > OUTER_SHELL_TOL {
        return Err(CvError::CutoffTooSmall {
            cutoff: n,
            reason: format!(
                "outermost {m} shells hold diagonal probability {shell_mass:.3e}"
            ),
        });
    }
    let mut out = FockTensor::zero(n)?;
    // per-index weights: rising factors for subtraction, falling for addition
    let weight: Vec<f64> = (0..=n)
        .map(|k| match sign {
            PhotonSign::Subtract => (1..=m).map(|r| (k + r) as f64).product::<f64>().sqrt(),
            PhotonSign::Add => {
                if k < m {
                    0.0
                } else {
                    (0..m).map(|r| (k - r) as f64).product::<f64>().sqrt()
                }
            }
        })
        .collect();
    for k1 in 0..=n {
        for k2 in 0..=n {
            for m1 in 0..=n {
                for m2 in 0..=n {
                    let w = weight[k1] * weight[k2] * weight[m1] * weight[m2];
                    if w == 0.0 {
                        continue;
                    }
                    let v = match sign {
                        PhotonSign::Subtract => {
                            if k1 + m > n || k2 + m > n || m1 + m > n || m2 + m > n {
                                continue;
                            }
                            f.get(k1 + m, k2 + m, m1 + m, m2 + m)
                        }
                        PhotonSign::Add => f.get(k1 - m, k2 - m, m1 - m, m2 - m),
                    };
                    out.set(k1, k2, m1, m2, w * v);
                }
            }
        }
    }
    let pre_norm_trace = out.renormalize().map_err(|_| {
        CvError::DegenerateState(format!(
            "{m}-photon {sign:?} annihilated the state"
        ))
    })?;
    Ok(PhotonOpsOutcome { tensor: out, pre_norm_trace })
}

/// Damping with an empty environment, as an explicit per-mode Kraus sum
/// `<n-k| A_k |n> = sqrt(C(n,k)) eta^{(n-k)/2} (1-eta)^{k/2}`.
pub fn evolve_fock_pure_loss(f: &FockTensor, ch: &ChannelParams) -> Result<FockTensor> {
    if ch.nbar != 0.0 {
        return Err(CvError::DomainError(format!(
            "Kraus route only covers an empty environment, got nbar = {}",
            ch.nbar
        )));
    }
    let eta = ch.attenuation();
    let n = f.cutoff();
    let d = n + 1;
    let lnf = ln_factorial_table(n);
    // kraus[j][a] = <a| A_j |a+j>
    let kraus: Vec<Vec<f64>> = (0..=n)
        .map(|j| {
            (0..=n - j)
                .map(|a| {
                    let ln_binom = lnf[a + j] - lnf[a] - lnf[j];
                    (0.5 * ln_binom).exp()
                        * eta.powf(a as f64 / 2.0)
                        * (1.0 - eta).powf(j as f64 / 2.0)
                })
                .collect()
        })
        .collect();
    let apply_mode = |input: &FockTensor, row_stride: usize, col_stride: usize,
                      free1: usize, free2: usize|
     -> Result<FockTensor> {
        let mut out = FockTensor::zero(n)?;
        for j in 0..=n {
            for a in 0..=n - j {
                for b in 0..=n - j {
                    let w = kraus[j][a] * kraus[j][b];
                    let src = (a + j) * row_stride + (b + j) * col_stride;
                    let dst = a * row_stride + b * col_stride;
                    for u in 0..d {
                        let (s_u, d_u) = (src + u * free1, dst + u * free1);
                        for v in 0..d {
                            out.data[d_u + v * free2] += w * input.data[s_u + v * free2];
                        }
                    }
                }
            }
        }
        Ok(out)
    };
    let d3 = d * d * d;
    let d2 = d * d;
    // mode 1 lives on axes (k1, m1), mode 2 on (k2, m2)
    let after_mode1 = apply_mode(f, d3, d, d2, 1)?;
    apply_mode(&after_mode1, d2, 1, d3, d)
}

type SPoly = BTreeMap<[u16; 4], f64>;

/// Evolved photon-prepared state, built in one shot from the joint quadratic
/// exponent: parameter derivatives act on the generating-side quadratic while
/// the Fock indices come off the quadratic in the four auxiliary variables.
pub fn joint_quadratic_fock(
    ccm: &SymmetricCcm,
    sign: PhotonSign,
    m: u32,
    ch: &ChannelParams,
    cutoff: usize,
) -> Result<FockTensor> {
    let deriv = photon_derivative_spec(ccm, sign, m)?;
    let evolved = evolve_ccm(ccm, ch);
    let t_mat = param_evolution_matrix(ccm, ch)?;
    let beta_t = evolved.beta()?;
    let beta_t_dense = beta_t.to_dense();

    // quadratic in the four auxiliary variables
    let s_quad = QuadraticExponent::from_dense4(
        (SigmaBasisMatrix::block_swap() + beta_t).to_dense(),
        [0.0; 4],
        0.0,
    )?;
    let taylor_s = taylor_coeffs(&s_quad, &[cutoff; 4])?;

    // linear coupling row(alpha) of L(q) = beta_t (xi, eta)^T + (eta+eps, xi+zeta)^T,
    // then composed with the parameter evolution
    let w_slots = [param::XI1, param::XI2, param::ETA1, param::ETA2];
    let mut l_q = [[0.0f64; PARAM_DIM]; 4];
    for alpha in 0..4 {
        for (w_idx, &slot) in w_slots.iter().enumerate() {
            l_q[alpha][slot] += beta_t_dense[alpha][w_idx];
        }
    }
    l_q[0][param::ETA1] += 1.0;
    l_q[0][param::EPS1] += 1.0;
    l_q[1][param::ETA2] += 1.0;
    l_q[1][param::EPS2] += 1.0;
    l_q[2][param::XI1] += 1.0;
    l_q[2][param::ZETA1] += 1.0;
    l_q[3][param::XI2] += 1.0;
    l_q[3][param::ZETA2] += 1.0;
    let mut b = [[0.0f64; PARAM_DIM]; 4];
    for alpha in 0..4 {
        for i in 0..PARAM_DIM {
            b[alpha][i] = (0..PARAM_DIM)
                .map(|j| l_q[alpha][j] * t_mat[j * PARAM_DIM + i])
                .sum();
        }
    }

    // scalar prefactor of the evolved display, as a quadratic in the evolved
    // parameters: eta xi^T + 1/2 (xi, eta) beta_t (xi, eta)^T
    let mut w_sel = vec![0.0; 4 * PARAM_DIM];
    for (row, &slot) in w_slots.iter().enumerate() {
        w_sel[row * PARAM_DIM + slot] = 1.0;
    }
    let mut bilinear = vec![0.0; PARAM_DIM * PARAM_DIM];
    for (e, x) in [(param::ETA1, param::XI1), (param::ETA2, param::XI2)] {
        bilinear[e * PARAM_DIM + x] = 1.0;
        bilinear[x * PARAM_DIM + e] = 1.0;
    }
    let prefac_w = QuadraticExponent::from_dense4(beta_t_dense, [0.0; 4], 0.0)?
        .substitute_linear(&w_sel, PARAM_DIM)?
        .add(&QuadraticExponent::new(
            PARAM_DIM,
            bilinear,
            vec![0.0; PARAM_DIM],
            0.0,
        )?)?;

    // total parameter-side quadratic
    let q_p = p_form(&ccm.gamma_prime().conj_block_signs())?;
    let q_pt = p_form(&evolved.gamma_prime().conj_block_signs())?
        .substitute_linear(&t_mat, PARAM_DIM)?;
    let c_total = q_p
        .add(&q_pt.scale(-1.0))?
        .add(&prefac_w.substitute_linear(&t_mat, PARAM_DIM)?)?;

    // derivative polynomials G_mu in the auxiliary variables:
    // G_{nu + e_i} = (L_i + (sB)_i) G_nu + sum_j A_ij nu_j G_{nu - e_j}
    let d_orders: Vec<usize> = deriv.orders.iter().map(|&o| o as usize).collect();
    let mut mu_strides = [0usize; PARAM_DIM];
    {
        let mut acc = 1usize;
        for i in (0..PARAM_DIM).rev() {
            mu_strides[i] = acc;
            acc *= d_orders[i] + 1;
        }
    }
    let g_total: usize = d_orders.iter().map(|&o| o + 1).product();
    let mut g: Vec<SPoly> = Vec::with_capacity(g_total);
    let mut mu = [0usize; PARAM_DIM];
    for flat in 0..g_total {
        if flat == 0 {
            let mut unit = SPoly::new();
            unit.insert([0; 4], 1.0);
            g.push(unit);
            continue;
        }
        for dpos in (0..PARAM_DIM).rev() {
            if mu[dpos] < d_orders[dpos] {
                mu[dpos] += 1;
                break;
            }
            mu[dpos] = 0;
        }
        let i = mu.iter().position(|&o| o > 0).unwrap();
        let nu_flat = flat - mu_strides[i];
        let mut poly = SPoly::new();
        for (key, &coef) in &g[nu_flat] {
            let with_l = c_total.l(i) * coef;
            if with_l != 0.0 {
                *poly.entry(*key).or_insert(0.0) += with_l;
            }
            for alpha in 0..4 {
                let ba = b[alpha][i];
                if ba != 0.0 {
                    let mut shifted = *key;
                    shifted[alpha] += 1;
                    *poly.entry(shifted).or_insert(0.0) += ba * coef;
                }
            }
        }
        for j in 0..PARAM_DIM {
            let nu_j = mu[j] - usize::from(j == i);
            if nu_j >= 1 {
                let scale = c_total.a(i, j) * nu_j as f64;
                if scale != 0.0 {
                    for (key, &coef) in &g[nu_flat - mu_strides[j]] {
                        *poly.entry(*key).or_insert(0.0) += scale * coef;
                    }
                }
            }
        }
        g.push(poly);
    }
    let monomials: Vec<([usize; 4], f64)> = g
        .last()
        .unwrap()
        .iter()
        .filter(|(_, &c)| c != 0.0)
        .map(|(k, &c)| ([k[0] as usize, k[1] as usize, k[2] as usize, k[3] as usize], c))
        .collect();

    // assemble elements
    let det_t = evolved.gamma_prime().det();
    if det_t <= 0.0 {
        return Err(CvError::DomainError(format!(
            "evolved kernel determinant {det_t} not positive"
        )));
    }
    let norm = deriv.normalization / det_t.sqrt();
    let lnf = ln_factorial_table(cutoff);
    let d = cutoff + 1;
    let s_strides = [d * d * d, d * d, d, 1];
    let offsets: Vec<(usize, [usize; 4], f64)> = monomials
        .iter()
        .map(|&(v, c)| {
            let off: usize = (0..4).map(|a| v[a] * s_strides[a]).sum();
            (off, v, c)
        })
        .collect();
    let mut out = FockTensor::zero(cutoff)?;
    let mut flat = 0usize;
    for k1 in 0..d {
        for k2 in 0..d {
            for m1 in 0..d {
                for m2 in 0..d {
                    let mut acc = 0.0;
                    for &(off, v, c) in &offsets {
                        if v[0] <= k1 && v[1] <= k2 && v[2] <= m1 && v[3] <= m2 {
                            acc += c * taylor_s.data[flat - off];
                        }
                    }
                    let scale = (0.5 * (lnf[k1] + lnf[k2] + lnf[m1] + lnf[m2])).exp();
                    out.data[flat] = norm * scale * acc;
                    flat += 1;
                }
            }
        }
    }
    out.renormalize()?;
    Ok(out)
}

/// Trace norm of the realigned tensor together with its plain trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealignmentNorms {
    pub trace_norm: f64,
    pub realigned_trace: f64,
}

pub fn realign_and_trace_norm(f: &FockTensor) -> Result<RealignmentNorms> {
    let r = f.realigned();
    let (_, sv, _) = r
        .svd(false, false)
        .map_err(|e| CvError::DomainError(format!("singular value decomposition failed: {e}")))?;
    Ok(RealignmentNorms { trace_norm: sv.sum(), realigned_trace: f.realigned_trace() })
}

/// A trace norm accepted only after two cutoffs agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergedNorm {
    pub trace_norm: f64,
    pub realigned_trace: f64,
    pub cutoff: usize,
}

/// Evaluate the builder at increasing cutoffs until two values a step apart
/// agree; refuses to report a value that is still drifting at the cap.
pub fn converged_trace_norm<F>(build: F, start_cutoff: usize) -> Result<ConvergedNorm>
where
    F: Fn(usize) -> Result<FockTensor>,
{
    let mut cutoff = start_cutoff.min(MAX_CUTOFF.saturating_sub(CONVERGENCE_STEP)).max(2);
    let mut prev = realign_and_trace_norm(&build(cutoff)?)?;
    loop {
        let next_cutoff = cutoff + CONVERGENCE_STEP;
        if next_cutoff > MAX_CUTOFF {
            return Err(CvError::CutoffTooSmall {
                cutoff: MAX_CUTOFF,
                reason: "trace norm still drifting at the cutoff cap".into(),
            });
        }
        let cur = realign_and_trace_norm(&build(next_cutoff)?)?;
        if cur.trace_norm < prev.trace_norm - 1e-9 {
            return Err(CvError::DomainError(format!(
                "trace norm fell from {} to {} when the cutoff grew; truncation assumption broken",
                prev.trace_norm, cur.trace_norm
            )));
        }
        if (cur.trace_norm - prev.trace_norm).abs() < CONVERGENCE_TOL {
            return Ok(ConvergedNorm {
                trace_norm: cur.trace_norm,
                realigned_trace: cur.realigned_trace,
                cutoff: next_cutoff,
            });
        }
        prev = cur;
        cutoff = next_cutoff;
    }
}
