//! Realignment criteria for photon-subtracted and photon-added states on a
//! symmetric Gaussian kernel, plus the three-way mixture inequalities.
//!
//! The working engine is the moment ratio `f(m, .)/f(m, .)` on swap-basis
//! matrices; the order-1 closed form and the 8-parameter generating form are
//! kept as independent routes and must agree with it.

use serde::Serialize;

use crate::ccm::SymmetricCcm;
use crate::error::{CvError, Result};
use crate::moments::{gaussian_moment, param, DerivativeSpec, QuadraticExponent, PARAM_DIM};
use crate::realign::{evaluate_branch, tau};
use crate::report::{Branch, CriterionReport};
use crate::sigma::SigmaBasisMatrix;

/// Largest supported number of photons added or subtracted per mode.
pub const MAX_PHOTON_ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonSign {
    Subtract,
    Add,
}

impl PhotonSign {
    /// Coefficient of the swap generator in `gamma -+ (1/2) s(x)I`.
    fn half_shift(self) -> f64 {
        match self {
            PhotonSign::Subtract => -0.5,
            PhotonSign::Add => 0.5,
        }
    }
}

/// `f(m, V)`: the `(m,m,m,m)` derivative at zero of `exp(-x V x^T / 2)`.
pub fn f_norm(m: u32, v: &SigmaBasisMatrix) -> Result<f64> {
    let d = v.to_dense();
    let mut neg = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            neg[i][j] = -d[i][j];
        }
    }
    let q = QuadraticExponent::from_dense4(neg, [0.0; 4], 0.0)?;
    gaussian_moment(&q, &[m, m, m, m])
}

/// Degree-8 closed form of `f(2, V)` for swap-basis `V`.
pub fn f2_closed_form(v: &SigmaBasisMatrix) -> f64 {
    let [v1, v2, v3, v4] = v.coeffs;
    let s = v2 * v2 + v3 * v3 + v4 * v4;
    (v1 * v1 + 2.0 * s).powi(2)
        + 32.0 * v1 * v2 * v3 * v4
        + 8.0 * (v2 * v2 * v3 * v3 + v2 * v2 * v4 * v4 + v3 * v3 * v4 * v4)
}

/// Realigned primed matrix of the plain branch in closed form:
/// `(1/2) {c2 (tau-1), (b0+c1) tau - (b0-c1), (b0+c1) tau + (b0-c1) + 1, c2 (tau+1)}`.
pub fn realigned_ccm_prime(ccm: &SymmetricCcm) -> Result<SigmaBasisMatrix> {
    let t = tau(ccm, Branch::Plain)?;
    let (sum, diff) = (ccm.b0 + ccm.c1, ccm.b0 - ccm.c1);
    Ok(SigmaBasisMatrix::new([
        0.5 * ccm.c2 * (t - 1.0),
        0.5 * (sum * t - diff),
        0.5 * (sum * t + diff + 1.0),
        0.5 * ccm.c2 * (t + 1.0),
    ]))
}

/// Normalization constant of the state after `m`-photon subtraction or
/// addition on both modes: `1 / f(m, gamma -+ s(x)I/2)`.
pub fn photon_normalization(ccm: &SymmetricCcm, sign: PhotonSign, m: u32) -> Result<f64> {
    let arg = ccm.gamma() + SigmaBasisMatrix::new([0.0, 0.0, sign.half_shift(), 0.0]);
    let f = f_norm(m, &arg)?;
    if f <= 0.0 || f < 1e-30 {
        return Err(CvError::DegenerateState(format!(
            "photon operation leaves no state: f({m}, gamma{}) = {f:.3e}",
            match sign {
                PhotonSign::Subtract => " - s/2",
                PhotonSign::Add => " + s/2",
            }
        )));
    }
    Ok(1.0 / f)
}

/// Generating form of a Gaussian state with kernel inverse `beta_inv`, as a
/// quadratic exponent over the eight parameters in canonical order:
/// `-1/2 u beta^-1 u^T - zeta.eta - eps.xi - eta.xi`,
/// `u = (eps1+eta1, eps2+eta2, xi1+zeta1, xi2+zeta2)`.
pub fn p_form(beta_inv: &SigmaBasisMatrix) -> Result<QuadraticExponent> {
    let d = beta_inv.to_dense();
    let mut neg = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            neg[i][j] = -d[i][j];
        }
    }
    let core = QuadraticExponent::from_dense4(neg, [0.0; 4], 0.0)?;
    let mut u = vec![0.0; 4 * PARAM_DIM];
    for (row, (a, b)) in [
        (param::EPS1, param::ETA1),
        (param::EPS2, param::ETA2),
        (param::XI1, param::ZETA1),
        (param::XI2, param::ZETA2),
    ]
    .into_iter()
    .enumerate()
    {
        u[row * PARAM_DIM + a] = 1.0;
        u[row * PARAM_DIM + b] = 1.0;
    }
    let quad = core.substitute_linear(&u, PARAM_DIM)?;

    let mut bilin = vec![0.0; PARAM_DIM * PARAM_DIM];
    for (i, j) in [
        (param::ZETA1, param::ETA1),
        (param::ZETA2, param::ETA2),
        (param::EPS1, param::XI1),
        (param::EPS2, param::XI2),
        (param::ETA1, param::XI1),
        (param::ETA2, param::XI2),
    ] {
        bilin[i * PARAM_DIM + j] = -1.0;
        bilin[j * PARAM_DIM + i] = -1.0;
    }
    quad.add(&QuadraticExponent::new(PARAM_DIM, bilin, vec![0.0; PARAM_DIM], 0.0)?)
}

/// How the realigned generating form reads the original parameters: template
/// slot `i` takes its value from source slot `REALIGN_PARAM_PERM[i]`.
pub const REALIGN_PARAM_PERM: [usize; PARAM_DIM] = [0, 6, 2, 4, 3, 5, 1, 7];

/// Generating form of the realigned kernel: the plain template built on the
/// sign-conjugated realigned matrix, with parameter slots reshuffled the way
/// realignment swaps bra and ket between the modes.
pub fn p_r_form(realigned_prime: &SigmaBasisMatrix) -> Result<QuadraticExponent> {
    p_form(&realigned_prime.conj_block_signs())?.permute(&REALIGN_PARAM_PERM)
}

/// Order-1 criterion value of the plain branch in closed form.
pub fn photon_m1_closed_form(ccm: &SymmetricCcm, sign: PhotonSign) -> Result<f64> {
    let t = tau(ccm, Branch::Plain)?;
    let c = photon_normalization(ccm, sign, 1)?;
    let shift = sign.half_shift();
    let sq = |x: f64| x * x;
    let bracket = sq(ccm.b0 - ccm.c1 + shift)
        + sq((ccm.b0 + ccm.c1) * t + shift)
        + 0.5 * sq(ccm.c2) * sq(t + 1.0);
    Ok(t.sqrt() * 0.5 * c * bracket)
}

/// Criterion value of one branch via the moment-ratio engine.
fn branch_value(kernel: &SymmetricCcm, sign: PhotonSign, m: u32) -> Result<f64> {
    let t = tau(kernel, Branch::Plain)?;
    let shift = SigmaBasisMatrix::new([0.0, 0.0, sign.half_shift(), 0.0]);
    let half_swap = SigmaBasisMatrix::new([0.0, 0.0, 0.5, 0.0]);
    let realigned = realigned_ccm_prime(kernel)? - half_swap + shift;
    let numer = f_norm(m, &realigned)?;
    let c = photon_normalization(kernel, sign, m)?;
    Ok(t.sqrt() * c * numer)
}

/// Realignment criterion for the state with `m` photons subtracted from or
/// added to each mode of a symmetric Gaussian state; both sign branches are
/// evaluated and the larger value reported.
pub fn photon_pm_criterion(
    ccm: &SymmetricCcm,
    sign: PhotonSign,
    m: u32,
) -> Result<CriterionReport> {
    if !ccm.is_physical() {
        return Err(CvError::DomainError(format!(
            "kernel (b0, c1, c2) = ({}, {}, {}) violates the uncertainty relation",
            ccm.b0, ccm.c1, ccm.c2
        )));
    }
    if m == 0 || m > MAX_PHOTON_ORDER {
        return Err(CvError::DomainError(format!(
            "photon order {m} outside 1..={MAX_PHOTON_ORDER}"
        )));
    }
    let mut best: Option<(Branch, f64)> = None;
    for branch in [Branch::Plain, Branch::PiAppended] {
        let kernel = match branch {
            Branch::Plain => *ccm,
            Branch::PiAppended => ccm.parity_flipped(),
        };
        let v = branch_value(&kernel, sign, m)?;
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((branch, v));
        }
    }
    let (branch, value) = best.unwrap();
    let kernel = match branch {
        Branch::Plain => *ccm,
        Branch::PiAppended => ccm.parity_flipped(),
    };
    let kernel_exact = evaluate_branch(&kernel, Branch::Plain)
        .map(|b| b.realigned_physical)
        .unwrap_or(false);
    let mut notes = Vec::new();
    if !kernel_exact {
        notes.push(
            "realigned kernel is not a valid covariance matrix; \
             value certifies only a lower bound on the trace norm"
                .into(),
        );
    }
    Ok(CriterionReport {
        value,
        threshold: 1.0,
        detects_above: true,
        branch,
        lower_bound_only: !kernel_exact,
        notes,
    })
}

/// Derivative pattern and normalization matching `photon_pm_criterion`; the
/// channel evaluators consume this.
pub fn photon_derivative_spec(
    ccm: &SymmetricCcm,
    sign: PhotonSign,
    m: u32,
) -> Result<DerivativeSpec> {
    let orders = match sign {
        PhotonSign::Subtract => DerivativeSpec::subtract_orders(m),
        PhotonSign::Add => DerivativeSpec::add_orders(m),
    };
    DerivativeSpec::new(orders, photon_normalization(ccm, sign, m)?)
}

/// Detection weight `w = b0 + c1 - 1/2` of a kernel entering a mixture.
pub fn mixture_weight(ccm: &SymmetricCcm) -> f64 {
    ccm.b0 + ccm.c1 - 0.5
}

/// The three mixture criteria; each detects when its value is negative.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureReports {
    pub second_moment: CriterionReport,
    pub fock: CriterionReport,
    pub realignment: CriterionReport,
}

pub fn mixture_criteria(w1: f64, w2: f64, p: f64) -> Result<MixtureReports> {
    if !(w1.is_finite() && w2.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(CvError::DomainError(format!(
            "mixture inputs w1 = {w1}, w2 = {w2}, p = {p} invalid"
        )));
    }
    let mut notes = Vec::new();
    if !(-0.5..0.0).contains(&w1) || w2 < 0.0 {
        notes.push(format!(
            "weights (w1, w2) = ({w1}, {w2}) outside the regime w1 in (-1/2, 0), w2 >= 0; \
             the nesting of the three criteria is not guaranteed"
        ));
    }
    let linear = p * w1 + (1.0 - p) * w2;
    let report = |value: f64| CriterionReport {
        value,
        threshold: 0.0,
        detects_above: false,
        branch: Branch::Plain,
        lower_bound_only: false,
        notes: notes.clone(),
    };
    Ok(MixtureReports {
        second_moment: report(linear),
        fock: report(linear + w1 * w2),
        realignment: report(linear + 2.0 * w1 * w2),
    })
}
