//! Amplitude damping into a thermal environment: evolution of Gaussian kernels
//! and generating parameters, the realignment and second-moment criteria for
//! the evolved photon-prepared states, and the critical-time solver.

use serde::Serialize;

use crate::ccm::SymmetricCcm;
use crate::error::{CvError, Result};
use crate::moments::{gaussian_moment, param, DerivativeSpec, QuadraticExponent, PARAM_DIM};
use crate::photon::{p_form, p_r_form, photon_derivative_spec, realigned_ccm_prime, PhotonSign};
use crate::realign::{evaluate_branch, tau};
use crate::report::{Branch, CriterionReport};
use crate::sigma::SigmaBasisMatrix;

/// Identical damping channels on both modes, reduced to the two numbers the
/// formulas depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams {
    /// Dimensionless elapsed damping, the product of rate and time.
    pub gamma_t: f64,
    /// Mean thermal occupation of the environment.
    pub nbar: f64,
}

impl ChannelParams {
    pub fn new(gamma_t: f64, nbar: f64) -> Result<Self> {
        if !(gamma_t.is_finite() && gamma_t >= 0.0 && nbar.is_finite() && nbar >= 0.0) {
            return Err(CvError::DomainError(format!(
                "channel parameters gamma_t = {gamma_t}, nbar = {nbar} invalid"
            )));
        }
        Ok(Self { gamma_t, nbar })
    }

    pub fn from_rate_time(gamma: f64, t: f64, nbar: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0 && t.is_finite() && t >= 0.0) {
            return Err(CvError::DomainError(format!(
                "rate {gamma} and time {t} must be nonnegative"
            )));
        }
        Self::new(gamma * t, nbar)
    }

    /// `e^{-Gamma t}`, the surviving amplitude fraction.
    pub fn attenuation(&self) -> f64 {
        (-self.gamma_t).exp()
    }
}

/// Second moments after the channel: correlations shrink by the attenuation,
/// the occupation relaxes toward the environment's.
pub fn evolve_ccm(ccm: &SymmetricCcm, ch: &ChannelParams) -> SymmetricCcm {
    let eta = ch.attenuation();
    SymmetricCcm {
        b0: eta * ccm.b0 + (ch.nbar + 0.5) * (1.0 - eta),
        c1: eta * ccm.c1,
        c2: eta * ccm.c2,
    }
}

/// 8x8 row-major matrix taking generating parameters at time zero to the ones
/// appearing in the evolved generating functional.
pub fn param_evolution_matrix(ccm: &SymmetricCcm, ch: &ChannelParams) -> Result<[f64; 64]> {
    let evolved = evolve_ccm(ccm, ch);
    let s = (-0.5 * ch.gamma_t).exp();
    let e3 = SigmaBasisMatrix::block_swap();

    let beta_inv = ccm.gamma_prime().conj_block_signs();
    let beta_t_inv = evolved.gamma_prime().conj_block_signs();
    let beta_t = beta_t_inv.inverse()?;

    // (eps, zeta) ride beta_t beta^-1; (eta, xi) ride the shifted inverses.
    let a_ez = (beta_t * beta_inv).scale(s).to_dense();
    let a_hx = ((beta_t_inv + e3).inverse()? * (beta_inv + e3)).scale(s).to_dense();

    let ez = [param::EPS1, param::EPS2, param::ZETA1, param::ZETA2];
    let hx = [param::ETA1, param::ETA2, param::XI1, param::XI2];
    let mut t = [0.0; 64];
    for i in 0..4 {
        for j in 0..4 {
            t[ez[i] * PARAM_DIM + ez[j]] = a_ez[i][j];
            t[hx[i] * PARAM_DIM + hx[j]] = a_hx[i][j];
        }
    }
    Ok(t)
}

/// Push one parameter vector through the channel.
pub fn evolve_gen_params(
    params: &[f64; PARAM_DIM],
    ccm: &SymmetricCcm,
    ch: &ChannelParams,
) -> Result<[f64; PARAM_DIM]> {
    let t = param_evolution_matrix(ccm, ch)?;
    let mut out = [0.0; PARAM_DIM];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..PARAM_DIM).map(|j| t[i * PARAM_DIM + j] * params[j]).sum();
    }
    Ok(out)
}

/// Which algebraic route evaluates the evolved criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolvedRoute {
    /// Product of the three generating forms, parameters substituted through
    /// the channel map.
    ProductForm,
    /// Single quadratic form in the signed parameter vector, built from the
    /// two reduced matrices.
    QuadraticForm,
}

/// Exponent of the evolved criterion integrand over the 8 parameters,
/// product-form route: `Q_P - Q_Pt + Q_PtR` with the latter two composed with
/// the parameter evolution.
fn product_form_exponent(ccm: &SymmetricCcm, ch: &ChannelParams) -> Result<QuadraticExponent> {
    let evolved = evolve_ccm(ccm, ch);
    let q_p = p_form(&ccm.gamma_prime().conj_block_signs())?;
    let t_mat = param_evolution_matrix(ccm, ch)?;
    let q_pt = p_form(&evolved.gamma_prime().conj_block_signs())?
        .substitute_linear(&t_mat, PARAM_DIM)?;
    let q_ptr =
        p_r_form(&realigned_ccm_prime(&evolved)?)?.substitute_linear(&t_mat, PARAM_DIM)?;
    q_p.add(&q_pt.scale(-1.0))?.add(&q_ptr)
}

/// Same exponent through the reduced-matrix rewrite: `-1/2 v [[M,M'],[M',M']] v^T`
/// with `v = (eps, -zeta, eta, -xi)`.
fn quadratic_form_exponent(ccm: &SymmetricCcm, ch: &ChannelParams) -> Result<QuadraticExponent> {
    let eta_att = ch.attenuation();
    let e3 = SigmaBasisMatrix::block_swap();
    let evolved = evolve_ccm(ccm, ch);

    let gp = ccm.gamma_prime();
    let gpp = gp - e3;
    let gtp_inv = evolved.gamma_prime().inverse()?;
    let gtpp_inv = (evolved.gamma_prime() - e3).inverse()?;
    let grt = realigned_ccm_prime(&evolved)?;

    let reduced_p = gtp_inv * grt.conj_realign_signed() * gtp_inv - gtp_inv;
    let m = gp + (gp * reduced_p * gp).scale(eta_att);
    let reduced_pp = gtpp_inv * (grt - e3).conj_realign() * gtpp_inv - gtpp_inv;
    let m_prime = gpp + (gpp * reduced_pp * gpp).scale(eta_att);

    let md = m.to_dense();
    let mpd = m_prime.to_dense();
    let mut a = vec![0.0; 64];
    for i in 0..4 {
        for j in 0..4 {
            a[i * 8 + j] = -md[i][j];
            a[i * 8 + (j + 4)] = -mpd[i][j];
            a[(i + 4) * 8 + j] = -mpd[i][j];
            a[(i + 4) * 8 + (j + 4)] = -mpd[i][j];
        }
    }
    let q_v = QuadraticExponent::new(8, a, vec![0.0; 8], 0.0)?;

    let signed: [(usize, f64); 8] = [
        (param::EPS1, 1.0),
        (param::EPS2, 1.0),
        (param::ZETA1, -1.0),
        (param::ZETA2, -1.0),
        (param::ETA1, 1.0),
        (param::ETA2, 1.0),
        (param::XI1, -1.0),
        (param::XI2, -1.0),
    ];
    let mut s = vec![0.0; 64];
    for (row, (col, sign)) in signed.into_iter().enumerate() {
        s[row * 8 + col] = sign;
    }
    q_v.substitute_linear(&s, PARAM_DIM)
}

/// Criterion value of the plain branch of `ccm` after the channel, for the
/// derivative pattern in `deriv`.
pub fn evolved_branch_value(
    ccm: &SymmetricCcm,
    deriv: &DerivativeSpec,
    ch: &ChannelParams,
    route: EvolvedRoute,
) -> Result<f64> {
    let evolved = evolve_ccm(ccm, ch);
    let prefactor = tau(&evolved, Branch::Plain)?.sqrt();
    let q = match route {
        EvolvedRoute::ProductForm => product_form_exponent(ccm, ch)?,
        EvolvedRoute::QuadraticForm => quadratic_form_exponent(ccm, ch)?,
    };
    Ok(prefactor * deriv.normalization * gaussian_moment(&q, &deriv.orders)?)
}

/// Realignment criterion for an evolved photon-prepared state on a general
/// symmetric kernel; both sign branches, quadratic-form route with product-form
/// fallback.
pub fn evolved_criterion_general(
    ccm: &SymmetricCcm,
    deriv: &DerivativeSpec,
    ch: &ChannelParams,
) -> Result<CriterionReport> {
    if !ccm.is_physical() {
        return Err(CvError::DomainError(format!(
            "kernel (b0, c1, c2) = ({}, {}, {}) violates the uncertainty relation",
            ccm.b0, ccm.c1, ccm.c2
        )));
    }
    let mut best: Option<(Branch, f64, EvolvedRoute)> = None;
    for branch in [Branch::Plain, Branch::PiAppended] {
        let kernel = match branch {
            Branch::Plain => *ccm,
            Branch::PiAppended => ccm.parity_flipped(),
        };
        let (value, route) =
            match evolved_branch_value(&kernel, deriv, ch, EvolvedRoute::QuadraticForm) {
                Ok(v) => (v, EvolvedRoute::QuadraticForm),
                Err(CvError::SingularMatrix { .. }) => (
                    evolved_branch_value(&kernel, deriv, ch, EvolvedRoute::ProductForm)?,
                    EvolvedRoute::ProductForm,
                ),
                Err(e) => return Err(e),
            };
        if best.is_none_or(|(_, b, _)| value > b) {
            best = Some((branch, value, route));
        }
    }
    let (branch, value, route) = best.unwrap();
    let kernel = match branch {
        Branch::Plain => *ccm,
        Branch::PiAppended => ccm.parity_flipped(),
    };
    let evolved_kernel = evolve_ccm(&kernel, ch);
    let kernel_exact = evaluate_branch(&evolved_kernel, Branch::Plain)
        .map(|b| b.realigned_physical)
        .unwrap_or(false);
    let mut notes = vec![format!("evaluated through the {route:?} route")];
    if !kernel_exact {
        notes.push(
            "realigned evolved kernel is not a valid covariance matrix; \
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

/// Convenience wrapper: evolved criterion for `m`-photon subtraction/addition.
pub fn evolved_photon_criterion(
    ccm: &SymmetricCcm,
    sign: PhotonSign,
    m: u32,
    ch: &ChannelParams,
) -> Result<CriterionReport> {
    let deriv = photon_derivative_spec(ccm, sign, m)?;
    evolved_criterion_general(ccm, &deriv, ch)
}

/// The four scalars every squeezed-vacuum closed form is written in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TmsvChannelScalars {
    pub lambda: f64,
    /// Attenuated correlation `lambda e^{-Gamma t} / (1 - lambda^2)`.
    pub lambda_c: f64,
    /// Evolved diagonal `lambda^2 e^{-Gamma t}/(1-lambda^2) + nbar(1-e^{-Gamma t}) + 1`.
    pub n: f64,
    /// `e^{-Gamma t} / ((1+lambda)(2(N - Lambda) - 1))`.
    pub q: f64,
}

pub fn tmsv_channel_scalars(lambda: f64, ch: &ChannelParams) -> Result<TmsvChannelScalars> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(CvError::DomainError(format!(
            "squeeze parameter {lambda} outside [0, 1)"
        )));
    }
    let eta = ch.attenuation();
    let den = 1.0 - lambda * lambda;
    let lambda_c = lambda * eta / den;
    let n = lambda * lambda * eta / den + ch.nbar * (1.0 - eta) + 1.0;
    let q = eta / ((1.0 + lambda) * (2.0 * (n - lambda_c) - 1.0));
    Ok(TmsvChannelScalars { lambda, lambda_c, n, q })
}

fn tmsv_lambda_guard(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(CvError::DomainError(format!(
            "squeeze parameter {lambda} outside (0, 1)"
        )));
    }
    Ok(())
}

/// Closed-form realignment criterion for the evolved photon subtracted or
/// added squeezed vacuum (one photon per mode).
pub fn evolved_photon_criterion_tmsv(
    lambda: f64,
    ch: &ChannelParams,
    sign: PhotonSign,
) -> Result<CriterionReport> {
    tmsv_lambda_guard(lambda)?;
    let sc = tmsv_channel_scalars(lambda, ch)?;
    let prefactor = 1.0 / (2.0 * (sc.n - sc.lambda_c) - 1.0);
    let den2 = 1.0 - lambda * lambda;
    let inv1m = 1.0 / (1.0 - lambda);
    let sq = |x: f64| x * x;
    let value = match sign {
        PhotonSign::Add => {
            let c_a = sq(den2) / (1.0 + lambda * lambda);
            prefactor * c_a / sq(1.0 + lambda)
                * (sq(lambda * inv1m + sc.q) + sq(inv1m - sc.q))
        }
        PhotonSign::Subtract => {
            let c_s = sq(den2) / (lambda * lambda * (1.0 + lambda * lambda));
            prefactor * c_s * lambda * lambda / sq(1.0 + lambda)
                * (sq(inv1m + lambda * sc.q) + lambda * lambda * sq(inv1m - sc.q))
        }
    };
    let kernel = SymmetricCcm::two_mode_squeezed(lambda)?;
    let kernel_exact = evaluate_branch(&evolve_ccm(&kernel, ch), Branch::Plain)
        .map(|b| b.realigned_physical)
        .unwrap_or(false);
    Ok(CriterionReport {
        value,
        threshold: 1.0,
        detects_above: true,
        branch: Branch::Plain,
        lower_bound_only: !kernel_exact,
        notes: Vec::new(),
    })
}

/// Second-moment entanglement conditions for the same evolved states; the
/// value detects by dropping below 1.
pub fn second_moment_evolved(
    lambda: f64,
    ch: &ChannelParams,
    sign: PhotonSign,
) -> Result<CriterionReport> {
    tmsv_lambda_guard(lambda)?;
    let sc = tmsv_channel_scalars(lambda, ch)?;
    let eta = ch.attenuation();
    let shared = sc.n - sc.lambda_c;
    let extra = (1.0 - lambda).powi(3) * eta / (1.0 - lambda.powi(4));
    let value = match sign {
        PhotonSign::Add => shared + extra,
        PhotonSign::Subtract => shared - lambda * extra,
    };
    Ok(CriterionReport {
        value,
        threshold: 1.0,
        detects_above: false,
        branch: Branch::Plain,
        lower_bound_only: false,
        notes: Vec::new(),
    })
}

/// Scan resolution and bracket for the critical-time search.
pub const CRITICAL_TIME_BRACKET: f64 = 50.0;
pub const CRITICAL_TIME_SCAN_POINTS: usize = 1000;
pub const CRITICAL_TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalTime {
    /// Dimensionless time of the first detection-to-separable crossing.
    pub gamma_t: f64,
    /// Set when the scan saw more than one sign change; the first is reported.
    pub non_monotonic: bool,
}

/// Smallest `Gamma t` at which the margin of `report_at` changes sign, where
/// the margin is positive while the criterion detects. Returns `None` when the
/// state starts undetected or stays detected over the whole bracket.
pub fn critical_time<F>(report_at: F) -> Result<Option<CriticalTime>>
where
    F: Fn(f64) -> Result<CriterionReport>,
{
    let margin = |x: f64| -> Result<f64> {
        let r = report_at(x)?;
        let d = r.value - r.threshold;
        Ok(if r.detects_above { d } else { -d })
    };
    let n = CRITICAL_TIME_SCAN_POINTS;
    let step = CRITICAL_TIME_BRACKET / n as f64;
    let mut prev = margin(0.0)?;
    if prev <= 0.0 {
        return Ok(None);
    }
    let mut first_bracket: Option<(f64, f64)> = None;
    let mut crossings = 0usize;
    for i in 1..=n {
        let x = i as f64 * step;
        let cur = margin(x)?;
        if prev > 0.0 && cur <= 0.0 || prev <= 0.0 && cur > 0.0 {
            crossings += 1;
            if first_bracket.is_none() {
                first_bracket = Some((x - step, x));
            }
        }
        prev = cur;
    }
    let Some((mut lo, mut hi)) = first_bracket else {
        return Ok(None);
    };
    // margin(lo) > 0 >= margin(hi) by construction of the first crossing
    while hi - lo > CRITICAL_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if margin(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(CriticalTime {
        gamma_t: 0.5 * (lo + hi),
        non_monotonic: crossings > 1,
    }))
}

/// Criterion families the sweep and critical-time layers select between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TmsvCriterionKind {
    RealignSubtract,
    RealignAdd,
    SecondMomentSubtract,
    SecondMomentAdd,
}

impl TmsvCriterionKind {
    pub fn report(self, lambda: f64, nbar: f64, gamma_t: f64) -> Result<CriterionReport> {
        let ch = ChannelParams::new(gamma_t, nbar)?;
        match self {
            TmsvCriterionKind::RealignSubtract => {
                evolved_photon_criterion_tmsv(lambda, &ch, PhotonSign::Subtract)
            }
            TmsvCriterionKind::RealignAdd => {
                evolved_photon_criterion_tmsv(lambda, &ch, PhotonSign::Add)
            }
            TmsvCriterionKind::SecondMomentSubtract => {
                second_moment_evolved(lambda, &ch, PhotonSign::Subtract)
            }
            TmsvCriterionKind::SecondMomentAdd => {
                second_moment_evolved(lambda, &ch, PhotonSign::Add)
            }
        }
    }
}

/// Critical time of one closed-form criterion for the photon-prepared
/// squeezed vacuum in a thermal channel.
pub fn tmsv_critical_time(
    lambda: f64,
    nbar: f64,
    kind: TmsvCriterionKind,
) -> Result<Option<CriticalTime>> {
    critical_time(|gamma_t| kind.report(lambda, nbar, gamma_t))
}
