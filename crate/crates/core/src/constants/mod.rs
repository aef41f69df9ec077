//! Deterministic ingredients of the rank-SPRT expansion.
//!
//! Throughout, `F` is uniform on `(0, 1)` and `G(x) = x^A`, so
//! `H = F + G = x + x^A` and `W = F + Delta G = x + Delta x^A`. Integrals
//! against `dH = dF + dG` are split into an `F` part over `x` and a `G` part
//! over `u = x^A`, which removes the `A x^(A-1)` weight singularity at zero
//! for `A < 1`.

pub mod hypergeom;
pub mod quadrature;

pub use hypergeom::{c_eta, c_eta_partial, hypergeom_e_log, CEtaResult, LogFactorials};
pub use quadrature::{integrate, QuadratureResult, QuadratureSpec};

use crate::{Error, Result};

fn check_params(delta: f64, a_exp: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!(
            "Delta must be positive, got {delta}"
        )));
    }
    if !(a_exp > 0.0 && a_exp.is_finite()) {
        return Err(Error::Config(format!("A must be positive, got {a_exp}")));
    }
    Ok(())
}

/// `eta = (Delta - 1) / (Delta + 1)`.
pub fn eta_of(delta: f64) -> f64 {
    (delta - 1.0) / (delta + 1.0)
}

/// `log psi(x) = log(H(x) / W(x))`, written in terms of `x^(A-1)` so it
/// stays accurate as `x -> 0`.
pub fn log_psi(x: f64, delta: f64, a_exp: f64) -> f64 {
    let r = x.powf(a_exp - 1.0);
    (1.0 + r).ln() - (1.0 + delta * r).ln()
}

/// `log H(x) = log(x + x^A)`.
pub fn log_h(x: f64, a_exp: f64) -> f64 {
    x.ln() + x.powf(a_exp - 1.0).ln_1p()
}

/// `J(x) = int_x^1 dH(t) / W(t)`.
///
/// With `t = e^{-s}` for the `F` part and `t^A = e^{-s}` for the `G` part
/// both integrands are bounded and smooth on `[0, -log x]` and
/// `[0, -A log x]`.
pub fn j_integral(x: f64, delta: f64, a_exp: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Domain(format!("J(x) needs 0 < x <= 1, got {x}")));
    }
    let upper = -x.ln();
    let f_part = integrate(
        |s: f64| 1.0 / (1.0 + delta * (-s * (a_exp - 1.0)).exp()),
        0.0,
        upper,
        q,
    )?;
    let g_part = integrate(
        |s: f64| 1.0 / ((s * (1.0 - 1.0 / a_exp)).exp() + delta),
        0.0,
        a_exp * upper,
        q,
    )?;
    Ok(f_part.value + g_part.value)
}

/// Drift of the rank log-likelihood walk,
/// `mu = log Delta + int log(H / W) dH` over `(0, 1)`.
pub fn drift_mu(delta: f64, a_exp: f64, q: &QuadratureSpec) -> Result<f64> {
    check_params(delta, a_exp)?;
    if delta == 1.0 {
        return Ok(0.0);
    }
    let f_part = integrate(|x| log_psi(x, delta, a_exp), 0.0, 1.0, q)?;
    let g_part = integrate(
        |u: f64| log_psi(u.powf(1.0 / a_exp), delta, a_exp),
        0.0,
        1.0,
        q,
    )?;
    Ok(delta.ln() + f_part.value + g_part.value)
}

/// `h(x) = (1 - Delta)^2 x^(1+A) / {2 (x + Delta x^A)^2 (x + x^A)}`.
pub fn h_fn(x: f64, delta: f64, a_exp: f64) -> f64 {
    let xa = x.powf(a_exp);
    let w = x + delta * xa;
    (1.0 - delta).powi(2) * x.powf(1.0 + a_exp) / (2.0 * w * w * (x + xa))
}

/// `int_0^1 h(x) d(x + x^A)`, the limit of `E xi_n` when `A != 1`.
pub fn h_integral(delta: f64, a_exp: f64, q: &QuadratureSpec) -> Result<f64> {
    check_params(delta, a_exp)?;
    if a_exp == 1.0 {
        return Err(Error::Branch(
            "the h integral diverges at A = 1; use C(eta) instead".into(),
        ));
    }
    if delta == 1.0 {
        return Ok(0.0);
    }
    // Near zero h(x) ~ x^(1-2A) for A < 1 and ~ x^(A-2) for A > 1, and the
    // G part picks up the extra 1/A in the exponent. Substituting x = t^m
    // with m (1 - beta) >= 1 makes each transformed integrand bounded.
    let (beta_f, beta_g) = if a_exp < 1.0 {
        (2.0 * a_exp - 1.0, 2.0 - 1.0 / a_exp)
    } else {
        (2.0 - a_exp, 2.0 / a_exp - 1.0)
    };
    let power = |beta: f64| {
        if beta > 0.0 {
            (1.0 / (1.0 - beta)).ceil().min(8.0)
        } else {
            1.0
        }
    };
    let part = |g: &dyn Fn(f64) -> f64, m: f64| {
        integrate(
            |t: f64| {
                if m == 1.0 {
                    g(t)
                } else {
                    g(t.powf(m)) * m * t.powf(m - 1.0)
                }
            },
            0.0,
            1.0,
            q,
        )
    };
    let f_part = part(&|x| h_fn(x, delta, a_exp), power(beta_f))?;
    let g_part = part(
        &|u: f64| h_fn(u.powf(1.0 / a_exp), delta, a_exp),
        power(beta_g),
    )?;
    Ok(f_part.value + g_part.value)
}

/// Everything the `constants` experiment reports for one `(Delta, A, eta)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConstantsReport {
    pub delta: f64,
    pub a_exp: f64,
    pub eta: f64,
    pub mu: f64,
    /// `None` at `A = 1`, where the integral diverges.
    pub h_integral: Option<f64>,
    pub c_eta: f64,
    pub err_estimates: ErrEstimates,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ErrEstimates {
    pub mu: f64,
    pub h_integral: Option<f64>,
    pub c_eta: f64,
}

/// Evaluates `mu`, the `h` integral and `C(eta)`. The quadrature error
/// estimates are the change under halved tolerances, floored at `abs_tol`.
pub fn constants_report(
    delta: f64,
    a_exp: f64,
    eta: f64,
    n_max: usize,
    q: &QuadratureSpec,
) -> Result<ConstantsReport> {
    let mu = drift_mu(delta, a_exp, q)?;
    let mu_fine = drift_mu(delta, a_exp, &q.halved())?;
    let (h, h_err) = if a_exp == 1.0 {
        (None, None)
    } else {
        let h = h_integral(delta, a_exp, q)?;
        let fine = h_integral(delta, a_exp, &q.halved())?;
        (Some(h), Some((h - fine).abs().max(q.abs_tol)))
    };
    let c = c_eta(eta, n_max)?;
    Ok(ConstantsReport {
        delta,
        a_exp,
        eta,
        mu,
        h_integral: h,
        c_eta: c.extrapolated,
        err_estimates: ErrEstimates {
            mu: (mu - mu_fine).abs().max(q.abs_tol),
            h_integral: h_err,
            c_eta: c.err_estimate,
        },
    })
}
