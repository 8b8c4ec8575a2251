//! Exact rational evaluation of the criticality calculus.
//!
//! Everything in this module is computed over arbitrary-precision rationals;
//! floating point appears only at the experiments boundary
//! ([`lifetime_tail_bound`]). Validation errors carry the violated
//! inequality verbatim so misuse is self-documenting.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::fmt;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq)]
pub enum CriticalityError {
    #[error("violated inequality: {0}")]
    ViolatedInequality(String),
    #[error("the terms list must be nonempty")]
    EmptyTerms,
    #[error("cannot parse {0:?} as a rational (use p/q, a decimal, or an integer)")]
    ParseRational(String),
}

fn violated(msg: impl Into<String>) -> CriticalityError {
    CriticalityError::ViolatedInequality(msg.into())
}

/// Integer-valued rational helper.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"`, a decimal like `"0.75"`, or an integer, exactly.
pub fn parse_rational(s: &str) -> Result<Rational, CriticalityError> {
    let s = s.trim();
    let err = || CriticalityError::ParseRational(s.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| err())?;
        let d: BigInt = den.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int_sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let i: BigInt = if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().map_err(|_| err())? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let f: BigInt = frac.parse().map_err(|_| err())?;
        let scale = BigInt::from(10u8).pow(frac.len() as u32);
        let frac_part = Rational::new(f * int_sign, scale);
        return Ok(Rational::from(i) + frac_part);
    }
    let i: BigInt = s.parse().map_err(|_| err())?;
    Ok(Rational::from(i))
}

/// Renders a rational as `n/d` (or `n` when integral).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// One nonlinearity term: growth exponent `rho > 0` and space roughness
/// `beta in (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityTerm {
    pub rho: Rational,
    pub beta: Rational,
}

impl NonlinearityTerm {
    pub fn new(rho: Rational, beta: Rational) -> Result<Self, CriticalityError> {
        if !rho.is_positive() {
            return Err(violated(format!("rho > 0 (got rho = {})", format_rational(&rho))));
        }
        if !beta.is_positive() || beta >= Rational::one() {
            return Err(violated(format!("0 < beta < 1 (got beta = {})", format_rational(&beta))));
        }
        Ok(Self { rho, beta })
    }
}

/// Which excess formula [`excess`] evaluates for multi-term settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SplitMode {
    /// `(min_j exc_j) * (1 + 1/max_j rho_j)`.
    Coupled,
    /// `min_j [ ((rho_j+1)/rho_j)(1-beta_j) - (1+alpha)/p ]`, valid when the
    /// nonlinearity splits into a sum of terms each with its own estimate.
    Additive,
}

/// The tuple `(p, alpha, terms, ell)` parameterizing criticality computations.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub p: Rational,
    pub alpha: Rational,
    pub terms: Vec<NonlinearityTerm>,
    pub ell: Rational,
    pub split_mode: SplitMode,
}

impl Setting {
    pub fn new(
        p: Rational,
        alpha: Rational,
        terms: Vec<NonlinearityTerm>,
        ell: Rational,
        split_mode: SplitMode,
    ) -> Result<Self, CriticalityError> {
        if p < rat(2, 1) {
            return Err(violated(format!("p >= 2 (got p = {})", format_rational(&p))));
        }
        if alpha.is_negative() {
            return Err(violated(format!("alpha >= 0 (got alpha = {})", format_rational(&alpha))));
        }
        let half_p_minus_one = &p / rat(2, 1) - Rational::one();
        if !alpha.is_zero() && alpha >= half_p_minus_one {
            return Err(violated(format!(
                "alpha < p/2 - 1 (got alpha = {}, p/2 - 1 = {})",
                format_rational(&alpha),
                format_rational(&half_p_minus_one)
            )));
        }
        if ell < Rational::one() {
            return Err(violated(format!("ell >= 1 (got ell = {})", format_rational(&ell))));
        }
        if terms.is_empty() {
            return Err(CriticalityError::EmptyTerms);
        }
        let setting = Self { p, alpha, terms, ell, split_mode };
        for term in &setting.terms {
            check_beta_admissible(term, &setting.p, &setting.alpha)?;
        }
        Ok(setting)
    }

    /// The trace-weight ratio `(1+alpha)/p`.
    pub fn trace_ratio(&self) -> Rational {
        (Rational::one() + &self.alpha) / &self.p
    }
}

/// Subcriticality of a term: `(1+alpha)/p <= ((rho+1)/rho)(1-beta)`,
/// equivalently `exc_j >= 0`. This is the balance between the regularity of
/// initial data and the strength of the nonlinearity; note that the paper's
/// own NSE weak setting sits exactly on the lower edge of the nominal
/// `beta`-window at `q = 3`, so only subcriticality is enforced here.
fn check_beta_admissible(
    term: &NonlinearityTerm,
    p: &Rational,
    alpha: &Rational,
) -> Result<(), CriticalityError> {
    if term.beta >= Rational::one() {
        return Err(violated(format!("beta < 1 (got beta = {})", format_rational(&term.beta))));
    }
    let ratio = (Rational::one() + alpha) / p;
    let cap = (&term.rho + Rational::one()) / &term.rho * (Rational::one() - &term.beta);
    if ratio > cap {
        return Err(violated(format!(
            "(1+alpha)/p <= ((rho+1)/rho)(1-beta) (got (1+alpha)/p = {}, bound = {})",
            format_rational(&ratio),
            format_rational(&cap)
        )));
    }
    Ok(())
}

/// Regime classification of a setting (cf. the global picture: everything
/// between global irregularity and global regularity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `Exc < 0`: the energy bound carries no excess regularity.
    GlobalIrregularity,
    /// `Exc = 0`: spatially critical endpoint (Lebesgue-null statement).
    SpatiallyCritical,
    /// `0 < Exc < 1/ell`: dimension bound in `(0, 1)`.
    PartialRegularity,
    /// `Exc >= 1/ell`: Serrin-type global regularity regime.
    GlobalRegularity,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::GlobalIrregularity => "global_irregularity",
            Regime::SpatiallyCritical => "spatially_critical",
            Regime::PartialRegularity => "partial_regularity",
            Regime::GlobalRegularity => "global_regularity",
        };
        write!(f, "{s}")
    }
}

/// Full output of the excess computation.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalityReport {
    pub exc_terms: Vec<Rational>,
    pub exc: Rational,
    pub subcritical: Vec<bool>,
    pub spatially_subcritical: bool,
    pub spacetime_supercritical: bool,
    pub dimension_bound: Rational,
    pub regime: Regime,
}

/// Per-term excess from criticality:
/// `exc_j = 1 - beta_j - (rho_j/(rho_j+1)) * (1+alpha)/p`.
pub fn excess_per_term(
    term: &NonlinearityTerm,
    p: &Rational,
    alpha: &Rational,
) -> Result<Rational, CriticalityError> {
    check_beta_admissible(term, p, alpha)?;
    let ratio = (Rational::one() + alpha) / p;
    let weight = &term.rho / (&term.rho + Rational::one());
    Ok(Rational::one() - &term.beta - weight * ratio)
}

/// Evaluates the excess of the whole setting and fills the regime report.
///
/// Coupled mode: `(min_j exc_j)(1 + 1/max_j rho_j)`. Additive mode:
/// `min_j [((rho_j+1)/rho_j)(1-beta_j) - (1+alpha)/p]`. The dimension bound
/// is `1 - ell * Exc`.
pub fn excess(setting: &Setting) -> Result<CriticalityReport, CriticalityError> {
    if setting.terms.is_empty() {
        return Err(CriticalityError::EmptyTerms);
    }
    let ratio = setting.trace_ratio();
    let exc_terms: Vec<Rational> = setting
        .terms
        .iter()
        .map(|t| excess_per_term(t, &setting.p, &setting.alpha))
        .collect::<Result<_, _>>()?;
    let exc = match setting.split_mode {
        SplitMode::Coupled => {
            let min_exc = exc_terms.iter().min().unwrap().clone();
            let max_rho = setting.terms.iter().map(|t| &t.rho).max().unwrap();
            min_exc * (Rational::one() + Rational::one() / max_rho)
        }
        SplitMode::Additive => setting
            .terms
            .iter()
            .map(|t| {
                ((&t.rho + Rational::one()) / &t.rho) * (Rational::one() - &t.beta) - &ratio
            })
            .min()
            .unwrap(),
    };
    let inv_ell = Rational::one() / &setting.ell;
    let spatially_subcritical = exc.is_positive();
    let spacetime_supercritical = exc < inv_ell;
    let dimension_bound = Rational::one() - &setting.ell * &exc;
    let regime = if exc.is_negative() {
        Regime::GlobalIrregularity
    } else if exc.is_zero() {
        Regime::SpatiallyCritical
    } else if exc < inv_ell {
        Regime::PartialRegularity
    } else {
        Regime::GlobalRegularity
    };
    let subcritical = exc_terms.iter().map(|e| e.is_positive()).collect();
    Ok(CriticalityReport {
        exc_terms,
        exc,
        subcritical,
        spatially_subcritical,
        spacetime_supercritical,
        dimension_bound,
        regime,
    })
}

/// Regime flag attached to a Serrin exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SerrinRegime {
    /// `2/p0 + gamma0 + 3/q0 > 1`: supercritical, partial regularity.
    Supercritical,
    /// `2/p0 + gamma0 + 3/q0 <= 1`: Serrin criterion for global regularity.
    GlobalRegularity,
}

/// The singular-time dimension bound under a supercritical Serrin condition:
/// `delta0 = (p0/2)(2/p0 + gamma0 + 3/q0 - 1)`.
pub fn serrin_delta(
    p0: &Rational,
    q0: &Rational,
    gamma0: &Rational,
) -> Result<(Rational, SerrinRegime), CriticalityError> {
    if p0 < &rat(2, 1) {
        return Err(violated(format!("p0 >= 2 (got p0 = {})", format_rational(p0))));
    }
    if q0 <= &rat(3, 1) {
        return Err(violated(format!("q0 > 3 (got q0 = {})", format_rational(q0))));
    }
    if gamma0.is_negative() {
        return Err(violated(format!("gamma0 >= 0 (got gamma0 = {})", format_rational(gamma0))));
    }
    let three_over_q0 = rat(3, 1) / q0;
    if gamma0 >= &three_over_q0 {
        return Err(violated(format!(
            "gamma0 < 3/q0 (got gamma0 = {}, 3/q0 = {})",
            format_rational(gamma0),
            format_rational(&three_over_q0)
        )));
    }
    if gamma0 + &three_over_q0 >= Rational::one() {
        return Err(violated(format!(
            "gamma0 + 3/q0 < 1 (got {})",
            format_rational(&(gamma0 + &three_over_q0))
        )));
    }
    let index = rat(2, 1) / p0 + gamma0 + &three_over_q0 - Rational::one();
    let delta0 = p0 / rat(2, 1) * &index;
    let regime = if index.is_positive() {
        SerrinRegime::Supercritical
    } else {
        SerrinRegime::GlobalRegularity
    };
    Ok((delta0, regime))
}

/// The deterministic `(p, alpha)` chooser output for the NSE weak setting.
#[derive(Debug, Clone, PartialEq)]
pub struct NseWeakSetting {
    pub q: Rational,
    pub p: Rational,
    pub alpha: Rational,
    pub beta: Rational,
    /// Trace Sobolev index `1 - 2(1+alpha)/p - 3/q`.
    pub trace_index: Rational,
}

/// Admissible `(p, alpha)` realizing `(1+alpha)/p = (3/2)(1/2 - 1/q)` with
/// `beta = 1/2 + 3/(4q)`, for `q in (2, 6)`.
///
/// The relation only requires existence of such a pair; for reproducibility
/// the chooser picks the smallest integer `p >= 4` admitting `alpha >= 0`.
pub fn nse_weak_setting(q: &Rational) -> Result<NseWeakSetting, CriticalityError> {
    if q <= &rat(2, 1) || q >= &rat(6, 1) {
        return Err(violated(format!(
            "2 < q < 6 (sharp-embedding constraint; got q = {})",
            format_rational(q)
        )));
    }
    let ratio = rat(3, 2) * (rat(1, 2) - Rational::one() / q);
    // ratio in (0, 1/2); smallest integer p >= 4 with p*ratio >= 1, so that
    // alpha = p*ratio - 1 >= 0 (alpha < p/2 - 1 holds since ratio < 1/2).
    let mut p = rat(4, 1);
    while &p * &ratio < Rational::one() {
        p += Rational::one();
    }
    let alpha = &p * &ratio - Rational::one();
    let beta = rat(1, 2) + rat(3, 4) / q;
    let trace_index = Rational::one() - rat(2, 1) * &ratio - rat(3, 1) / q;
    Ok(NseWeakSetting { q: q.clone(), p, alpha, beta, trace_index })
}

/// Builds the single-term `Setting` associated with [`nse_weak_setting`]
/// (`rho = 1`, `ell = 2`), for which the excess is `1/4` independently of `q`.
pub fn nse_weak_setting_as_setting(q: &Rational) -> Result<Setting, CriticalityError> {
    let ws = nse_weak_setting(q)?;
    Setting::new(
        ws.p,
        ws.alpha,
        vec![NonlinearityTerm::new(Rational::one(), ws.beta)?],
        rat(2, 1),
        SplitMode::Coupled,
    )
}

/// Holder-interpolation exponent governing the `T^exc` factor in the
/// embedding lemma; equals [`excess_per_term`] under the lemma hypothesis
/// `beta <= 1 - (rho/(rho+1)) (1+alpha)/p`.
pub fn holder_gap_exponent(
    term: &NonlinearityTerm,
    p: &Rational,
    alpha: &Rational,
) -> Result<Rational, CriticalityError> {
    let ratio = (Rational::one() + alpha) / p;
    let bound = Rational::one() - &term.rho / (&term.rho + Rational::one()) * &ratio;
    if term.beta > bound {
        return Err(violated(format!(
            "beta <= 1 - (rho/(rho+1))(1+alpha)/p (got beta = {}, bound = {})",
            format_rational(&term.beta),
            format_rational(&bound)
        )));
    }
    excess_per_term(term, p, alpha)
}

/// Right-hand side `C0 * T^(p*exc) * (1 + N^p)` of the lifetime tail bound.
/// The caller supplies the remaining `P(||u_t|| > N)` term.
pub fn lifetime_tail_bound(
    exc: &Rational,
    p: &Rational,
    n_level: f64,
    t_horizon: f64,
    c0: f64,
) -> Result<f64, CriticalityError> {
    if exc.is_negative() {
        return Err(violated(format!("exc >= 0 (got exc = {})", format_rational(exc))));
    }
    if !(t_horizon > 0.0) {
        return Err(violated(format!("T > 0 (got T = {t_horizon})")));
    }
    if !(c0 > 0.0) {
        return Err(violated(format!("C0 > 0 (got C0 = {c0})")));
    }
    if n_level < 0.0 {
        return Err(violated(format!("N >= 0 (got N = {n_level})")));
    }
    let p_f = p.to_f64().expect("p is finite");
    let rate = (p * exc).to_f64().expect("p*exc is finite");
    Ok(c0 * t_horizon.powf(rate) * (1.0 + n_level.powf(p_f)))
}

/// One row of the NSE dimension-bounds table, exact in rationals.
#[derive(Debug, Clone)]
pub struct NseTableRow {
    pub energy_space: String,
    pub ell: Rational,
    pub spatial_regularity: Rational,
    pub exc: Rational,
    pub dimension_bound: Rational,
}

/// The two NSE table rows: the `L^2_t(H^1)` energy row and the supercritical
/// Serrin row evaluated at `(p0, q0)`.
pub fn nse_table(p0: &Rational, q0: &Rational) -> Result<Vec<NseTableRow>, CriticalityError> {
    // Row 1: energy space L^2_t(H^1), regularity 1 - 3/2 relative to the
    // critical Sobolev threshold -1; Exc = (1/2)(-1/2 + 1).
    let reg1 = Rational::one() - rat(3, 2);
    let exc1 = rat(1, 2) * (&reg1 - rat(-1, 1));
    let row1 = NseTableRow {
        energy_space: "L^2_t(H^1)".to_string(),
        ell: rat(2, 1),
        spatial_regularity: reg1,
        exc: exc1.clone(),
        dimension_bound: Rational::one() - rat(2, 1) * exc1,
    };
    // Row 2: energy space L^p0_t(L^q0), regularity -3/q0; the bound equals
    // the Serrin exponent delta0 at gamma0 = 0.
    let reg2 = -rat(3, 1) / q0;
    let exc2 = rat(1, 2) * (&reg2 + Rational::one());
    let (delta0, _) = serrin_delta(p0, q0, &Rational::zero())?;
    let bound2 = Rational::one() - p0 * &exc2;
    debug_assert_eq!(bound2, delta0);
    let row2 = NseTableRow {
        energy_space: format!("L^{}_t(L^{})", format_rational(p0), format_rational(q0)),
        ell: p0.clone(),
        spatial_regularity: reg2,
        exc: exc2,
        dimension_bound: bound2,
    };
    Ok(vec![row1, row2])
}
