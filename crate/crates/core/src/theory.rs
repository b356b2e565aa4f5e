//! Convergence constants and hypothesis checks for the ADMM rate bound.
//!
//! All quantities are `f64`; they describe the problem, not the iterates.

use crate::error::{CadenError, Result};
use crate::losses::LocalLoss;
use crate::solvers::{subproblem_gradient, LocalSubproblem};
use crate::topology::{SpectralSummary, Topology};
use crate::vec_ops::{midpoint, norm_sq};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    pub lipschitz: f64,
    pub spectral: SpectralSummary,
    pub p_min: f64,
    /// Per-iteration contraction of the local solver on squared gradient norms.
    pub r: f64,
    pub tau: usize,
    pub mu_z: f64,
    pub mu_y: f64,
}

impl TheoryInputs {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("lipschitz", self.lipschitz),
            ("lambda_max", self.spectral.lambda_max),
            ("lambda_min", self.spectral.lambda_min),
            ("mu_z", self.mu_z),
            ("mu_y", self.mu_y),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CadenError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.p_min > 0.0 && self.p_min <= 1.0) {
            return Err(CadenError::InvalidParameter(format!("p_min must lie in (0, 1], got {}", self.p_min)));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(CadenError::NoContraction { r: self.r });
        }
        if self.spectral.d_max == 0 {
            return Err(CadenError::InvalidParameter("graph has no edges".into()));
        }
        Ok(())
    }

    pub fn r_tau(&self) -> f64 {
        self.r.powi(self.tau as i32)
    }

    /// Upper bound on `r^τ` required by the rate bound.
    pub fn r_tau_bound(&self) -> f64 {
        r_tau_bound(&self.spectral, self.p_min, self.mu_z)
    }

    /// `Ĉ₁..Ĉ₄` in closed form.
    pub fn hat_constants(&self) -> [f64; 4] {
        let p = self.p_min;
        let rt = self.r_tau();
        let s = &self.spectral;
        let c1 = 1.0 - 4.0 * rt / p;
        let c2 = (4.0 + 3.0 * p * p - 6.0 * p) / (p * p);
        let c3 = 2.0 / p;
        let c4 = 6.0 * s.lambda_max / (s.lambda_min * s.lambda_min)
            * (rt * (4.0 * p - 8.0 * rt) * (4.0 + 3.0 * p * p - 6.0 * p) / (p * p * (p - 4.0 * rt))
                + (2.0 + p * p - 3.0 * p) / (p * self.mu_y * self.mu_y));
        [c1, c2, c3, c4]
    }

    /// `Ĉ₁..Ĉ₄` from the slack-parameterized forms with `ξ = p/(2(1−p))`.
    ///
    /// Agrees with [`Self::hat_constants`] algebraically; at `p = 1` the limit `ξ → ∞` is taken.
    pub fn hat_constants_slack_form(&self) -> [f64; 4] {
        let p = self.p_min;
        let rt = self.r_tau();
        let s = &self.spectral;
        // (1−p)(1+ξ), (1−p)(1+1/ξ) and 1/(p+pξ−ξ) at the chosen ξ.
        let (grow, inv_grow, c3) = if p >= 1.0 {
            (0.0, 0.0, 2.0 / p)
        } else {
            let xi = p / (2.0 * (1.0 - p));
            ((1.0 - p) * (1.0 + xi), (1.0 - p) * (1.0 + 1.0 / xi), 1.0 / (p + p * xi - xi))
        };
        let denom = if p >= 1.0 { p / 2.0 } else { 1.0 - grow };
        let c1 = 1.0 - 2.0 * rt / denom;
        let c2 = 1.0 + inv_grow / denom;
        let c4 = 6.0 * s.lambda_max / (s.lambda_min * s.lambda_min * self.mu_y * self.mu_y)
            * (2.0 * rt * self.mu_y * self.mu_y * c2 * (1.0 + c1) / c1 + inv_grow);
        [c1, c2, c3, c4]
    }
}

/// `λ_min² p / (4608 d⁴ λ_max μ_z)`
pub fn r_tau_bound(spectral: &SpectralSummary, p_min: f64, mu_z: f64) -> f64 {
    let d = spectral.d_max as f64;
    spectral.lambda_min.powi(2) * p_min / (4608.0 * d.powi(4) * spectral.lambda_max * mu_z)
}

/// Which hypotheses of the rate bound hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Conditions {
    /// `μ_z ≥ 1 + 2L`
    pub mu_z_ok: bool,
    /// `μ_y ≥ 1152 d² μ_z λ_max / (λ_min² p)`
    pub mu_y_ok: bool,
    /// `r^τ` below [`r_tau_bound`].
    pub tau_ok: bool,
    /// `Ĉ₁ ∈ (0, 1)`
    pub chat1_ok: bool,
    /// `Ĉ₄ d² < 1`
    pub chat4_ok: bool,
    pub c3_positive: bool,
    pub c4_positive: bool,
}

impl Conditions {
    pub fn hypotheses_met(&self) -> bool {
        self.mu_z_ok && self.mu_y_ok && self.tau_ok
    }

    pub fn all_met(&self) -> bool {
        self.hypotheses_met() && self.chat1_ok && self.chat4_ok && self.c3_positive && self.c4_positive
    }

    pub fn failures(&self) -> Vec<&'static str> {
        [
            (self.mu_z_ok, "mu_z"),
            (self.mu_y_ok, "mu_y"),
            (self.tau_ok, "tau"),
            (self.chat1_ok, "chat1"),
            (self.chat4_ok, "chat4"),
            (self.c3_positive, "c3"),
            (self.c4_positive, "c4"),
        ]
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, n)| n)
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// `C₁..C₈`
    pub c: [f64; 8],
    /// `Ĉ₁..Ĉ₄`
    pub chat: [f64; 4],
    pub conditions: Conditions,
}

impl TheoryConstants {
    pub fn c1(&self) -> f64 {
        self.c[0]
    }

    pub fn c2(&self) -> f64 {
        self.c[1]
    }

    /// `(C₁ L⁰_gap + C₂ ‖e⁰‖²) / T`
    pub fn rate_bound(&self, lagrangian_gap: f64, e0: f64, rounds: usize) -> f64 {
        (self.c1() * lagrangian_gap + self.c2() * e0) / rounds.max(1) as f64
    }
}

/// Preconditions of the constant display failed; nothing was evaluated past `Ĉ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionViolation {
    pub chat: [f64; 4],
    pub chat4_d2: f64,
    pub conditions: Conditions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TheoryReport {
    Constants(TheoryConstants),
    Violation(ConditionViolation),
}

impl TheoryReport {
    pub fn conditions(&self) -> &Conditions {
        match self {
            TheoryReport::Constants(c) => &c.conditions,
            TheoryReport::Violation(v) => &v.conditions,
        }
    }

    pub fn constants(&self) -> Option<&TheoryConstants> {
        match self {
            TheoryReport::Constants(c) => Some(c),
            TheoryReport::Violation(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterChoice {
    pub mu_z: f64,
    pub mu_y: f64,
    pub tau: usize,
}

/// Smallest penalty, dual step and local iteration count satisfying the hypotheses.
pub fn select_parameters(lipschitz: f64, spectral: &SpectralSummary, p_min: f64, r: f64) -> Result<ParameterChoice> {
    if !(r < 1.0) {
        return Err(CadenError::NoContraction { r });
    }
    if !(r > 0.0) || !(lipschitz >= 0.0) || !(p_min > 0.0 && p_min <= 1.0) {
        return Err(CadenError::InvalidParameter(format!(
            "need r in (0,1), L >= 0, p_min in (0,1]; got r={r}, L={lipschitz}, p_min={p_min}"
        )));
    }
    if spectral.d_max == 0 || !(spectral.lambda_min > 0.0) {
        return Err(CadenError::Disconnected { lambda2: spectral.lambda_min });
    }
    let d = spectral.d_max as f64;
    let mu_z = 2.0 * lipschitz + 1.0;
    let mu_y = 1152.0 * d * d * spectral.lambda_max * mu_z / (spectral.lambda_min.powi(2) * p_min);
    let tau = (r_tau_bound(spectral, p_min, mu_z).ln() / r.ln()).ceil().max(1.0) as usize;
    Ok(ParameterChoice { mu_z, mu_y, tau })
}

fn hypothesis_flags(inputs: &TheoryInputs) -> Conditions {
    let s = &inputs.spectral;
    let d = s.d_max as f64;
    let mu_y_min = 1152.0 * d * d * inputs.mu_z * s.lambda_max / (s.lambda_min.powi(2) * inputs.p_min);
    // Compared in log space; the ceiling in `select_parameters` is exact there.
    let tau_ok = inputs.tau as f64 * inputs.r.ln() <= inputs.r_tau_bound().ln() + 1e-12;
    Conditions {
        mu_z_ok: inputs.mu_z >= 1.0 + 2.0 * inputs.lipschitz,
        mu_y_ok: inputs.mu_y >= mu_y_min * (1.0 - 1e-12),
        tau_ok,
        ..Conditions::default()
    }
}

/// Evaluates `Ĉ₁..Ĉ₄`, then `C₃..C₈`, then `C₁ = max(C₈/C₃, C₇/C₄)` and `C₂ = C₆ + C₁C₅`.
///
/// When `Ĉ₁ ≤ 0` or `Ĉ₄d² ≥ 1` a [`ConditionViolation`] is returned instead.
pub fn compute_constants(inputs: &TheoryInputs) -> Result<TheoryReport> {
    inputs.validate()?;
    let mut cond = hypothesis_flags(inputs);
    let chat = inputs.hat_constants();
    let [h1, h2, h3, h4] = chat;
    let s = &inputs.spectral;
    let d = s.d_max as f64;
    let d2 = d * d;
    let chat4_d2 = h4 * d2;
    cond.chat1_ok = h1 > 0.0 && h1 < 1.0;
    cond.chat4_ok = chat4_d2 < 1.0;
    if !(h1 > 0.0) || !(chat4_d2 < 1.0) || chat.iter().any(|v| !v.is_finite()) {
        return Ok(TheoryReport::Violation(ConditionViolation { chat, chat4_d2, conditions: cond }));
    }

    let (mu_z, mu_y, l) = (inputs.mu_z, inputs.mu_y, inputs.lipschitz);
    let rt = inputs.r_tau();
    let spec = s.lambda_max / (s.lambda_min * s.lambda_min);
    let gap = 1.0 - chat4_d2;
    // The two trailing terms of C5 and C6 carry (1 − Ĉ₄d), not (1 − Ĉ₄d²).
    let gap_linear = 1.0 - h4 * d;
    let z_coupling = 36.0 * spec / (mu_y * mu_y) + h4;
    let x_coupling = mu_z * mu_z * (d2 * mu_z * mu_z + l * l);

    let c3 = mu_z
        - 2.0 * rt * h2 / h1
        - 2.0 * rt * h2 * mu_y * mu_y * mu_z * mu_z / (h1 * gap) * z_coupling
        - mu_z * mu_z * mu_y / gap * z_coupling;
    let c4 = inputs.p_min * (2.0 * mu_z - 1.0 - 2.0 * l) / 4.0
        - 36.0 * rt * h2 * spec * x_coupling / (h1 * gap)
        - 18.0 * spec * x_coupling / (mu_y * gap);
    let c5 = 1.0 / h1
        + 12.0 * rt * h2 * spec * (1.0 + h3) / (h1 * h1 * gap)
        + 6.0 * spec * (1.0 + h3) / (h1 * mu_y * gap_linear);
    let c6 = 4.0 / h1
        + 48.0 * rt * h2 * spec * (1.0 + h3) / (h1 * h1 * gap)
        + 6.0 * spec * (1.0 + h3) * (8.0 * mu_z * d + 1.0) / (h1 * mu_y * gap_linear);
    let c7 = 108.0 * rt * h2 * spec * x_coupling / (h1 * gap)
        + 2.0 * l * l
        + 8.0 * mu_z * mu_z * d2
        + 18.0 * spec * x_coupling / (mu_y * gap) * (8.0 * mu_z * mu_z * d2 + 1.0);
    let c8 = 8.0 * rt * h2 / h1
        + 8.0 * rt * h2 * mu_y * mu_y * mu_z * mu_z / (h1 * gap) * z_coupling
        + mu_z * mu_z * (8.0 * mu_z * mu_z * d + 1.0) / gap * z_coupling;
    let c1 = (c8 / c3).max(c7 / c4);
    let c2 = c6 + c1 * c5;

    cond.c3_positive = c3 > 0.0;
    cond.c4_positive = c4 > 0.0;
    Ok(TheoryReport::Constants(TheoryConstants { c: [c1, c2, c3, c4, c5, c6, c7, c8], chat, conditions: cond }))
}

/// `TheoryInputs` at the selected parameters.
pub fn inputs_from_selection(lipschitz: f64, spectral: SpectralSummary, p_min: f64, r: f64) -> Result<TheoryInputs> {
    let ParameterChoice { mu_z, mu_y, tau } = select_parameters(lipschitz, &spectral, p_min, r)?;
    Ok(TheoryInputs { lipschitz, spectral, p_min, r, tau, mu_z, mu_y })
}

/// `d⁴ L λ_max / (λ_min² p)`
pub fn claimed_rate(lipschitz: f64, spectral: &SpectralSummary, p_min: f64) -> f64 {
    (spectral.d_max as f64).powi(4) * lipschitz * spectral.lambda_max / (spectral.lambda_min.powi(2) * p_min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub lipschitz: f64,
    pub spectral: SpectralSummary,
    pub p_min: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub claimed: f64,
}

impl ScalingPoint {
    pub fn ratio(&self) -> Option<f64> {
        self.c1.map(|c| c / self.claimed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln C₁` on `ln(claimed)` over points with `C₁ > 0`.
    pub log_slope: Option<f64>,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
}

impl ScalingReport {
    pub fn ratio_spread(&self) -> Option<f64> {
        Some(self.ratio_max? / self.ratio_min?)
    }
}

/// Selects parameters and evaluates `C₁, C₂` at every `(graph, L, p)` point.
pub fn parameter_scaling_check(
    spectra: &[SpectralSummary],
    lipschitz: &[f64],
    p_min: &[f64],
    r: f64,
) -> Result<ScalingReport> {
    let mut points = Vec::new();
    for s in spectra {
        for &l in lipschitz {
            for &p in p_min {
                let inputs = inputs_from_selection(l, *s, p, r)?;
                let report = compute_constants(&inputs)?;
                let consts = report.constants();
                points.push(ScalingPoint {
                    lipschitz: l,
                    spectral: *s,
                    p_min: p,
                    c1: consts.map(|c| c.c1()),
                    c2: consts.map(|c| c.c2()),
                    claimed: claimed_rate(l, s, p),
                });
            }
        }
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|pt| pt.c1.filter(|&c| c > 0.0 && c.is_finite()).map(|c| (pt.claimed.ln(), c.ln())))
        .collect();
    let log_slope = (logs.len() >= 2).then(|| {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let ratios: Vec<f64> = points.iter().filter_map(ScalingPoint::ratio).filter(|r| *r > 0.0).collect();
    Ok(ScalingReport {
        log_slope: log_slope.filter(|s| s.is_finite()),
        ratio_min: ratios.iter().copied().reduce(f64::min),
        ratio_max: ratios.iter().copied().reduce(f64::max),
        points,
    })
}

/// `‖e⁰‖²`: squared local-Lagrangian gradients at `x⁰` with zero duals and midpoint anchors.
pub fn initial_error_e0<S: Scalar, L: LocalLoss<S>>(
    topology: &Topology,
    losses: &[L],
    x0: &[Vec<S>],
    mu_z: S,
) -> Result<S> {
    crate::error::check_dim(topology.num_agents(), losses.len())?;
    crate::error::check_dim(topology.num_agents(), x0.len())?;
    let mut total = S::zero();
    for (i, f) in losses.iter().enumerate() {
        let anchors = topology.neighbors(i).iter().map(|&j| midpoint(&x0[i], &x0[j])).collect();
        let sub = LocalSubproblem::new(f, vec![S::zero(); x0[i].len()], anchors, mu_z)?;
        total += norm_sq(&subproblem_gradient(&sub, &x0[i])?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Quadratic;

    fn k2() -> SpectralSummary {
        SpectralSummary { lambda_max: 2.0, lambda_min: 2.0, d_max: 1 }
    }

    #[test]
    fn selection_on_k2() {
        let ch = select_parameters(1.0, &k2(), 1.0, 0.5).unwrap();
        assert_eq!(ch.mu_z, 3.0);
        assert_eq!(ch.mu_y, 1728.0);
        // ln(4 / 27648) / ln(0.5) = 12.755...
        assert_eq!(ch.tau, 13);
        assert!(0.5f64.powi(ch.tau as i32) <= r_tau_bound(&k2(), 1.0, 3.0));
        assert!(0.5f64.powi(ch.tau as i32 - 1) > r_tau_bound(&k2(), 1.0, 3.0));
    }

    #[test]
    fn selection_rejects_missing_contraction() {
        assert!(matches!(select_parameters(1.0, &k2(), 1.0, 1.0), Err(CadenError::NoContraction { .. })));
        assert!(matches!(select_parameters(1.0, &k2(), 1.0, 1.5), Err(CadenError::NoContraction { .. })));
        assert!(select_parameters(1.0, &k2(), 0.0, 0.5).is_err());
    }

    #[test]
    fn selection_meets_hypotheses_on_grid() {
        for s in [k2(), SpectralSummary { lambda_max: 5.0, lambda_min: 0.38, d_max: 3 }] {
            for l in [0.5, 1.0, 4.0] {
                for p in [0.2, 0.5, 1.0] {
                    for r in [0.1, 0.5, 0.9] {
                        let inp = inputs_from_selection(l, s, p, r).unwrap();
                        assert!(hypothesis_flags(&inp).hypotheses_met(), "{s:?} {l} {p} {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn chat2_at_full_participation() {
        let inp = inputs_from_selection(1.0, k2(), 1.0, 0.5).unwrap();
        assert_eq!(inp.hat_constants()[1], 1.0);
        assert_eq!(inp.hat_constants()[2], 2.0);
    }

    #[test]
    fn slack_form_matches_closed_form() {
        for p in [0.1, 0.3, 0.7, 0.95, 1.0] {
            for tau in [3, 10, 40] {
                let inp = TheoryInputs {
                    lipschitz: 1.0,
                    spectral: SpectralSummary { lambda_max: 4.0, lambda_min: 1.0, d_max: 2 },
                    p_min: p,
                    r: 0.5,
                    tau,
                    mu_z: 3.0,
                    mu_y: 50.0,
                };
                let (a, b) = (inp.hat_constants(), inp.hat_constants_slack_form());
                for k in 0..4 {
                    assert!((a[k] - b[k]).abs() <= 1e-10 * (1.0 + a[k].abs()), "p={p} tau={tau} k={k}: {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn violation_reported_without_nan() {
        // r^τ = 0.5 > p/4 makes Ĉ₁ negative.
        let inp = TheoryInputs { lipschitz: 1.0, spectral: k2(), p_min: 1.0, r: 0.5, tau: 1, mu_z: 3.0, mu_y: 10.0 };
        match compute_constants(&inp).unwrap() {
            TheoryReport::Violation(v) => {
                assert!(!v.conditions.chat1_ok);
                assert!(!v.conditions.tau_ok);
                assert!(v.chat.iter().all(|c| !c.is_nan()));
            }
            other => panic!("expected violation, got {other:?}"),
        }
        // Ĉ₁ at exactly zero.
        let inp = TheoryInputs { r: 0.25, tau: 1, ..inp };
        assert!(matches!(compute_constants(&inp).unwrap(), TheoryReport::Violation(_)));
    }

    #[test]
    fn invalid_inputs_error() {
        let base = TheoryInputs { lipschitz: 1.0, spectral: k2(), p_min: 1.0, r: 0.5, tau: 13, mu_z: 3.0, mu_y: 1728.0 };
        assert!(compute_constants(&TheoryInputs { p_min: 0.0, ..base }).is_err());
        assert!(compute_constants(&TheoryInputs { r: 1.0, ..base }).is_err());
        assert!(compute_constants(&TheoryInputs { mu_y: -1.0, ..base }).is_err());
    }

    /// Independent transcription of the constant display for one point, term by term.
    #[test]
    fn constants_match_hand_transcription_on_k2() {
        let inp = inputs_from_selection(1.0, k2(), 1.0, 0.5).unwrap();
        let rep = compute_constants(&inp).unwrap();
        let c = rep.constants().expect("preconditions hold on K2");
        let rt = 0.5f64.powi(13);
        let (lmax, lmin, d, p, l, mz, my) = (2.0f64, 2.0f64, 1.0f64, 1.0f64, 1.0f64, 3.0f64, 1728.0f64);
        let h1 = 1.0 - 4.0 * rt / p;
        let h2 = 1.0;
        let h3 = 2.0;
        let h4 = 6.0 * lmax / lmin.powi(2) * (rt * (4.0 - 8.0 * rt) * 1.0 / (1.0 - 4.0 * rt));
        let g = 1.0 - h4 * d * d;
        let zc = 36.0 * lmax / (lmin.powi(2) * my * my) + h4;
        let c3 = mz - 2.0 * rt * h2 / h1 - 2.0 * rt * h2 * my * my * mz * mz / (h1 * g) * zc - mz * mz * my / g * zc;
        let xc = mz * mz * (d * d * mz * mz + l * l);
        let c4 = p * (2.0 * mz - 1.0 - 2.0 * l) / 4.0
            - 36.0 * rt * h2 * lmax * xc / (lmin.powi(2) * h1 * g)
            - 18.0 * lmax * xc / (lmin.powi(2) * my * g);
        let c5 = 1.0 / h1 + 12.0 * rt * h2 * lmax * (1.0 + h3) / (h1 * h1 * lmin.powi(2) * g)
            + 6.0 * lmax * (1.0 + h3) / (h1 * lmin.powi(2) * my * (1.0 - h4 * d));
        assert!((c.chat[3] - h4).abs() < 1e-15);
        assert!((c.c[2] - c3).abs() <= 1e-12 * c3.abs());
        assert!((c.c[3] - c4).abs() <= 1e-12 * c4.abs());
        assert!((c.c[4] - c5).abs() <= 1e-12 * c5.abs());
        assert!(c.conditions.hypotheses_met());
        assert!(c.conditions.chat1_ok && c.conditions.chat4_ok);
    }

    #[test]
    fn scaling_check_covers_grid() {
        let spectra = [k2(), SpectralSummary { lambda_max: 3.0, lambda_min: 1.0, d_max: 2 }];
        let rep = parameter_scaling_check(&spectra, &[1.0, 2.0], &[0.5, 1.0], 0.5).unwrap();
        assert_eq!(rep.points.len(), 8);
        assert!(rep.points.iter().all(|p| p.claimed > 0.0));
    }

    #[test]
    fn e0_examples() {
        let t = Topology::complete(2).unwrap();
        let f = vec![Quadratic::isotropic(vec![0.0]), Quadratic::isotropic(vec![2.0])];
        assert_eq!(initial_error_e0(&t, &f, &[vec![0.0], vec![2.0]], 3.0).unwrap(), 18.0);
        // Consensus at the global minimizer still leaves local gradients ±1 when φ = 0.
        assert_eq!(initial_error_e0(&t, &f, &[vec![1.0], vec![1.0]], 3.0).unwrap(), 2.0);
        let same = vec![Quadratic::isotropic(vec![1.0]), Quadratic::isotropic(vec![1.0])];
        assert_eq!(initial_error_e0(&t, &same, &[vec![1.0], vec![1.0]], 3.0).unwrap(), 0.0);
    }
}
