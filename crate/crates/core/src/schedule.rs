//! Step-size and regularization schedules.
//!
//! Online: `eta_t = eta_bar (t + t0)^-theta1`, `lambda_t = lambda_bar (t + t0)^-theta2`.
//! Finite horizon: `eta_t = eta1 T^-theta3`, `lambda_t = lambda1 T^-theta4` for `t <= T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which error functional a theorem controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Excess prediction risk, `alpha = 1/2`.
    Prediction,
    /// RKHS-norm error, `alpha = 0`.
    Estimation,
}

impl Target {
    pub fn alpha(self) -> Alpha {
        match self {
            Target::Prediction => Alpha::Half,
            Target::Estimation => Alpha::Zero,
        }
    }
}

/// Exponent of `C` in the error functional `|(H - H_dag) C^alpha|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alpha {
    Zero,
    Half,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::Zero => 0.0,
            Alpha::Half => 0.5,
        }
    }

    pub fn from_value(a: f64) -> Result<Self> {
        if a == 0.0 {
            Ok(Alpha::Zero)
        } else if a == 0.5 {
            Ok(Alpha::Half)
        } else {
            Err(Error::Domain(format!("alpha must be 0 or 0.5, got {a}")))
        }
    }
}

/// Expectation bounds versus high-probability bounds; they pick different exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Expectation,
    HighProbability,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Online,
    Finite { horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineSchedule {
    pub theta1: f64,
    pub theta2: f64,
    pub eta_bar: f64,
    pub lambda_bar: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteHorizonSchedule {
    pub theta3: f64,
    pub theta4: f64,
    pub eta1: f64,
    pub lambda1: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Online(OnlineSchedule),
    Finite(FiniteHorizonSchedule),
}

/// Both settings written as `eta_bar (t + t0)^-theta1`, `lambda_bar (t + t0)^-theta2`.
/// A finite-horizon schedule maps to `theta1 = theta2 = t0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnifiedParams {
    pub eta_bar: f64,
    pub lambda_bar: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub t0: f64,
}

impl UnifiedParams {
    pub fn eta(&self, t: usize) -> f64 {
        self.eta_bar * (t as f64 + self.t0).powf(-self.theta1)
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.lambda_bar * (t as f64 + self.t0).powf(-self.theta2)
    }
}

/// A failed hypothesis. `margin` is signed so that negative means violated.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    pub margin: f64,
}

/// A hypothesis that `validate` does not decide.
#[derive(Debug, Clone, PartialEq)]
pub struct UncheckedCondition {
    pub constraint: &'static str,
    pub reason: &'static str,
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl OnlineSchedule {
    pub fn new(theta1: f64, theta2: f64, eta_bar: f64, lambda_bar: f64, t0: f64) -> Result<Self> {
        if !open_unit(theta1) || !open_unit(theta2) {
            return Err(Error::Range(format!(
                "online exponents must lie in (0, 1), got theta1={theta1}, theta2={theta2}"
            )));
        }
        if !positive(eta_bar) || !positive(lambda_bar) || !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::Range(format!(
                "need eta_bar > 0, lambda_bar > 0, t0 >= 0, got {eta_bar}, {lambda_bar}, {t0}"
            )));
        }
        Ok(OnlineSchedule {
            theta1,
            theta2,
            eta_bar,
            lambda_bar,
            t0,
        })
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.eta_bar * (t as f64 + self.t0).powf(-self.theta1)
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.lambda_bar * (t as f64 + self.t0).powf(-self.theta2)
    }
}

impl FiniteHorizonSchedule {
    pub fn new(theta3: f64, theta4: f64, eta1: f64, lambda1: f64, horizon: usize) -> Result<Self> {
        if !open_unit(theta3) || !positive(theta4) {
            return Err(Error::Range(format!(
                "need theta3 in (0, 1) and theta4 > 0, got theta3={theta3}, theta4={theta4}"
            )));
        }
        if !positive(eta1) || !positive(lambda1) {
            return Err(Error::Range(format!(
                "need eta1 > 0 and lambda1 > 0, got {eta1}, {lambda1}"
            )));
        }
        if horizon < 2 {
            return Err(Error::Range(format!(
                "finite horizon must be at least 2, got {horizon}"
            )));
        }
        Ok(FiniteHorizonSchedule {
            theta3,
            theta4,
            eta1,
            lambda1,
            horizon,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta1 * (self.horizon as f64).powf(-self.theta3)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda1 * (self.horizon as f64).powf(-self.theta4)
    }

    /// Upper limit on `eta1` that the expectation bounds additionally impose,
    /// given the fourth-moment constant `c` of the input law.
    pub fn moment_step_bound(&self, kappa_sq: f64, c: f64) -> f64 {
        1.0 / (6.0 * c * kappa_sq * (1.0 + 1.0 / (2.0 * std::f64::consts::E * self.theta3)))
    }

    /// Same schedule at a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.theta3, self.theta4, self.eta1, self.lambda1, horizon)
    }
}

impl Schedule {
    pub fn step_params(&self, t: usize) -> Result<(f64, f64)> {
        step_params(self, t)
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            Schedule::Online(_) => None,
            Schedule::Finite(f) => Some(f.horizon),
        }
    }

    pub fn unified(&self) -> UnifiedParams {
        match self {
            Schedule::Online(o) => UnifiedParams {
                eta_bar: o.eta_bar,
                lambda_bar: o.lambda_bar,
                theta1: o.theta1,
                theta2: o.theta2,
                t0: o.t0,
            },
            Schedule::Finite(f) => UnifiedParams {
                eta_bar: f.eta(),
                lambda_bar: f.lambda(),
                theta1: 0.0,
                theta2: 0.0,
                t0: 0.0,
            },
        }
    }

    /// The `lambda_0` that anchors the initial-error and drift terms of the
    /// error decomposition: `lambda_bar t0^-theta2` online (infinite when
    /// `t0 = 0`), the constant `lambda` for a finite horizon.
    pub fn lambda0(&self) -> f64 {
        match self {
            Schedule::Online(o) => {
                if o.t0 > 0.0 {
                    o.lambda_bar * o.t0.powf(-o.theta2)
                } else {
                    f64::INFINITY
                }
            }
            Schedule::Finite(f) => f.lambda(),
        }
    }

    /// Exponents for reporting: `(theta1, theta2)` or `(theta3, theta4)`.
    pub fn exponents(&self) -> (f64, f64) {
        match self {
            Schedule::Online(o) => (o.theta1, o.theta2),
            Schedule::Finite(f) => (f.theta3, f.theta4),
        }
    }

    pub fn validate(&self, kappa_sq: f64, r: f64) -> Vec<Violation> {
        validate(self, kappa_sq, r)
    }

    pub fn unchecked_conditions(&self) -> Vec<UncheckedCondition> {
        match self {
            Schedule::Online(_) => vec![UncheckedCondition {
                constraint: "c4_t0_bound",
                reason: "cannot verify: constant not computable",
            }],
            Schedule::Finite(_) => vec![UncheckedCondition {
                constraint: "eta1_moment_bound",
                reason: "depends on the input fourth-moment constant; see FiniteHorizonSchedule::moment_step_bound",
            }],
        }
    }
}

pub fn step_params(s: &Schedule, t: usize) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(Error::Range("step index starts at 1".into()));
    }
    match s {
        Schedule::Online(o) => Ok((o.eta(t), o.lambda(t))),
        Schedule::Finite(f) => {
            if t > f.horizon {
                Err(Error::Range(format!(
                    "step {t} beyond finite horizon {}",
                    f.horizon
                )))
            } else {
                Ok((f.eta(), f.lambda()))
            }
        }
    }
}

/// Lists every checkable theorem hypothesis that fails.
pub fn validate(s: &Schedule, kappa_sq: f64, r: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |constraint: &'static str, margin: f64, strict: bool| {
        let ok = if strict { margin > 0.0 } else { margin >= 0.0 };
        if !ok {
            out.push(Violation { constraint, margin });
        }
    };
    match s {
        Schedule::Online(o) => {
            let el = o.eta_bar * o.lambda_bar;
            check(
                "t0_step_bound",
                (o.t0 + 1.0).powf(o.theta1) - o.eta_bar * (kappa_sq + o.lambda_bar),
                false,
            );
            check("t0_log_bound", o.t0 - (1.0 / o.theta1).exp(), false);
            let sum_gap = (o.theta1 + o.theta2 - 1.0).abs();
            check(
                "theta_sum",
                if sum_gap <= 1e-12 { 0.0 } else { -sum_gap },
                false,
            );
            check("etalambda_product", el - o.theta2 * r.min(1.0), true);
            check(
                "etalambda_highprob",
                el - o.theta1.max(2.0 * o.theta1 - 0.5),
                true,
            );
        }
        Schedule::Finite(f) => {
            check("eta1_bound", 1.0 - f.eta1 * (kappa_sq + f.lambda1), false);
        }
    }
    out
}

/// Online exponent `theta1` for a theorem.
pub fn online_theta1(r: f64, s: f64, target: Target, regime: Regime) -> f64 {
    match (target, regime) {
        (Target::Prediction, _) => ((2.0 * r + 1.0) / (2.0 * r + 2.0)).min(2.0 / 3.0),
        (Target::Estimation, Regime::Expectation) => {
            ((s + 2.0 * r) / (1.0 + s + 2.0 * r)).min((2.0 + s) / (3.0 + s))
        }
        (Target::Estimation, Regime::HighProbability) => {
            if r < (1.0 - s) / 2.0 {
                (1.0 + 2.0 * r + s) / (3.0 + 2.0 * r + s)
            } else {
                let rm = r.min(1.0);
                (2.0 * rm + s) / (1.0 + 2.0 * rm + s)
            }
        }
    }
}

/// Finite-horizon `(theta3, smallest admissible theta4)` for a theorem.
pub fn finite_thetas(r: f64, s: f64, target: Target, regime: Regime) -> (f64, f64) {
    match (target, regime) {
        (Target::Prediction, _) => {
            let th3 = (2.0 * r + 1.0) / (2.0 * r + 2.0);
            (th3, th3 / (2.0 * r + 1.0).min(2.0))
        }
        (Target::Estimation, Regime::Expectation) => {
            let den = 1.0 + 2.0 * r + s;
            ((2.0 * r + s) / den, 2.0 * r / (den * (2.0 * r).min(2.0)))
        }
        (Target::Estimation, Regime::HighProbability) => {
            if r < (1.0 - s) / 2.0 {
                let den = 3.0 + 2.0 * r + s;
                ((1.0 + 2.0 * r + s) / den, 2.0 / den)
            } else {
                let den = 1.0 + 2.0 * r + s;
                ((2.0 * r + s) / den, r / (den * r.min(1.0)))
            }
        }
    }
}

/// Error decay `T^exponent (log T)^log_power` promised by a theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTarget {
    pub exponent: f64,
    pub log_power: i32,
}

/// Rate of the theorem whose exponent choices [`theorem_preset_with`] makes.
pub fn theorem_rate(
    r: f64,
    s: f64,
    target: Target,
    setting: Setting,
    regime: Regime,
) -> RateTarget {
    let log_if_s1 = if s == 1.0 { 1 } else { 0 };
    let finite = matches!(setting, Setting::Finite { .. });
    let (exponent, log_power) = match (target, regime) {
        (Target::Prediction, _) => {
            let th = if finite {
                finite_thetas(r, s, target, regime).0
            } else {
                online_theta1(r, s, target, regime)
            };
            (-th, log_if_s1)
        }
        (Target::Estimation, Regime::Expectation) => {
            if finite {
                (-2.0 * r / (1.0 + 2.0 * r + s), 0)
            } else {
                (-(2.0 * r / (1.0 + s + 2.0 * r)).min(2.0 / (3.0 + s)), 0)
            }
        }
        (Target::Estimation, Regime::HighProbability) => {
            if r < (1.0 - s) / 2.0 {
                (-4.0 * r / (3.0 + 2.0 * r + s), 2)
            } else {
                let rr = if finite { r } else { r.min(1.0) };
                (-2.0 * rr / (1.0 + 2.0 * rr + s), 0)
            }
        }
    };
    RateTarget {
        exponent,
        log_power,
    }
}

/// Default `lambda1` for finite-horizon presets.
pub const PRESET_LAMBDA1: f64 = 0.1;
/// Fraction of the `eta1 (kappa^2 + lambda1) <= 1` budget used by presets.
pub const PRESET_ETA1_FILL: f64 = 0.99;

/// Expectation-regime preset with `kappa^2 = 1`.
pub fn theorem_presets(r: f64, s: f64, target: Target, setting: Setting) -> Result<Schedule> {
    theorem_preset_with(r, s, target, setting, Regime::Expectation, 1.0)
}

/// Schedule realizing a theorem's exponent choices with every checkable
/// hypothesis satisfied.
///
/// Online: `eta_bar = 1`, `lambda_bar` clears all product conditions by 5%,
/// `t0` is the smallest integer meeting both lower bounds. Finite:
/// `lambda1 = 0.1`, `eta1 = 0.99 / (kappa^2 + lambda1)`.
pub fn theorem_preset_with(
    r: f64,
    s: f64,
    target: Target,
    setting: Setting,
    regime: Regime,
    kappa_sq: f64,
) -> Result<Schedule> {
    if !(r > 0.0 && r.is_finite()) || !(s > 0.0 && s <= 1.0) {
        return Err(Error::Range(format!(
            "presets need r > 0 and s in (0, 1], got r={r}, s={s}"
        )));
    }
    if !positive(kappa_sq) {
        return Err(Error::Range(format!(
            "kappa^2 must be positive, got {kappa_sq}"
        )));
    }
    match setting {
        Setting::Online => {
            let theta1 = online_theta1(r, s, target, regime);
            let theta2 = 1.0 - theta1;
            let eta_bar = 1.0;
            let lambda_bar = (1.05 * theta2 * r.min(1.0))
                .max(1.05 * theta1)
                .max(1.05 * (2.0 * theta1 - 0.5))
                / eta_bar;
            let mut t0 = (1.0 / theta1).exp().ceil();
            while (t0 + 1.0).powf(theta1) < eta_bar * (kappa_sq + lambda_bar) {
                t0 += 1.0;
            }
            Ok(Schedule::Online(OnlineSchedule::new(
                theta1, theta2, eta_bar, lambda_bar, t0,
            )?))
        }
        Setting::Finite { horizon } => {
            let (theta3, theta4) = finite_thetas(r, s, target, regime);
            let lambda1 = PRESET_LAMBDA1;
            let eta1 = PRESET_ETA1_FILL / (kappa_sq + lambda1);
            Ok(Schedule::Finite(FiniteHorizonSchedule::new(
                theta3, theta4, eta1, lambda1, horizon,
            )?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn online_step_params_match_closed_form() {
        let s = Schedule::Online(OnlineSchedule::new(2.0 / 3.0, 1.0 / 3.0, 1.0, 1.0, 7.0).unwrap());
        let (eta, lambda) = s.step_params(1).unwrap();
        assert!(close(eta, 0.25), "eta_1 = {eta}");
        assert!(close(lambda, 0.5), "lambda_1 = {lambda}");
    }

    #[test]
    fn finite_step_params_are_constant() {
        let s = Schedule::Finite(FiniteHorizonSchedule::new(0.75, 0.5, 1.0, 1.0, 16).unwrap());
        for t in 1..=16 {
            let (eta, _) = s.step_params(t).unwrap();
            assert!(close(eta, 0.125), "t={t}: eta={eta}");
        }
    }

    #[test]
    fn step_index_out_of_range() {
        let s = Schedule::Finite(FiniteHorizonSchedule::new(0.75, 0.5, 1.0, 1.0, 16).unwrap());
        assert!(matches!(s.step_params(0), Err(Error::Range(_))));
        assert!(matches!(s.step_params(17), Err(Error::Range(_))));
    }

    #[test]
    fn validate_t0_example_satisfied() {
        let s = Schedule::Online(OnlineSchedule::new(2.0 / 3.0, 1.0 / 3.0, 1.0, 1.0, 2.0).unwrap());
        let v = validate(&s, 1.0, 0.5);
        assert!(v.iter().all(|x| x.constraint != "t0_step_bound"), "{v:?}");
    }

    #[test]
    fn validate_reports_etalambda_product() {
        let s =
            Schedule::Online(OnlineSchedule::new(2.0 / 3.0, 1.0 / 3.0, 1.0, 0.2, 10.0).unwrap());
        let v = validate(&s, 1.0, 1.0);
        let hit = v
            .iter()
            .find(|x| x.constraint == "etalambda_product")
            .expect("violation expected");
        assert!(close(hit.margin, 0.2 - 1.0 / 3.0), "margin {}", hit.margin);
    }

    #[test]
    fn validate_reports_eta1_bound() {
        let s = Schedule::Finite(FiniteHorizonSchedule::new(0.5, 0.5, 0.9, 0.2, 100).unwrap());
        let v = validate(&s, 1.0, 0.5);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].constraint, "eta1_bound");
        assert!(close(v[0].margin, 1.0 - 1.08));
    }

    #[test]
    fn preset_thm1_half_one() {
        let Schedule::Online(o) =
            theorem_presets(0.5, 1.0, Target::Prediction, Setting::Online).unwrap()
        else {
            panic!("expected online schedule")
        };
        assert!(
            close(o.theta1, 2.0 / 3.0) && close(o.theta2, 1.0 / 3.0),
            "{o:?}"
        );
        assert!(close(o.lambda_bar, 0.875), "{o:?}");
        assert_eq!(o.t0, 5.0);
    }

    #[test]
    fn preset_thm2_half_half() {
        let Schedule::Online(o) =
            theorem_presets(0.5, 0.5, Target::Estimation, Setting::Online).unwrap()
        else {
            panic!("expected online schedule")
        };
        assert!(close(o.theta1, 0.6) && close(o.theta2, 0.4), "{o:?}");
    }

    #[test]
    fn preset_thm3_half_one() {
        let s = theorem_presets(
            0.5,
            1.0,
            Target::Prediction,
            Setting::Finite { horizon: 64 },
        )
        .unwrap();
        let Schedule::Finite(f) = s else {
            panic!("expected finite schedule")
        };
        assert!(close(f.theta3, 2.0 / 3.0), "{f:?}");
        assert!(close(f.theta4, 1.0 / 3.0), "{f:?}");
    }

    #[test]
    fn finite_schedule_has_no_drift_anchor_shift() {
        let s = theorem_presets(
            1.0,
            0.5,
            Target::Estimation,
            Setting::Finite { horizon: 64 },
        )
        .unwrap();
        assert_eq!(s.lambda0(), s.step_params(64).unwrap().1);
    }

    #[test]
    fn online_lambda0_is_infinite_without_offset() {
        let s = Schedule::Online(OnlineSchedule::new(0.5, 0.5, 1.0, 1.0, 0.0).unwrap());
        assert!(s.lambda0().is_infinite());
    }

    #[test]
    fn unchecked_conditions_name_c4() {
        let s = theorem_presets(0.5, 1.0, Target::Prediction, Setting::Online).unwrap();
        let u = s.unchecked_conditions();
        assert_eq!(u[0].reason, "cannot verify: constant not computable");
    }

    #[test]
    fn rate_targets_for_the_acceptance_settings() {
        let on = Setting::Online;
        let fin = Setting::Finite { horizon: 256 };
        let ex = Regime::Expectation;
        let t = theorem_rate(0.5, 1.0, Target::Prediction, on, ex);
        assert!(close(t.exponent, -2.0 / 3.0) && t.log_power == 1);
        assert!(close(
            theorem_rate(0.5, 0.5, Target::Estimation, on, ex).exponent,
            -0.4
        ));
        assert!(close(
            theorem_rate(1.0, 1.0 / 3.0, Target::Prediction, fin, ex).exponent,
            -0.75
        ));
        assert_eq!(
            theorem_rate(1.0, 1.0 / 3.0, Target::Prediction, fin, ex).log_power,
            0
        );
        assert!(close(
            theorem_rate(0.5, 0.5, Target::Estimation, fin, ex).exponent,
            -0.4
        ));
        let hp = theorem_rate(0.1, 0.5, Target::Estimation, on, Regime::HighProbability);
        assert!(close(hp.exponent, -0.4 / 3.7) && hp.log_power == 2);
    }
}
