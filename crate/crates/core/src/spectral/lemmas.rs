//! Numeric oracles for the operator-product and step-size-sum bounds.
//!
//! Each oracle evaluates the left-hand side exactly in the diagonal universe
//! (an operator norm of a diagonal product is a maximum over eigenvalues) and
//! the right-hand side from the closed-form bound.

use std::fmt;
use std::str::FromStr;

use super::SpectralWorld;
use crate::error::{Error, Result};
use crate::schedule::{Schedule, UnifiedParams};

/// Relative slack for bounds that are tight up to floating-point rounding,
/// e.g. the step-size sums of a constant schedule.
const ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundId {
    /// `|C^b prod (I - eta_t (C + lambda_t))|` upper bound.
    L1_1,
    /// `|C^b prod (I - eta_t (C + lambda_t))^2|` upper bound, decay form.
    L1_2,
    /// `|C^b prod (I - eta_t (C + lambda_t))^2|` upper bound, bounded form.
    L1_3,
    /// Lower bound on `sum_{t=l}^m eta_t`.
    L2_1,
    /// Lower bound on `sum_{t=l}^m eta_t lambda_t`.
    L2_2,
    /// Lower bound on `sum_{t=1}^T eta_t`.
    L2_3,
    /// Lower bound on `sum_{t=1}^T eta_t lambda_t`.
    L2_4,
    /// Weighted sum of online decay factors against its polynomial rate.
    PA3,
    /// Finite-horizon analogue of [`BoundId::PA3`].
    P512,
}

impl BoundId {
    pub const ALL: [BoundId; 9] = [
        BoundId::L1_1,
        BoundId::L1_2,
        BoundId::L1_3,
        BoundId::L2_1,
        BoundId::L2_2,
        BoundId::L2_3,
        BoundId::L2_4,
        BoundId::PA3,
        BoundId::P512,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::L1_1 => "L1.1",
            BoundId::L1_2 => "L1.2",
            BoundId::L1_3 => "L1.3",
            BoundId::L2_1 => "L2.1",
            BoundId::L2_2 => "L2.2",
            BoundId::L2_3 => "L2.3",
            BoundId::L2_4 => "L2.4",
            BoundId::PA3 => "P-A3",
            BoundId::P512 => "P-512",
        }
    }

    /// Upper bounds hold when `lhs <= rhs`, lower bounds when `lhs >= rhs`.
    pub fn is_upper(self) -> bool {
        !matches!(
            self,
            BoundId::L2_1 | BoundId::L2_2 | BoundId::L2_3 | BoundId::L2_4
        )
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundId::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown bound id {s:?}")))
    }
}

/// Arguments of a bound. `l..=m` is the step range (`m` is the horizon `T`
/// for the whole-run bounds); `beta` is the power of `C` in the L1 bounds,
/// `theta` and `v` the weight and denominator exponents of P-A3 / P-512.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaParams {
    pub l: usize,
    pub m: usize,
    pub beta: f64,
    pub theta: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn lemma_oracle(
    world: &SpectralWorld,
    sched: &Schedule,
    id: BoundId,
    p: LemmaParams,
) -> Result<LemmaOutcome> {
    let (lhs, rhs) = match id {
        BoundId::L1_1 | BoundId::L1_2 | BoundId::L1_3 => operator_product(world, sched, id, &p)?,
        BoundId::L2_1 | BoundId::L2_2 => partial_sums(sched, id, &p)?,
        BoundId::L2_3 | BoundId::L2_4 => full_sums(sched, id, &p)?,
        BoundId::PA3 => online_weighted_sum(sched, &p)?,
        BoundId::P512 => finite_weighted_sum(sched, &p)?,
    };
    let slack = ROUNDOFF * lhs.abs().max(rhs.abs());
    let holds = if id.is_upper() {
        lhs <= rhs + slack
    } else {
        lhs + slack >= rhs
    };
    Ok(LemmaOutcome { lhs, rhs, holds })
}

fn step_range(sched: &Schedule, p: &LemmaParams) -> Result<Vec<(f64, f64)>> {
    if p.l == 0 || p.m < p.l {
        return Err(Error::Range(format!(
            "need 1 <= l <= m, got l={}, m={}",
            p.l, p.m
        )));
    }
    (p.l..=p.m).map(|t| sched.step_params(t)).collect()
}

/// `(t0 + 1)^theta1 >= eta_bar (kappa^2 + lambda_bar)`, which keeps every
/// factor `1 - eta_t (u + lambda_t)` in `[0, 1]`.
fn check_step_bound(world: &SpectralWorld, sched: &Schedule) -> Result<()> {
    let q = sched.unified();
    let lhs = (q.t0 + 1.0).powf(q.theta1);
    let rhs = q.eta_bar * (world.kappa_sq() + q.lambda_bar);
    if lhs < rhs {
        return Err(Error::Domain(format!(
            "step-size bound fails: {lhs} < {rhs}"
        )));
    }
    Ok(())
}

fn operator_product(
    world: &SpectralWorld,
    sched: &Schedule,
    id: BoundId,
    p: &LemmaParams,
) -> Result<(f64, f64)> {
    if !(p.beta >= 0.0 && p.beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be non-negative, got {}",
            p.beta
        )));
    }
    check_step_bound(world, sched)?;
    let steps = step_range(sched, p)?;
    let beta = p.beta;
    let squared = id != BoundId::L1_1;
    let mut lhs: f64 = 0.0;
    for &u in world.u() {
        let prod: f64 = steps
            .iter()
            .map(|(eta, lam)| 1.0 - eta * (u + lam))
            .product();
        let v = if squared { prod * prod } else { prod.abs() };
        lhs = lhs.max(u.powf(beta) * v);
    }
    let s: f64 = steps.iter().map(|(eta, _)| eta).sum();
    let s_lam: f64 = steps.iter().map(|(eta, lam)| eta * lam).sum();
    let k2b = world.kappa_sq().powf(beta);
    let rhs = match id {
        BoundId::L1_1 => {
            (-s_lam).exp() * 2.0 * (k2b + (beta / std::f64::consts::E).powf(beta))
                / (1.0 + s.powf(beta))
        }
        BoundId::L1_2 => {
            (beta / (2.0 * std::f64::consts::E)).powf(beta) * s.powf(-beta) * (-2.0 * s_lam).exp()
        }
        _ => {
            (-2.0 * s_lam).exp() * 2.0 * (k2b + (beta / (2.0 * std::f64::consts::E)).powf(beta))
                / (1.0 + s.powf(beta))
        }
    };
    Ok((lhs, rhs))
}

/// `(b^e - a^e) / e`, or `ln(b / a)` at `e = 0`.
fn power_integral(a: f64, b: f64, e: f64) -> f64 {
    if e.abs() < 1e-12 {
        (b / a).ln()
    } else {
        (b.powf(e) - a.powf(e)) / e
    }
}

fn partial_sums(sched: &Schedule, id: BoundId, p: &LemmaParams) -> Result<(f64, f64)> {
    let steps = step_range(sched, p)?;
    let q = sched.unified();
    let lo = p.l as f64 + q.t0;
    let hi = p.m as f64 + q.t0 + 1.0;
    Ok(if id == BoundId::L2_1 {
        let lhs = steps.iter().map(|(eta, _)| eta).sum();
        (lhs, q.eta_bar * power_integral(lo, hi, 1.0 - q.theta1))
    } else {
        let lhs = steps.iter().map(|(eta, lam)| eta * lam).sum();
        (
            lhs,
            q.eta_bar * q.lambda_bar * power_integral(lo, hi, 1.0 - q.theta1 - q.theta2),
        )
    })
}

fn full_sums(sched: &Schedule, id: BoundId, p: &LemmaParams) -> Result<(f64, f64)> {
    let q = sched.unified();
    let horizon = p.m;
    if (horizon as f64) < q.t0 + 1.0 {
        return Err(Error::Range(format!(
            "need T >= t0 + 1, got T={horizon}, t0={}",
            q.t0
        )));
    }
    let steps = step_range(sched, &LemmaParams { l: 1, ..*p })?;
    let tt = horizon as f64 + q.t0;
    Ok(if id == BoundId::L2_3 {
        let lhs = steps.iter().map(|(eta, _)| eta).sum();
        let e = 1.0 - q.theta1;
        (lhs, (1.0 - 2f64.powf(-e)) / e * q.eta_bar * tt.powf(e))
    } else {
        let lhs = steps.iter().map(|(eta, lam)| eta * lam).sum();
        (lhs, l24_rhs(&q, tt))
    })
}

fn l24_rhs(q: &UnifiedParams, tt: f64) -> f64 {
    let el = q.eta_bar * q.lambda_bar;
    let sum = q.theta1 + q.theta2;
    if (sum - 1.0).abs() < 1e-12 {
        el * (tt / (q.t0 + 1.0)).ln()
    } else if sum < 1.0 {
        let e = 1.0 - sum;
        el / e * (1.0 - 2f64.powf(-e)) * tt.powf(e)
    } else {
        let e = sum - 1.0;
        el / e * (1.0 - 2f64.powf(-e)) * (q.t0 + 1.0).powf(-e)
    }
}

/// `sum_{t=1}^T exp(-sum_{j>t} eta_j lambda_j) (t + t0)^-theta / (1 + (sum_{j>t} eta_j)^v)`
/// against `delta_1 (T + t0)^{-theta + theta1}` (times `log(T + t0)` at `v = 1`,
/// exponent `-theta + 1 - v (1 - theta1)` for `v < 1`).
///
/// Hypotheses: online, `theta1 + theta2 = 1`, `eta_bar lambda_bar > theta - 1`,
/// `t0 >= 1`, `T >= t0 + 1`, `v > 0`.
fn online_weighted_sum(sched: &Schedule, p: &LemmaParams) -> Result<(f64, f64)> {
    let o = match sched {
        Schedule::Online(o) => *o,
        Schedule::Finite(_) => return Err(Error::Domain("P-A3 needs an online schedule".into())),
    };
    let (th1, eb, lb, t0) = (o.theta1, o.eta_bar, o.lambda_bar, o.t0);
    let el = eb * lb;
    let (theta, v) = (p.theta, p.v);
    if (th1 + o.theta2 - 1.0).abs() > 1e-12 {
        return Err(Error::Domain("P-A3 needs theta1 + theta2 = 1".into()));
    }
    if !(el > theta - 1.0) || !(t0 >= 1.0) || !(v > 0.0) {
        return Err(Error::Domain(format!(
            "P-A3 needs eta_bar lambda_bar > theta - 1, t0 >= 1, v > 0; got {el}, {theta}, {t0}, {v}"
        )));
    }
    let horizon = p.m;
    if (horizon as f64) < t0 + 1.0 {
        return Err(Error::Range(format!(
            "need T >= t0 + 1, got T={horizon}, t0={t0}"
        )));
    }
    let steps = step_range(sched, &LemmaParams { l: 1, ..*p })?;
    let mut lhs = 0.0;
    let mut tail_eta: f64 = 0.0;
    let mut tail_el: f64 = 0.0;
    for t in (1..=horizon).rev() {
        lhs += (-tail_el).exp() * (t as f64 + t0).powf(-theta) / (1.0 + f64::powf(tail_eta, v));
        let (eta, lam) = steps[t - 1];
        tail_eta += eta;
        tail_el += eta * lam;
    }

    let tt = horizon as f64 + t0;
    let pe = el - theta;
    let eta_v = eb.powf(v).min(1.0);
    let d1 = (1.0 - 0.75f64.powf(1.0 - th1)).powf(-v) / eta_v / (pe + 1.0);
    let k = 3f64.powf(-pe).max(1.0) / (1.0 - th1) * 2f64.powf((pe + th1).abs());
    let (f, rate) = if v > 1.0 {
        (v / (v - 1.0), tt.powf(th1 - theta))
    } else if v == 1.0 {
        // T + t0 >= 3, so log(T + t0 + 1) <= (1 + ln(4/3) / ln 3) log(T + t0).
        let l = 1.0 + (4.0f64 / 3.0).ln() / 3f64.ln();
        ((2.0 - th1) * l, tt.powf(th1 - theta) * tt.ln())
    } else {
        let f = (1.0 - 2f64.powf(th1 - 1.0)).powf(1.0 - v) / (1.0 - v)
            * (4.0f64 / 3.0).powf((1.0 - th1) * (1.0 - v));
        (f, tt.powf(1.0 - theta - v * (1.0 - th1)))
    };
    let d2 = k * f / eta_v + 1.0;
    let delta1 = 2f64.powf(el) * (d1 + d2);
    Ok((lhs, delta1 * rate))
}

/// `sum_{t=0}^{T-1} exp(-2 a t T^{-theta3-theta4}) / (1 + (t eta)^v)` with
/// `a = eta1 lambda1` and `eta = eta1 T^-theta3`, against `delta_3` times
/// `T^{v theta3 + (1 - v) min(1, theta3 + theta4)}` (`v < 1`),
/// `T^theta3 log T` (`v = 1`) or `T^theta3` (`v > 1`). `0^0 = 1`.
fn finite_weighted_sum(sched: &Schedule, p: &LemmaParams) -> Result<(f64, f64)> {
    let f = match sched {
        Schedule::Finite(f) => *f,
        Schedule::Online(_) => {
            return Err(Error::Domain(
                "P-512 needs a finite-horizon schedule".into(),
            ))
        }
    };
    let v = p.v;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("P-512 needs v >= 0, got {v}")));
    }
    let (th3, th4, eta1) = (f.theta3, f.theta4, f.eta1);
    let tn = f.horizon as f64;
    let a = eta1 * f.lambda1;
    let eta = f.eta();
    let decay = 2.0 * a * tn.powf(-th3 - th4);
    let lhs: f64 = (0..f.horizon)
        .map(|t| {
            let t = t as f64;
            (-decay * t).exp() / (1.0 + (t * eta).powf(v))
        })
        .sum();

    let sum = th3 + th4;
    let (delta3, rate) = if v == 0.0 {
        ((2.0 * a).exp() * (0.5 / a).max(1.0), tn.powf(sum.min(1.0)))
    } else if v < 1.0 {
        let mut d = 1.0 + 1.0 / eta1 + eta1.powf(-v) / (1.0 - v);
        if sum < 1.0 {
            let k = 1.0 - 2f64.powf(-sum);
            d += eta1.powf(-v) * k.powf(-v) * (-2.0 * a * k).exp() / (2.0 * a);
        }
        (d, tn.powf(v * th3 + (1.0 - v) * sum.min(1.0)))
    } else if v == 1.0 {
        let ln2 = std::f64::consts::LN_2;
        (
            1.0 / ln2 + ((1.0 + eta1).ln() / ln2 + (1.0 - th3)) / eta1,
            tn.powf(th3) * tn.ln(),
        )
    } else {
        (1.0 + v / ((v - 1.0) * eta1), tn.powf(th3))
    };
    Ok((lhs, delta3 * rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{FiniteHorizonSchedule, OnlineSchedule};
    use crate::spectral::{NoiseMode, XiLaw};
    use nalgebra::DMatrix;

    fn world(u: Vec<f64>) -> SpectralWorld {
        let d = u.len();
        SpectralWorld::from_parts(
            u,
            DMatrix::zeros(1, d),
            1.0,
            1.0,
            0.0,
            XiLaw::Rademacher,
            NoiseMode::Gaussian,
            1.0,
        )
        .unwrap()
    }

    fn online() -> Schedule {
        Schedule::Online(OnlineSchedule::new(2.0 / 3.0, 1.0 / 3.0, 1.0, 0.875, 5.0).unwrap())
    }

    fn params(l: usize, m: usize) -> LemmaParams {
        LemmaParams {
            l,
            m,
            beta: 1.0,
            theta: 1.0,
            v: 1.0,
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in BoundId::ALL {
            assert_eq!(id.as_str().parse::<BoundId>().unwrap(), id);
        }
        assert!("L3.1".parse::<BoundId>().is_err());
    }

    #[test]
    fn l11_single_factor() {
        let w = world(vec![0.6]);
        let s = online();
        let (eta, lam) = s.step_params(3).unwrap();
        let out = lemma_oracle(&w, &s, BoundId::L1_1, params(3, 3)).unwrap();
        assert!((out.lhs - 0.6 * (1.0 - eta * (0.6 + lam))).abs() < 1e-15);
        assert!(out.holds, "{out:?}");
    }

    #[test]
    fn l21_first_step() {
        let w = world(vec![0.5]);
        let s = online();
        let out = lemma_oracle(&w, &s, BoundId::L2_1, params(1, 1)).unwrap();
        let expect = 3.0 * (7f64.powf(1.0 / 3.0) - 6f64.powf(1.0 / 3.0));
        assert!((out.lhs - 6f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert!((out.rhs - expect).abs() < 1e-14);
        assert!(out.holds);
    }

    #[test]
    fn l12_tiny_eigenvalue_gives_tiny_lhs() {
        let w = world(vec![1e-300]);
        let out = lemma_oracle(&w, &online(), BoundId::L1_2, params(1, 10)).unwrap();
        assert!(out.lhs < 1e-299);
        assert!(out.holds);
    }

    #[test]
    fn schedule_kind_is_checked() {
        let w = world(vec![0.5]);
        let f = Schedule::Finite(FiniteHorizonSchedule::new(0.5, 0.5, 0.5, 0.1, 16).unwrap());
        assert!(lemma_oracle(&w, &f, BoundId::PA3, params(1, 16)).is_err());
        assert!(lemma_oracle(&w, &online(), BoundId::P512, params(1, 16)).is_err());
    }

    #[test]
    fn constant_schedule_sums_are_tight() {
        let w = world(vec![0.5]);
        let f = Schedule::Finite(FiniteHorizonSchedule::new(0.5, 0.5, 0.5, 0.1, 100).unwrap());
        let out = lemma_oracle(&w, &f, BoundId::L2_1, params(3, 90)).unwrap();
        assert!((out.lhs - out.rhs).abs() < 1e-12 * out.lhs);
        assert!(out.holds);
    }

    #[test]
    fn step_bound_violation_is_an_error() {
        let w = world(vec![0.5]);
        let s = Schedule::Online(OnlineSchedule::new(0.5, 0.5, 4.0, 1.0, 0.0).unwrap());
        assert!(lemma_oracle(&w, &s, BoundId::L1_1, params(1, 2)).is_err());
    }
}
