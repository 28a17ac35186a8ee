//! Key rates for the biased BB84 source.
//!
//! A channel is only partly visible to z/x-basis statistics: the six
//! parameters in [`OmegaParams`]. The remaining parameters are set to the
//! worst case, which (given convexity of the eavesdropper's ambiguity) means
//! zeroing every y-coupling and minimizing over `R_yy` alone.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::channel::{QubitChannel, POSITIVITY_TOLERANCE};
use crate::entropy::{self, h2, Conditioning, JointDistribution, SourceDistribution};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::search::{bisect, scan_refine_max};

/// Bisection budget for the feasible `R_yy` interval.
const FEASIBILITY_ITERATIONS: usize = 60;
/// A peak Choi eigenvalue at or below this is treated as touching the PSD
/// boundary: the feasible set is the single peak point.
const COLLAPSE_TOLERANCE: f64 = 1e-12;
const AMBIGUITY_SCAN_POINTS: usize = 200;
const AMBIGUITY_TOLERANCE: f64 = 1e-9;

pub const Q_MIN: f64 = 1e-6;
pub const Q_MAX: f64 = 1.0 - 1e-6;
const BIAS_SCAN_POINTS: usize = 101;
const BIAS_TOLERANCE: f64 = 1e-9;
const DERIVATIVE_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Direct,
    Reverse,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Direct, Direction::Reverse];

    /// Classical term subtracted from the eavesdropper's ambiguity.
    pub fn leak_conditioning(self) -> Conditioning {
        match self {
            Direction::Direct => Conditioning::XGivenY,
            Direction::Reverse => Conditioning::YGivenX,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Direct => "direct",
            Direction::Reverse => "reverse",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Direction::Direct),
            "reverse" => Ok(Direction::Reverse),
            other => Err(Error::Parse(format!("unknown direction `{other}`"))),
        }
    }
}

/// Amplitude-damping rates in closed form:
/// direct `h(q + p(1−q)) − h(p(1−q))`, reverse `h(q) − h(p(1−q))`.
pub fn closed_form_rate(p: f64, q: f64, direction: Direction) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "damping probability {p} outside [0, 1]"
        )));
    }
    let q = SourceDistribution::new(q)?.q();
    let decayed = p * (1.0 - q);
    Ok(match direction {
        Direction::Direct => h2(q + decayed) - h2(decayed),
        Direction::Reverse => h2(q) - h2(decayed),
    })
}

/// The six channel parameters identifiable from z- and x-basis statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaParams {
    pub r_zz: f64,
    pub r_zx: f64,
    pub r_xz: f64,
    pub r_xx: f64,
    pub t_z: f64,
    pub t_x: f64,
}

/// Feasible values of `R_yy` for a fixed ω with the y-couplings zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibleInterval {
    pub lo: f64,
    pub hi: f64,
    /// Maximizer of the Choi minimum eigenvalue.
    pub peak: f64,
    pub peak_min_eigenvalue: f64,
}

impl FeasibleInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl OmegaParams {
    /// Builds ω, rejecting parameters no `R_yy` can complete to a channel.
    pub fn new(r_zz: f64, r_zx: f64, r_xz: f64, r_xx: f64, t_z: f64, t_x: f64) -> Result<Self> {
        let omega = Self {
            r_zz,
            r_zx,
            r_xz,
            r_xx,
            t_z,
            t_x,
        };
        omega.feasible_r_yy()?;
        Ok(omega)
    }

    pub fn from_channel(ch: &QubitChannel) -> Self {
        Self {
            r_zz: ch.r[(0, 0)],
            r_zx: ch.r[(0, 1)],
            r_xz: ch.r[(1, 0)],
            r_xx: ch.r[(1, 1)],
            t_z: ch.t[0],
            t_x: ch.t[1],
        }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            r_zz: a[0],
            r_zx: a[1],
            r_xz: a[2],
            r_xx: a[3],
            t_z: a[4],
            t_x: a[5],
        }
    }

    /// `(R_zz, R_zx, R_xz, R_xx, t_z, t_x)`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.r_zz, self.r_zx, self.r_xz, self.r_xx, self.t_z, self.t_x,
        ]
    }

    /// Channel with the y-couplings and `t_y` zero and the given `R_yy`.
    pub fn completed(&self, r_yy: f64) -> QubitChannel {
        QubitChannel::new(
            Matrix3::new(
                self.r_zz, self.r_zx, 0.0, self.r_xz, self.r_xx, 0.0, 0.0, 0.0, r_yy,
            ),
            Vector3::new(self.t_z, self.t_x, 0.0),
        )
    }

    /// z-basis joint distribution implied by ω.
    pub fn joint_distribution(&self, source: SourceDistribution) -> JointDistribution {
        entropy::joint_distribution(&self.completed(0.0), source)
    }

    fn choi_slope(&self) -> CMatrix {
        self.completed(1.0).choi().matrix() - self.completed(0.0).choi().matrix()
    }

    /// Minimum Choi eigenvalue at `r_yy` and its derivative with respect to
    /// `r_yy` along the minimizing eigenvector.
    fn min_eigen_with_slope(&self, r_yy: f64, slope: &CMatrix) -> (f64, f64) {
        let (values, vectors) = hermitian_eigen(self.completed(r_yy).choi().matrix());
        let v = vectors.column(0);
        let d = (v.adjoint() * slope * v)[(0, 0)].re;
        (values[0], d)
    }

    fn min_eigen(&self, r_yy: f64) -> f64 {
        self.completed(r_yy).choi().min_eigenvalue()
    }

    /// Maximizer of the Choi minimum eigenvalue over `R_yy ∈ [−1, 1]`, by
    /// bisection on the sign of its derivative.
    pub fn least_infeasible_r_yy(&self) -> Result<f64> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("channel parameters must be finite"));
        }
        let slope = self.choi_slope();
        let rising = |r: f64| Ok::<_, Error>(self.min_eigen_with_slope(r, &slope).1 > 0.0);
        if !rising(-1.0)? {
            Ok(-1.0)
        } else if rising(1.0)? {
            Ok(1.0)
        } else {
            bisect(rising, -1.0, 1.0, FEASIBILITY_ITERATIONS)
        }
    }

    /// The Choi minimum eigenvalue is concave in `R_yy`, so the feasible set
    /// is an interval around its maximizer. The maximizer is located by
    /// bisection on the sign of the eigenvalue's derivative, the endpoints by
    /// bisection on the eigenvalue's sign.
    pub fn feasible_r_yy(&self) -> Result<FeasibleInterval> {
        let peak = self.least_infeasible_r_yy()?;
        let peak_min_eigenvalue = self.min_eigen(peak);
        if peak_min_eigenvalue < -POSITIVITY_TOLERANCE {
            return Err(Error::Infeasible {
                best_min_eigenvalue: peak_min_eigenvalue,
            });
        }
        if peak_min_eigenvalue <= COLLAPSE_TOLERANCE {
            return Ok(FeasibleInterval {
                lo: peak,
                hi: peak,
                peak,
                peak_min_eigenvalue,
            });
        }
        let feasible = |r: f64| Ok::<_, Error>(self.min_eigen(r) >= 0.0);
        let lo = if feasible(-1.0)? {
            -1.0
        } else {
            bisect(feasible, peak, -1.0, FEASIBILITY_ITERATIONS)?
        };
        let hi = if feasible(1.0)? {
            1.0
        } else {
            bisect(feasible, peak, 1.0, FEASIBILITY_ITERATIONS)?
        };
        Ok(FeasibleInterval {
            lo,
            hi,
            peak,
            peak_min_eigenvalue,
        })
    }
}

/// Conditional entropy of the key variable given the environment.
pub fn eve_ambiguity(
    ch: &QubitChannel,
    source: SourceDistribution,
    direction: Direction,
) -> Result<f64> {
    match direction {
        Direction::Direct => entropy::h_x_given_e(ch, source),
        Direction::Reverse => entropy::h_y_given_e(ch, source),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCase {
    pub value: f64,
    pub r_yy: f64,
    pub interval: FeasibleInterval,
}

/// Minimum of the eavesdropper's ambiguity over all feasible `R_yy`.
pub fn worst_case_ambiguity(
    omega: &OmegaParams,
    q: f64,
    direction: Direction,
) -> Result<WorstCase> {
    let source = SourceDistribution::new(q)?;
    let interval = omega.feasible_r_yy()?;
    let ambiguity = |r: f64| eve_ambiguity(&omega.completed(r), source, direction);
    if interval.width() <= AMBIGUITY_TOLERANCE {
        let r_yy = interval.peak;
        return Ok(WorstCase {
            value: ambiguity(r_yy)?,
            r_yy,
            interval,
        });
    }
    let (r_yy, neg) = scan_refine_max(
        |r| ambiguity(r).map(|v| -v),
        interval.lo,
        interval.hi,
        AMBIGUITY_SCAN_POINTS,
        AMBIGUITY_TOLERANCE,
    )?;
    Ok(WorstCase {
        value: -neg,
        r_yy,
        interval,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub q: f64,
    pub direction: Direction,
    /// Raw rate in bits per channel use; may be negative.
    pub rate: f64,
    #[serde(rename = "worst_case_R_yy")]
    pub worst_case_r_yy: f64,
    pub eve_ambiguity: f64,
    pub classical_leak: f64,
}

impl KeyRateReport {
    pub fn clamped_rate(&self) -> f64 {
        self.rate.max(0.0)
    }
}

/// Rate `min_{R_yy} H(K|E) − H(K|K')`, with the classical term taken from
/// `joint`.
pub fn key_rate(
    omega: &OmegaParams,
    q: f64,
    direction: Direction,
    joint: &JointDistribution,
) -> Result<KeyRateReport> {
    let worst = worst_case_ambiguity(omega, q, direction)?;
    let classical_leak = joint.conditional_entropy(direction.leak_conditioning());
    Ok(KeyRateReport {
        q,
        direction,
        rate: worst.value - classical_leak,
        worst_case_r_yy: worst.r_yy,
        eve_ambiguity: worst.value,
        classical_leak,
    })
}

/// Key rate of a fully known channel: ω is read off the channel and the
/// classical term comes from its exact z-basis statistics.
pub fn channel_key_rate(ch: &QubitChannel, q: f64, direction: Direction) -> Result<KeyRateReport> {
    let source = SourceDistribution::new(q)?;
    let joint = entropy::joint_distribution(ch, source);
    key_rate(&OmegaParams::from_channel(ch), q, direction, &joint)
}

/// What the bias search maximizes over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasTarget {
    /// Amplitude damping with the given `p`, via the closed forms.
    AmplitudeDamping(f64),
    /// General ω via the worst-case entropic rate; the classical term uses
    /// the joint distribution implied by ω.
    Omega(OmegaParams),
}

impl BiasTarget {
    pub fn rate(&self, q: f64, direction: Direction) -> Result<f64> {
        match self {
            BiasTarget::AmplitudeDamping(p) => closed_form_rate(*p, q, direction),
            BiasTarget::Omega(omega) => {
                let joint = omega.joint_distribution(SourceDistribution::new(q)?);
                Ok(key_rate(omega, q, direction, &joint)?.rate)
            }
        }
    }

    /// Derivative of [`rate`](Self::rate) in `q`: exact for amplitude
    /// damping, a central difference otherwise.
    pub fn slope(&self, q: f64, direction: Direction) -> Result<f64> {
        match self {
            BiasTarget::AmplitudeDamping(p) => {
                let s = p * (1.0 - q);
                let leak = if *p > 0.0 { p * h2_slope(s) } else { 0.0 };
                Ok(match direction {
                    Direction::Direct if *p >= 1.0 => leak,
                    Direction::Direct => (1.0 - p) * h2_slope(q + s) + leak,
                    Direction::Reverse => h2_slope(q) + leak,
                })
            }
            BiasTarget::Omega(_) => {
                let h = DERIVATIVE_STEP.min(q - Q_MIN).min(Q_MAX - q);
                if h <= 0.0 {
                    return Ok(0.0);
                }
                Ok((self.rate(q + h, direction)? - self.rate(q - h, direction)?) / (2.0 * h))
            }
        }
    }
}

/// `d h(x) / dx = log2((1 - x) / x)`.
fn h2_slope(x: f64) -> f64 {
    ((1.0 - x) / x).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasOptimum {
    pub q_hat: f64,
    pub rate: f64,
}

/// Rate-maximizing bias on `[Q_MIN, Q_MAX]`: a coarse scan, golden-section
/// refinement around the best sample, then a bisection polish on the sign of
/// [`BiasTarget::slope`] when it brackets a root.
pub fn optimize_bias(target: &BiasTarget, direction: Direction) -> Result<BiasOptimum> {
    if let BiasTarget::AmplitudeDamping(p) = target {
        if !(0.0..=1.0).contains(p) {
            return Err(Error::domain(format!(
                "damping probability {p} outside [0, 1]"
            )));
        }
    }
    let f = |q: f64| target.rate(q, direction);
    let (mut q_hat, mut rate) = scan_refine_max(f, Q_MIN, Q_MAX, BIAS_SCAN_POINTS, BIAS_TOLERANCE)?;

    let width = match target {
        BiasTarget::AmplitudeDamping(_) => 1e-4,
        BiasTarget::Omega(_) => 1e-7,
    };
    let (lo, hi) = (
        (q_hat - width).max(Q_MIN + DERIVATIVE_STEP),
        (q_hat + width).min(Q_MAX - DERIVATIVE_STEP),
    );
    let slope = |q: f64| target.slope(q, direction);
    if lo < hi && slope(lo)? > 0.0 && slope(hi)? < 0.0 {
        let polished = bisect(|q| Ok::<_, Error>(slope(q)? > 0.0), lo, hi, 100)?;
        let polished_rate = f(polished)?;
        if polished_rate >= rate || matches!(target, BiasTarget::AmplitudeDamping(_)) {
            q_hat = polished;
            rate = polished_rate;
        }
    }
    Ok(BiasOptimum { q_hat, rate })
}

/// The two closed-form transcendental optimality conditions relating the damping
/// probability `p` to a stationary bias `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasCondition {
    /// `(1 − q)/q = (p(1 − q)/(1 − p(1 − q)))^p`, for `0 ≤ p < 1`.
    ExponentP,
    /// `(1 − p(1 − q))/(p(1 − q)) = ((q + p(1 − q))/((1 − p)(1 − q)))^((1 − p)/p)`,
    /// for `0 < p < 1/2`.
    ExponentRatio,
}

impl BiasCondition {
    pub const BOTH: [BiasCondition; 2] = [BiasCondition::ExponentP, BiasCondition::ExponentRatio];
}

/// `LHS − RHS` of a [`BiasCondition`], with both sides formed from their
/// logarithms.
pub fn stationarity_residual(p: f64, q: f64, condition: BiasCondition) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("bias q = {q} must lie in (0, 1)")));
    }
    let s = p * (1.0 - q);
    let (ln_lhs, ln_rhs) = match condition {
        BiasCondition::ExponentP => {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::domain(format!(
                    "condition needs 0 <= p < 1, got {p}"
                )));
            }
            let ln_rhs = if p == 0.0 {
                0.0
            } else {
                p * (s.ln() - (1.0 - s).ln())
            };
            (((1.0 - q) / q).ln(), ln_rhs)
        }
        BiasCondition::ExponentRatio => {
            if !(p > 0.0 && p < 0.5) {
                return Err(Error::domain(format!(
                    "condition needs 0 < p < 1/2, got {p}"
                )));
            }
            let base = (q + s).ln() - ((1.0 - p) * (1.0 - q)).ln();
            ((1.0 - s).ln() - s.ln(), (1.0 - p) / p * base)
        }
    };
    Ok(ln_lhs.exp() - ln_rhs.exp())
}

/// How the bias is chosen for a sweep column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QPolicy {
    Fixed(f64),
    Optimal,
}

/// `(q, rate)` for amplitude damping under a policy.
pub fn rate_under_policy(p: f64, direction: Direction, policy: QPolicy) -> Result<(f64, f64)> {
    match policy {
        QPolicy::Fixed(q) => Ok((q, closed_form_rate(p, q, direction)?)),
        QPolicy::Optimal => {
            let opt = optimize_bias(&BiasTarget::AmplitudeDamping(p), direction)?;
            Ok((opt.q_hat, opt.rate))
        }
    }
}

/// Conventional (unbiased) and optimized rates at one damping probability.
/// All rates are raw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub q_conventional: f64,
    pub rate_direct_conv: f64,
    pub rate_reverse_conv: f64,
    pub q_hat_direct: f64,
    pub rate_direct_opt: f64,
    pub q_hat_reverse: f64,
    pub rate_reverse_opt: f64,
}

pub const SWEEP_CSV_HEADER: &str =
    "p,q_conventional,rate_direct_conv,rate_reverse_conv,q_hat_direct,rate_direct_opt,q_hat_reverse,rate_reverse_opt";

impl SweepRow {
    pub fn compute(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("sweep point p = {p} outside [0, 1]")));
        }
        let conv = QPolicy::Fixed(0.5);
        let (q_conventional, rate_direct_conv) = rate_under_policy(p, Direction::Direct, conv)?;
        let (_, rate_reverse_conv) = rate_under_policy(p, Direction::Reverse, conv)?;
        let (q_hat_direct, rate_direct_opt) =
            rate_under_policy(p, Direction::Direct, QPolicy::Optimal)?;
        let (q_hat_reverse, rate_reverse_opt) =
            rate_under_policy(p, Direction::Reverse, QPolicy::Optimal)?;
        Ok(Self {
            p,
            q_conventional,
            rate_direct_conv,
            rate_reverse_conv,
            q_hat_direct,
            rate_direct_opt,
            q_hat_reverse,
            rate_reverse_opt,
        })
    }

    /// CSV line with rates clamped at zero.
    pub fn csv_line(&self) -> String {
        let clamp = |r: f64| r.max(0.0);
        [
            self.p,
            self.q_conventional,
            clamp(self.rate_direct_conv),
            clamp(self.rate_reverse_conv),
            self.q_hat_direct,
            clamp(self.rate_direct_opt),
            self.q_hat_reverse,
            clamp(self.rate_reverse_opt),
        ]
        .iter()
        .map(|&v| format_significant(v, 9))
        .collect::<Vec<_>>()
        .join(",")
    }
}

pub fn sweep(p_grid: &[f64], exec: Execution) -> Result<Vec<SweepRow>> {
    exec.map(p_grid, |&p| SweepRow::compute(p))
        .into_iter()
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `printf("%.{digits}g")`-style formatting.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa.to_string()), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{:.*}", decimals, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ad(p: f64) -> QubitChannel {
        QubitChannel::amplitude_damping(p).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        for d in Direction::BOTH {
            assert!((closed_form_rate(0.0, 0.5, d).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(closed_form_rate(0.5, 0.5, Direction::Direct).unwrap().abs() < 1e-15);
        let rev = closed_form_rate(0.5, 0.5, Direction::Reverse).unwrap();
        assert!((rev - 0.188_721_875_540_867_2).abs() < 1e-15);
        assert!(closed_form_rate(1.2, 0.5, Direction::Direct).is_err());
        assert!(closed_form_rate(0.2, 1.0, Direction::Direct).is_err());
    }

    #[test]
    fn damping_interval_collapses() {
        for p in [0.0, 0.1, 0.3, 0.64, 0.9] {
            let iv = OmegaParams::from_channel(&ad(p)).feasible_r_yy().unwrap();
            let expect = (1.0 - p).sqrt();
            assert!(
                (iv.lo - expect).abs() < 1e-8 && (iv.hi - expect).abs() < 1e-8,
                "p={p}: {iv:?}"
            );
        }
    }

    #[test]
    fn identity_worst_case() {
        let omega = OmegaParams::from_channel(&QubitChannel::identity());
        let wc = worst_case_ambiguity(&omega, 0.5, Direction::Direct).unwrap();
        assert!((wc.value - 1.0).abs() < 1e-9);
        assert!((wc.r_yy - 1.0).abs() < 1e-8);
    }

    #[test]
    fn infeasible_omega_rejected() {
        // R_zz = 1 with t_z = 0.5 pushes |0⟩ outside the ball.
        let err = OmegaParams::new(1.0, 0.0, 0.0, 1.0, 0.5, 0.0).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn depolarizing_interval_is_wide() {
        let omega = OmegaParams::new(0.8, 0.0, 0.0, 0.8, 0.0, 0.0).unwrap();
        let iv = omega.feasible_r_yy().unwrap();
        // Pauli-diagonal CP conditions: |λ1 ± λ2| ≤ |1 ± λ3|.
        assert!(
            (iv.lo - 0.6).abs() < 1e-9 && (iv.hi - 1.0).abs() < 1e-9,
            "{iv:?}"
        );
    }

    #[test]
    fn key_rate_examples() {
        let r = channel_key_rate(&ad(0.2), 0.5, Direction::Direct).unwrap();
        assert!((r.rate - 0.501_955_000_865_387_4).abs() < 1e-8, "{r:?}");
        assert!((r.rate - (r.eve_ambiguity - r.classical_leak)).abs() < 1e-12);
        for d in Direction::BOTH {
            let r = channel_key_rate(&QubitChannel::identity(), 0.3, d).unwrap();
            assert!((r.rate - h2(0.3)).abs() < 1e-9);
        }
        let r = channel_key_rate(&ad(1.0), 0.5, Direction::Direct).unwrap();
        assert!(r.rate <= 1e-12);
    }

    #[test]
    fn optimize_examples() {
        for d in Direction::BOTH {
            let opt = optimize_bias(&BiasTarget::AmplitudeDamping(0.0), d).unwrap();
            assert!((opt.q_hat - 0.5).abs() < 1e-6);
            assert!((opt.rate - 1.0).abs() < 1e-12);
        }
        let opt = optimize_bias(&BiasTarget::AmplitudeDamping(0.75), Direction::Reverse).unwrap();
        assert!(opt.rate > 2.0 * closed_form_rate(0.75, 0.5, Direction::Reverse).unwrap());
    }

    #[test]
    fn residual_examples() {
        for q in [0.2, 0.5, 0.7] {
            let r = stationarity_residual(0.0, q, BiasCondition::ExponentP).unwrap();
            assert!((r - ((1.0 - q) / q - 1.0)).abs() < 1e-14);
        }
        assert!(stationarity_residual(0.0, 0.5, BiasCondition::ExponentRatio).is_err());
        assert!(stationarity_residual(0.6, 0.5, BiasCondition::ExponentRatio).is_err());
        assert!(stationarity_residual(1.0, 0.5, BiasCondition::ExponentP).is_err());
        assert!(stationarity_residual(0.3, 0.0, BiasCondition::ExponentP).is_err());
    }

    #[test]
    fn sweep_rows_and_csv() {
        let rows = sweep(&linspace(0.0, 0.95, 20), Execution::Parallel).unwrap();
        assert_eq!(
            rows,
            sweep(&linspace(0.0, 0.95, 20), Execution::Sequential).unwrap()
        );
        let r0 = rows[0];
        for v in [
            r0.rate_direct_conv,
            r0.rate_reverse_conv,
            r0.rate_direct_opt,
            r0.rate_reverse_opt,
        ] {
            assert!((v - 1.0).abs() < 1e-9);
        }
        for r in &rows {
            assert!(r.rate_direct_opt >= r.rate_direct_conv - 1e-12);
            assert!(r.rate_reverse_opt >= r.rate_reverse_conv - 1e-12);
        }
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 21);
        assert!(sweep(&[1.0], Execution::Sequential).is_ok());
        assert!(sweep(&[1.01], Execution::Sequential).is_err());
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.5, 9), "0.5");
        assert_eq!(format_significant(1.0, 9), "1");
        assert_eq!(
            format_significant(0.501_955_000_865_387_4, 9),
            "0.501955001"
        );
        assert_eq!(format_significant(1.234_567_891_23e-7, 9), "1.23456789e-07");
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(
            format_significant(-0.000_123_456_789_12, 9),
            "-0.000123456789"
        );
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.0, 0.95, 20);
        assert_eq!(g.len(), 20);
        assert_eq!(g[19], 0.95);
        assert!((g[1] - 0.05).abs() < 1e-15);
    }
}
