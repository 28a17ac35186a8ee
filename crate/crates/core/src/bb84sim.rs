//! Monte Carlo simulation of the prepare-and-measure stage with a biased
//! bit source, and channel estimation that keeps both matched and
//! mismatched basis outcomes.
//!
//! Shots are drawn in fixed-size batches; batch `i` uses a ChaCha8 stream
//! `(seed, i)`, so counts are identical whether batches run in parallel or
//! one after another.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{BlochVector, QubitChannel};
use crate::entropy::JointDistribution;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fit;
use crate::keyrate::{channel_key_rate, key_rate, Direction, KeyRateReport, OmegaParams};

pub const BATCH_SHOTS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];

    fn index(self) -> usize {
        self as usize
    }

    fn letter(self) -> char {
        match self {
            Basis::Z => 'z',
            Basis::X => 'x',
        }
    }

    /// Bloch vector of the eigenstate encoding `bit` (bit 0 ↔ eigenvalue +1).
    pub fn state(self, bit: usize) -> BlochVector {
        let s = if bit == 0 { 1.0 } else { -1.0 };
        match self {
            Basis::Z => BlochVector::new(s, 0.0, 0.0),
            Basis::X => BlochVector::new(0.0, s, 0.0),
        }
    }

    /// `⟨σ_basis⟩` of a state.
    pub fn expectation(self, v: &BlochVector) -> f64 {
        match self {
            Basis::Z => v.theta_z,
            Basis::X => v.theta_x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    /// Probability of bit 0, used in both bases.
    pub q: f64,
    /// Probability that Alice (and independently Bob) picks the z basis.
    pub basis_prob_z: f64,
    pub shots: u64,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(q: f64, basis_prob_z: f64, shots: u64, seed: u64) -> Result<Self> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(q) {
            return Err(Error::domain(format!("bias q = {q} must lie in (0, 1)")));
        }
        if !open(basis_prob_z) {
            return Err(Error::domain(format!(
                "basis probability {basis_prob_z} must lie in (0, 1)"
            )));
        }
        if shots == 0 {
            return Err(Error::domain("shots must be at least 1"));
        }
        Ok(Self {
            q,
            basis_prob_z,
            shots,
            seed,
        })
    }

    fn basis_prob(&self, b: Basis) -> f64 {
        match b {
            Basis::Z => self.basis_prob_z,
            Basis::X => 1.0 - self.basis_prob_z,
        }
    }

    fn bit_prob(&self, bit: usize) -> f64 {
        if bit == 0 {
            self.q
        } else {
            1.0 - self.q
        }
    }
}

type Cells<T> = [[[T; 2]; 2]; 2];

/// Outcome tallies `[alice basis][bit][bob basis][outcome]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutcomeCounts {
    pub cells: Cells<[u64; 2]>,
}

impl OutcomeCounts {
    pub fn get(&self, a: Basis, bit: usize, b: Basis, outcome: usize) -> u64 {
        self.cells[a.index()][bit][b.index()][outcome]
    }

    pub fn stratum(&self, a: Basis, bit: usize, b: Basis) -> [u64; 2] {
        self.cells[a.index()][bit][b.index()]
    }

    pub fn shots(&self) -> u64 {
        self.cells.iter().flatten().flatten().flatten().sum()
    }

    fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self
            .cells
            .iter_mut()
            .flatten()
            .flatten()
            .flatten()
            .zip(other.cells.iter().flatten().flatten().flatten())
        {
            *a += *b;
        }
        self
    }

    fn key(a: Basis, bit: usize, b: Basis) -> String {
        format!("{}{}{}", a.letter(), bit, b.letter())
    }

    fn strata() -> impl Iterator<Item = (Basis, usize, Basis)> {
        Basis::BOTH.into_iter().flat_map(|a| {
            (0..2).flat_map(move |bit| Basis::BOTH.into_iter().map(move |b| (a, bit, b)))
        })
    }

    pub fn to_json(&self) -> CountsJson {
        CountsJson {
            shots: self.shots(),
            counts: Self::strata()
                .map(|(a, bit, b)| (Self::key(a, bit, b), self.stratum(a, bit, b)))
                .collect(),
        }
    }

    pub fn from_json(js: &CountsJson) -> Result<Self> {
        let mut out = Self::default();
        for (a, bit, b) in Self::strata() {
            let key = Self::key(a, bit, b);
            let cell = js
                .counts
                .get(&key)
                .ok_or_else(|| Error::Parse(format!("missing counts for `{key}`")))?;
            out.cells[a.index()][bit][b.index()] = *cell;
        }
        if let Some(extra) = js
            .counts
            .keys()
            .find(|k| !Self::strata().any(|(a, bit, b)| &&Self::key(a, bit, b) == k))
        {
            return Err(Error::Parse(format!("unknown counts key `{extra}`")));
        }
        if out.shots() != js.shots {
            return Err(Error::Parse(format!(
                "counts total {} but shots = {}",
                out.shots(),
                js.shots
            )));
        }
        Ok(out)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }

    pub fn frequencies(&self) -> StratumFrequencies {
        let mut f = StratumFrequencies {
            weight: Default::default(),
            p0: Default::default(),
            exact: false,
        };
        for (a, bit, b) in Self::strata() {
            let [n0, n1] = self.stratum(a, bit, b);
            let n = (n0 + n1) as f64;
            f.weight[a.index()][bit][b.index()] = n;
            f.p0[a.index()][bit][b.index()] = if n > 0.0 { n0 as f64 / n } else { 0.0 };
        }
        f
    }
}

/// Counts file layout: keys are alice basis, bit, bob basis (e.g. `z0x`),
/// values `[outcome 0, outcome 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsJson {
    pub shots: u64,
    pub counts: BTreeMap<String, [u64; 2]>,
}

/// Per-stratum sample weight and frequency of outcome 0. In exact mode the
/// weights are stratum probabilities and frequencies carry no sampling error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumFrequencies {
    pub weight: Cells<f64>,
    pub p0: Cells<f64>,
    pub exact: bool,
}

fn outcome_zero_probability(ch: &QubitChannel, a: Basis, bit: usize, b: Basis) -> f64 {
    let out = ch.apply(&a.state(bit));
    ((1.0 + b.expectation(&out)) / 2.0).clamp(0.0, 1.0)
}

/// Infinite-shot frequencies.
pub fn exact_frequencies(ch: &QubitChannel, cfg: &ProtocolConfig) -> StratumFrequencies {
    let mut f = StratumFrequencies {
        weight: Default::default(),
        p0: Default::default(),
        exact: true,
    };
    for (a, bit, b) in OutcomeCounts::strata() {
        f.weight[a.index()][bit][b.index()] =
            cfg.basis_prob(a) * cfg.bit_prob(bit) * cfg.basis_prob(b);
        f.p0[a.index()][bit][b.index()] = outcome_zero_probability(ch, a, bit, b);
    }
    f
}

fn simulate_batch(p0: &Cells<f64>, cfg: &ProtocolConfig, batch: u64) -> OutcomeCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(batch);
    let start = batch * BATCH_SHOTS;
    let n = BATCH_SHOTS.min(cfg.shots - start);
    let mut counts = OutcomeCounts::default();
    for _ in 0..n {
        let a = if rng.random::<f64>() < cfg.basis_prob_z {
            0
        } else {
            1
        };
        let bit = if rng.random::<f64>() < cfg.q { 0 } else { 1 };
        let b = if rng.random::<f64>() < cfg.basis_prob_z {
            0
        } else {
            1
        };
        let outcome = if rng.random::<f64>() < p0[a][bit][b] {
            0
        } else {
            1
        };
        counts.cells[a][bit][b][outcome] += 1;
    }
    counts
}

pub fn simulate(ch: &QubitChannel, cfg: &ProtocolConfig) -> OutcomeCounts {
    simulate_with(ch, cfg, Execution::default())
}

pub fn simulate_with(ch: &QubitChannel, cfg: &ProtocolConfig, exec: Execution) -> OutcomeCounts {
    let p0 = exact_frequencies(ch, cfg).p0;
    let batches = cfg.shots.div_ceil(BATCH_SHOTS);
    exec.map_range(batches, |i| simulate_batch(&p0, cfg, i))
        .iter()
        .fold(OutcomeCounts::default(), |acc, c| acc.merge(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaEstimate {
    pub omega: OmegaParams,
    /// Standard errors in the order `(R_zz, R_zx, R_xz, R_xx, t_z, t_x)`.
    pub std_err: [f64; 6],
}

pub fn estimate_omega(counts: &OutcomeCounts) -> Result<OmegaEstimate> {
    estimate_from_frequencies(&counts.frequencies())
}

/// Weighted least squares, one fit per measured Stokes component `b`:
/// `2·p0 − 1 = R_bz θ_z + R_bx θ_x + t_b` over the four preparations, with
/// the intercept shared between z- and x-basis inputs. Strata are weighted
/// by inverse binomial variance and the standard errors are the square
/// roots of the diagonal of the inverse normal matrix. Exact frequencies
/// report zero standard errors.
pub fn estimate_from_frequencies(f: &StratumFrequencies) -> Result<OmegaEstimate> {
    for (a, bit, b) in OutcomeCounts::strata() {
        if f.weight[a.index()][bit][b.index()] <= 0.0 {
            return Err(Error::InsufficientData(OutcomeCounts::key(a, bit, b)));
        }
    }
    let mut fits = [([0.0; 3], [0.0; 3]); 2];
    for b in Basis::BOTH {
        let mut normal = Matrix3::<f64>::zeros();
        let mut rhs = Vector3::<f64>::zeros();
        for a in Basis::BOTH {
            for bit in 0..2 {
                let input = a.state(bit);
                let x = Vector3::new(input.theta_z, input.theta_x, 1.0);
                let n = f.weight[a.index()][bit][b.index()];
                let p0 = f.p0[a.index()][bit][b.index()];
                // Exact frequencies are weighted by stratum probability.
                // Sampled ones get inverse binomial variances, Jeffreys
                // smoothed so that noise-free strata keep a finite weight.
                let w = if f.exact {
                    n
                } else {
                    let smoothed = (p0 * n + 0.5) / (n + 1.0);
                    n / (4.0 * smoothed * (1.0 - smoothed))
                };
                normal += x * x.transpose() * w;
                rhs += x * (w * (2.0 * p0 - 1.0));
            }
        }
        let inv = normal
            .try_inverse()
            .ok_or_else(|| Error::InsufficientData("degenerate design".into()))?;
        let beta = inv * rhs;
        let se = if f.exact {
            [0.0; 3]
        } else {
            [0, 1, 2].map(|k| inv[(k, k)].sqrt())
        };
        fits[b.index()] = ([beta[0], beta[1], beta[2]], se);
    }
    let ([r_zz, r_zx, t_z], [se_zz, se_zx, se_tz]) = fits[Basis::Z.index()];
    let ([r_xz, r_xx, t_x], [se_xz, se_xx, se_tx]) = fits[Basis::X.index()];
    Ok(OmegaEstimate {
        omega: OmegaParams {
            r_zz,
            r_zx,
            r_xz,
            r_xx,
            t_z,
            t_x,
        },
        std_err: [se_zz, se_zx, se_xz, se_xx, se_tz, se_tx],
    })
}

/// z-basis joint distribution of Alice's bit and Bob's outcome from the
/// matched z strata.
pub fn matched_z_joint(f: &StratumFrequencies) -> Result<JointDistribution> {
    let z = Basis::Z.index();
    let mut p_xy = [[0.0; 2]; 2];
    let mut total = 0.0;
    for (x, row) in p_xy.iter_mut().enumerate() {
        let w = f.weight[z][x][z];
        let p0 = f.p0[z][x][z];
        row[0] = w * p0;
        row[1] = w * (1.0 - p0);
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::InsufficientData("matched z strata".into()));
    }
    for v in p_xy.iter_mut().flatten() {
        *v /= total;
    }
    JointDistribution::new(p_xy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Shots,
    /// Replace sampled counts by their expectations.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndToEndReport {
    pub estimate: OmegaEstimate,
    /// Physical parameters the rate was computed from.
    pub fit: PhysicalFit,
    pub report: KeyRateReport,
    /// Rate of the true channel, for comparison.
    pub true_report: KeyRateReport,
}

/// Physical channel parameters chosen for an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalFit {
    pub omega: OmegaParams,
    /// Largest absolute change from the raw estimate.
    pub shift: f64,
    /// Weighted squared distance from the raw estimate, in units of the
    /// standard errors.
    pub chi_square: f64,
    /// Choi rank bound of the selected model, or `None` for the
    /// unrestricted model.
    pub rank: Option<usize>,
}

/// Increase in chi-square over the unrestricted fit that a lower-rank model
/// may cost and still be selected: the 0.999 quantile of a chi-square
/// distribution with six degrees of freedom.
pub const RANK_SELECTION_CHI_SQUARE: f64 = 22.458;

/// Maps an estimate to parameters of a physical channel.
///
/// The unrestricted model is the nearest completable point in the metric of
/// the standard errors. Channels with Choi rank 1, 2 and 3 are then fitted
/// in the same metric, and the lowest rank whose chi-square exceeds the
/// unrestricted one by at most [`RANK_SELECTION_CHI_SQUARE`] is selected.
/// Sampling noise otherwise gives every boundary channel a spurious small
/// Choi eigenvalue that the entropy picks up as `-λ log λ`.
///
/// Without usable standard errors (exact frequencies) only the
/// unrestricted model is used, and a completable estimate is kept as is.
pub fn physical_projection(estimate: &OmegaEstimate) -> Result<PhysicalFit> {
    let target = estimate.omega.to_array();
    let weights = projection_weights(&estimate.std_err);
    let full = match estimate.omega.feasible_r_yy() {
        Ok(_) => estimate.omega,
        Err(Error::Infeasible { .. }) => fit::nearest_feasible(&target, &weights)?,
        Err(e) => return Err(e),
    };
    let full_chi = fit::chi_square(&full.to_array(), &target, &weights);
    let mut chosen = (full, full_chi, None);
    if estimate.std_err.iter().all(|s| *s > 0.0 && s.is_finite()) {
        let start = full.completed(full.least_infeasible_r_yy()?).choi();
        for rank in 1..=3 {
            let (omega, chi) = fit::low_rank_fit(&target, &weights, rank, &start)?;
            if chi - full_chi <= RANK_SELECTION_CHI_SQUARE && omega.feasible_r_yy().is_ok() {
                chosen = (omega, chi, Some(rank));
                break;
            }
        }
    }
    let (omega, chi_square, rank) = chosen;
    let shift = target
        .iter()
        .zip(omega.to_array())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PhysicalFit {
        omega,
        shift,
        chi_square,
        rank,
    })
}

/// Inverse variances; parameters without a usable error bar get the mean
/// weight of the rest, or unit weight when there are none.
fn projection_weights(std_err: &[f64; 6]) -> [f64; 6] {
    let finite: Vec<f64> = std_err
        .iter()
        .filter(|s| **s > 0.0 && s.is_finite())
        .map(|s| s.powi(-2))
        .collect();
    let fallback = if finite.is_empty() {
        1.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    std_err.map(|s| {
        if s > 0.0 && s.is_finite() {
            s.powi(-2)
        } else {
            fallback
        }
    })
}

pub fn end_to_end_rate(
    ch: &QubitChannel,
    cfg: &ProtocolConfig,
    direction: Direction,
    sampling: Sampling,
) -> Result<EndToEndReport> {
    let freqs = match sampling {
        Sampling::Shots => simulate(ch, cfg).frequencies(),
        Sampling::Exact => exact_frequencies(ch, cfg),
    };
    end_to_end_from_frequencies(ch, cfg, direction, &freqs)
}

pub fn end_to_end_from_frequencies(
    ch: &QubitChannel,
    cfg: &ProtocolConfig,
    direction: Direction,
    freqs: &StratumFrequencies,
) -> Result<EndToEndReport> {
    let estimate = estimate_from_frequencies(freqs)?;
    let fit = physical_projection(&estimate)?;
    let joint = matched_z_joint(freqs)?;
    let report = key_rate(&fit.omega, cfg.q, direction, &joint)?;
    let true_report = channel_key_rate(ch, cfg.q, direction)?;
    Ok(EndToEndReport {
        estimate,
        fit,
        report,
        true_report,
    })
}
