//! Entropies in bits, the z-basis joint distribution of Alice's and Bob's
//! bits, and the eavesdropper-conditioned entropies H(X|E) and H(Y|E).

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{basis_projector, DensityMatrix, QubitChannel, POSITIVITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, partial_trace_first, CMatrix, ZERO};

/// Eigenvalues below this are treated as exactly zero inside entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

/// Environment dimension used by both conditional-entropy constructions.
pub const ENV_DIM: usize = 4;

/// Probability `q` that Alice's raw bit is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceDistribution {
    q: f64,
}

impl SourceDistribution {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Self { q })
        } else {
            Err(Error::domain(format!("bias q = {q} must lie in (0, 1)")))
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn probabilities(&self) -> [f64; 2] {
        [self.q, 1.0 - self.q]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointDistribution {
    /// `p_xy[x][y]`.
    pub p_xy: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    XGivenY,
    YGivenX,
}

impl JointDistribution {
    pub fn new(p_xy: [[f64; 2]; 2]) -> Result<Self> {
        let flat = p_xy.iter().flatten();
        if flat.clone().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::domain("joint probabilities must be nonnegative"));
        }
        let total: f64 = flat.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("joint probabilities sum to {total}")));
        }
        Ok(Self { p_xy })
    }

    pub fn marginal_x(&self) -> [f64; 2] {
        [
            self.p_xy[0][0] + self.p_xy[0][1],
            self.p_xy[1][0] + self.p_xy[1][1],
        ]
    }

    pub fn marginal_y(&self) -> [f64; 2] {
        [
            self.p_xy[0][0] + self.p_xy[1][0],
            self.p_xy[0][1] + self.p_xy[1][1],
        ]
    }

    pub fn conditional_entropy(&self, which: Conditioning) -> f64 {
        let joint = shannon(self.p_xy.iter().flatten().copied());
        let cond = match which {
            Conditioning::XGivenY => self.marginal_y(),
            Conditioning::YGivenX => self.marginal_x(),
        };
        (joint - shannon(cond)).max(0.0)
    }
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Shannon entropy of a probability vector, `0 log 0 = 0`.
pub fn shannon(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().map(plogp).sum()
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "binary entropy argument {x} outside [0, 1]"
        )));
    }
    Ok(plogp(x) + plogp(1.0 - x))
}

/// Binary entropy with the argument clamped into [0, 1]; for callers whose
/// argument is in range by construction.
pub(crate) fn h2(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    plogp(x) + plogp(1.0 - x)
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    spectral_entropy(rho.matrix())
}

/// Entropy of the spectrum of a Hermitian PSD operator; eigenvalues below
/// `-POSITIVITY_TOLERANCE` are an error.
pub(crate) fn spectral_entropy(m: &CMatrix) -> Result<f64> {
    let values = crate::linalg::hermitian_eigenvalues(m);
    if values[0] < -POSITIVITY_TOLERANCE {
        return Err(Error::InvalidDensity(format!(
            "min eigenvalue {:e}",
            values[0]
        )));
    }
    Ok(values
        .into_iter()
        .filter(|&l| l > ENTROPY_CUTOFF)
        .map(plogp)
        .sum())
}

/// `P_XY(x, y) = P_X(x) ⟨y| E(|x⟩⟨x|) |y⟩` in the z basis.
pub fn joint_distribution(ch: &QubitChannel, source: SourceDistribution) -> JointDistribution {
    let px = source.probabilities();
    let mut p_xy = [[0.0; 2]; 2];
    for (x, row) in p_xy.iter_mut().enumerate() {
        let theta_in = if x == 0 { 1.0 } else { -1.0 };
        // Only the z row of the map matters for a z measurement.
        let theta_z = ch.r[(0, 0)] * theta_in + ch.t[0];
        let p0 = ((1.0 + theta_z) / 2.0).clamp(0.0, 1.0);
        row[0] = px[x] * p0;
        row[1] = px[x] * (1.0 - p0);
    }
    JointDistribution { p_xy }
}

pub fn conditional_shannon(j: &JointDistribution, which: Conditioning) -> f64 {
    j.conditional_entropy(which)
}

/// `H(X|E) = H(ρ_XE) − H(ρ_E)` for the classical-quantum state
/// `ρ_XE = Σ_x P_X(x) |x⟩⟨x| ⊗ E_E(|x⟩⟨x|)`, with `E_E` the complementary
/// channel of the canonical Kraus decomposition.
pub fn h_x_given_e(ch: &QubitChannel, source: SourceDistribution) -> Result<f64> {
    let kraus = ch.kraus()?;
    h_x_given_e_with(&kraus, source)
}

/// Same as [`h_x_given_e`] for an explicit Kraus set.
pub fn h_x_given_e_with(
    kraus: &crate::channel::KrausSet,
    source: SourceDistribution,
) -> Result<f64> {
    let px = source.probabilities();
    let mut rho_xe = CMatrix::zeros(2 * ENV_DIM, 2 * ENV_DIM);
    let mut rho_e = CMatrix::zeros(ENV_DIM, ENV_DIM);
    for (x, &weight) in px.iter().enumerate() {
        let input = DensityMatrix::new(basis_projector(x))?;
        let env = kraus.complementary(&input)?.into_matrix().scale(weight);
        rho_xe
            .view_mut((x * ENV_DIM, x * ENV_DIM), (ENV_DIM, ENV_DIM))
            .copy_from(&env);
        rho_e += env;
    }
    Ok(spectral_entropy(&rho_xe)? - spectral_entropy(&rho_e)?)
}

/// `ρ_AB = (I ⊗ E)(|ψ⟩⟨ψ|)` with `|ψ⟩ = √q|00⟩ + √(1−q)|11⟩`.
pub fn biased_bipartite_state(ch: &QubitChannel, source: SourceDistribution) -> CMatrix {
    let amp = source.probabilities().map(f64::sqrt);
    let mut m = CMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            let mut eij = CMatrix::zeros(2, 2);
            eij[(i, j)] = Complex64::new(amp[i] * amp[j], 0.0);
            let out = ch.act(&eij);
            m.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&out);
        }
    }
    m
}

/// Purification of a 4×4 state into `C⁴ ⊗ C^ENV_DIM`, as a vector indexed
/// `system · ENV_DIM + env`.
pub fn purify(rho: &CMatrix) -> Result<DVector<Complex64>> {
    let dim = rho.nrows();
    let (values, vectors) = hermitian_eigen(rho);
    if values[0] < -POSITIVITY_TOLERANCE {
        return Err(Error::InvalidChoi {
            min_eigenvalue: values[0],
        });
    }
    if dim > ENV_DIM {
        return Err(Error::domain("state too large for the environment"));
    }
    let mut psi = DVector::from_element(dim * ENV_DIM, ZERO);
    for (k, &l) in values.iter().enumerate() {
        let amp = l.max(0.0).sqrt();
        for s in 0..dim {
            psi[s * ENV_DIM + k] = vectors[(s, k)] * amp;
        }
    }
    Ok(psi)
}

/// `H(Y|E) = H(ρ_YE) − H(ρ_E)`, where `ρ_YE` comes from purifying `ρ_AB`,
/// discarding A and measuring B in the z basis.
pub fn h_y_given_e(ch: &QubitChannel, source: SourceDistribution) -> Result<f64> {
    let rho_ab = biased_bipartite_state(ch, source);
    let psi = purify(&rho_ab)?;
    let global = &psi * psi.adjoint();
    // A ⊗ (B ⊗ E): trace out A.
    let rho_be = partial_trace_first(&global, 2, 2 * ENV_DIM);
    let mut rho_ye = CMatrix::zeros(2 * ENV_DIM, 2 * ENV_DIM);
    let mut rho_e = CMatrix::zeros(ENV_DIM, ENV_DIM);
    for y in 0..2 {
        let block = rho_be
            .view((y * ENV_DIM, y * ENV_DIM), (ENV_DIM, ENV_DIM))
            .into_owned();
        rho_ye
            .view_mut((y * ENV_DIM, y * ENV_DIM), (ENV_DIM, ENV_DIM))
            .copy_from(&block);
        rho_e += block;
    }
    Ok(spectral_entropy(&rho_ye)? - spectral_entropy(&rho_e)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{random_unitary, BlochVector};
    use crate::linalg::{max_abs_diff, partial_trace_second};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn src(q: f64) -> SourceDistribution {
        SourceDistribution::new(q).unwrap()
    }

    fn ad(p: f64) -> QubitChannel {
        QubitChannel::amplitude_damping(p).unwrap()
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // 2 − (3/4) log₂ 3
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_124_459_132_8).abs() < 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.0001).is_err());
    }

    #[test]
    fn von_neumann_values() {
        let mixed = BlochVector::new(0.0, 0.0, 0.0).to_density().unwrap();
        assert!((von_neumann_entropy(&mixed).unwrap() - 1.0).abs() < 1e-14);
        let pure = BlochVector::new(0.0, 0.6, 0.8).to_density().unwrap();
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        let partial = BlochVector::new(0.6, 0.0, 0.0).to_density().unwrap();
        let h08 = 0.721_928_094_887_362_4;
        assert!((von_neumann_entropy(&partial).unwrap() - h08).abs() < 1e-13);
    }

    #[test]
    fn source_rejects_endpoints() {
        assert!(SourceDistribution::new(0.0).is_err());
        assert!(SourceDistribution::new(1.0).is_err());
        assert!(SourceDistribution::new(f64::NAN).is_err());
    }

    #[test]
    fn joint_examples() {
        let j = joint_distribution(&QubitChannel::identity(), src(0.5));
        assert_eq!(j.p_xy, [[0.5, 0.0], [0.0, 0.5]]);

        let (p, q) = (0.35, 0.6);
        let j = joint_distribution(&ad(p), src(q));
        let expect = [[q, 0.0], [(1.0 - q) * p, (1.0 - q) * (1.0 - p)]];
        for (got, want) in j.p_xy.iter().flatten().zip(expect.iter().flatten()) {
            assert!((got - want).abs() < 1e-15);
        }

        let j = joint_distribution(&ad(1.0), src(0.3));
        assert!(j.marginal_y()[1].abs() < 1e-15);
    }

    #[test]
    fn conditional_shannon_examples() {
        let diag = JointDistribution::new([[0.5, 0.0], [0.0, 0.5]]).unwrap();
        assert_eq!(conditional_shannon(&diag, Conditioning::XGivenY), 0.0);
        assert_eq!(conditional_shannon(&diag, Conditioning::YGivenX), 0.0);
        let uniform = JointDistribution::new([[0.25; 2]; 2]).unwrap();
        assert!((conditional_shannon(&uniform, Conditioning::XGivenY) - 1.0).abs() < 1e-15);
        assert!((conditional_shannon(&uniform, Conditioning::YGivenX) - 1.0).abs() < 1e-15);

        let j = joint_distribution(&ad(0.5), src(0.5));
        assert!((conditional_shannon(&j, Conditioning::YGivenX) - 0.5).abs() < 1e-15);
        // H(XY) − H(Y) = 1.5 − h(0.75)
        let expect = 1.5 - 0.811_278_124_459_132_8;
        assert!((conditional_shannon(&j, Conditioning::XGivenY) - expect).abs() < 1e-15);

        assert!(JointDistribution::new([[0.5, 0.5], [0.1, 0.0]]).is_err());
        assert!(JointDistribution::new([[1.1, -0.1], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn h_x_given_e_examples() {
        for q in [0.1, 0.3, 0.5, 0.77] {
            let h = h_x_given_e(&QubitChannel::identity(), src(q)).unwrap();
            assert!((h - h2(q)).abs() < 1e-12);
            assert!(h_x_given_e(&ad(1.0), src(q)).unwrap().abs() < 1e-12);
        }
        // Direct closed-form rate is 0 here, so H(X|E) = H(X|Y).
        let h = h_x_given_e(&ad(0.5), src(0.5)).unwrap();
        assert!((h - 0.688_721_875_540_867_2).abs() < 1e-10);
    }

    #[test]
    fn h_y_given_e_examples() {
        for q in [0.1, 0.5, 0.77] {
            let h = h_y_given_e(&QubitChannel::identity(), src(q)).unwrap();
            assert!((h - h2(q)).abs() < 1e-12);
        }
        let h = h_y_given_e(&ad(0.0), src(0.3)).unwrap();
        assert!((h - 0.881_290_899_230_692_6).abs() < 1e-12);
        let h = h_y_given_e(&ad(0.5), src(0.5)).unwrap();
        assert!((h - 0.688_721_875_540_867_2).abs() < 1e-10);
    }

    #[test]
    fn purification_is_pure_and_reduces_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let ch = QubitChannel::random(&mut rng);
            let rho = biased_bipartite_state(&ch, src(0.37));
            let psi = purify(&rho).unwrap();
            let global = &psi * psi.adjoint();
            assert!(spectral_entropy(&global).unwrap() < 1e-10);
            let back = partial_trace_second(&global, 4, ENV_DIM);
            assert!(max_abs_diff(&back, &rho) < 1e-10);
        }
    }

    #[test]
    fn ambiguity_independent_of_kraus_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let ch = QubitChannel::random(&mut rng);
            let kraus = ch.kraus().unwrap();
            let u = random_unitary(&mut rng, ENV_DIM);
            let rotated = kraus.remixed(&u).unwrap();
            let s = src(0.42);
            let a = h_x_given_e_with(&kraus, s).unwrap();
            let b = h_x_given_e_with(&rotated, s).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
