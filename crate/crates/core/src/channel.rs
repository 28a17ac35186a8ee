//! Qubit states and channels in Stokes form, together with the Choi and
//! Kraus representations used to check complete positivity and to build the
//! environment's view of a channel.
//!
//! Conventions:
//! * Stokes components are always ordered (z, x, y).
//! * Outcome +1 of σ_z is bit 0, so |0⟩ sits at θ_z = +1.
//! * Choi state is `(I ⊗ E)(|Φ⟩⟨Φ|)` with `|Φ⟩ = (|00⟩ + |11⟩)/√2`; the
//!   first factor is the reference copy of the input, so index `2·i + a`
//!   addresses input `i`, output `a`. Its trace is 1.

use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermitian_eigenvalues, hermitian_part, hermiticity_defect, identity2,
    partial_trace_second, paulis, CMatrix, ONE, ZERO,
};

/// Slack allowed on |θ| ≤ 1 for a physical state.
pub const BLOCH_TOLERANCE: f64 = 1e-12;
/// Eigenvalues down to this negative value count as numerical noise.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;
const HERMITIAN_TOLERANCE: f64 = 1e-12;
const TRACE_TOLERANCE: f64 = 1e-12;
const COMPLETENESS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub theta_z: f64,
    pub theta_x: f64,
    pub theta_y: f64,
}

impl BlochVector {
    pub const fn new(theta_z: f64, theta_x: f64, theta_y: f64) -> Self {
        Self {
            theta_z,
            theta_x,
            theta_y,
        }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta_z, self.theta_x, self.theta_y)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    /// Density matrix `(I + θ_z σ_z + θ_x σ_x + θ_y σ_y) / 2`.
    pub fn to_density(&self) -> Result<DensityMatrix> {
        let norm = self.norm();
        if norm > 1.0 + BLOCH_TOLERANCE || !norm.is_finite() {
            return Err(Error::NonPhysicalState { norm });
        }
        Ok(DensityMatrix(stokes_operator(1.0, &self.as_vector())))
    }
}

/// `(x0·I + Σ_a v_a σ_a) / 2`.
fn stokes_operator(x0: f64, v: &Vector3<f64>) -> CMatrix {
    let [sz, sx, sy] = paulis();
    (identity2().scale(x0) + sz.scale(v[0]) + sx.scale(v[1]) + sy.scale(v[2])).scale(0.5)
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidDensity("matrix is not square".into()));
        }
        let defect = hermiticity_defect(&m);
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "hermiticity defect {defect:e}"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let m = hermitian_part(&m);
        let min = hermitian_eigenvalues(&m)[0];
        if min < -POSITIVITY_TOLERANCE {
            return Err(Error::InvalidDensity(format!("min eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }

    /// Stokes vector of a 2×2 state.
    pub fn to_bloch(&self) -> Result<BlochVector> {
        if self.dim() != 2 {
            return Err(Error::domain(format!(
                "Bloch vector of a {}-dimensional state",
                self.dim()
            )));
        }
        let [sz, sx, sy] = paulis();
        let ex = |s: &CMatrix| (s * &self.0).trace().re;
        Ok(BlochVector::new(ex(&sz), ex(&sx), ex(&sy)))
    }
}

/// Affine Stokes map `θ ↦ R θ + t`; rows and columns of `R` in (z, x, y) order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitChannel {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl QubitChannel {
    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self { r, t }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    /// Decay |1⟩ → |0⟩ with probability `p`:
    /// `R = diag(1 − p, √(1 − p), √(1 − p))`, `t = (p, 0, 0)`.
    pub fn amplitude_damping(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!(
                "damping probability {p} outside [0, 1]"
            )));
        }
        let s = (1.0 - p).sqrt();
        Ok(Self::new(
            Matrix3::from_diagonal(&Vector3::new(1.0 - p, s, s)),
            Vector3::new(p, 0.0, 0.0),
        ))
    }

    pub fn apply(&self, v: &BlochVector) -> BlochVector {
        BlochVector::from_vector(&(self.r * v.as_vector() + self.t))
    }

    /// Linear extension of the channel to an arbitrary 2×2 operator.
    pub fn act(&self, x: &CMatrix) -> CMatrix {
        let [sz, sx, sy] = paulis();
        let x0 = x.trace();
        let xs = [(&sz * x).trace(), (&sx * x).trace(), (&sy * x).trace()];
        let mut out = identity2() * x0;
        for (a, s) in [sz, sx, sy].iter().enumerate() {
            let coeff: Complex64 =
                (0..3).map(|b| xs[b] * self.r[(a, b)]).sum::<Complex64>() + x0 * self.t[a];
            out += s * coeff;
        }
        out.scale(0.5)
    }

    pub fn choi(&self) -> ChoiState {
        let mut m = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let mut eij = CMatrix::zeros(2, 2);
                eij[(i, j)] = ONE;
                let out = self.act(&eij);
                for a in 0..2 {
                    for b in 0..2 {
                        m[(2 * i + a, 2 * j + b)] = out[(a, b)] * 0.5;
                    }
                }
            }
        }
        ChoiState(m)
    }

    pub fn is_tpcp(&self) -> TpcpDiagnostics {
        self.choi().diagnostics()
    }

    pub fn kraus(&self) -> Result<KrausSet> {
        self.choi().to_kraus()
    }

    /// Channel with every parameter unobservable from z/x statistics zeroed,
    /// keeping `R_yy`.
    pub fn with_nuisance_zeroed(&self) -> Self {
        let mut ch = *self;
        ch.r[(0, 2)] = 0.0;
        ch.r[(1, 2)] = 0.0;
        ch.r[(2, 0)] = 0.0;
        ch.r[(2, 1)] = 0.0;
        ch.t[2] = 0.0;
        ch
    }

    /// Channel drawn from random Kraus sets of `1..=4` operators.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let count = rng.random_range(1..=4);
        KrausSet::random(rng, count).to_channel()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.r - other.r)
            .abs()
            .max()
            .max((self.t - other.t).abs().max())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<ChannelJson>(s)?.try_into()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> ChannelJson {
        ChannelJson::Affine {
            r: std::array::from_fn(|a| std::array::from_fn(|b| self.r[(a, b)])),
            t: std::array::from_fn(|a| self.t[a]),
        }
    }
}

/// On-disk channel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelJson {
    Affine {
        #[serde(rename = "R")]
        r: [[f64; 3]; 3],
        t: [f64; 3],
    },
    Named {
        amplitude_damping: DampingParameter,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingParameter {
    pub p: f64,
}

impl TryFrom<ChannelJson> for QubitChannel {
    type Error = Error;

    fn try_from(js: ChannelJson) -> Result<Self> {
        match js {
            ChannelJson::Affine { r, t } => {
                let values = r.iter().flatten().chain(t.iter());
                if values.clone().any(|v| !v.is_finite()) {
                    return Err(Error::Parse("channel parameters must be finite".into()));
                }
                Ok(QubitChannel::new(
                    Matrix3::from_fn(|a, b| r[a][b]),
                    Vector3::from_column_slice(&t),
                ))
            }
            ChannelJson::Named { amplitude_damping } => {
                QubitChannel::amplitude_damping(amplitude_damping.p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TpcpDiagnostics {
    pub valid: bool,
    pub min_eigenvalue: f64,
    /// Largest entry of `|tr_out(Choi) − I/2|`.
    pub trace_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiState(CMatrix);

impl ChoiState {
    /// Wraps a 4×4 operator already in the Choi convention of this module.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.shape() != (4, 4) {
            return Err(Error::domain("Choi state must be 4x4"));
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Nearest PSD operator (negative eigenvalues clipped), congruence-scaled
    /// on the input factor so the result is again trace preserving.
    pub fn projected(&self) -> Result<Self> {
        let (values, vectors) = hermitian_eigen(&self.0);
        let clipped = CMatrix::from_diagonal(&DVector::from_iterator(
            4,
            values.iter().map(|&l| Complex64::new(l.max(0.0), 0.0)),
        ));
        let psd = &vectors * clipped * vectors.adjoint();
        let input = partial_trace_second(&psd, 2, 2).scale(2.0);
        let (in_vals, in_vecs) = hermitian_eigen(&input);
        if in_vals[0] <= 0.0 {
            return Err(Error::InvalidChoi {
                min_eigenvalue: values[0],
            });
        }
        let inv_sqrt = CMatrix::from_diagonal(&DVector::from_iterator(
            2,
            in_vals.iter().map(|&l| Complex64::new(l.powf(-0.5), 0.0)),
        ));
        let s = &in_vecs * inv_sqrt * in_vecs.adjoint();
        let lift = s.kronecker(&identity2());
        Ok(Self(hermitian_part(&(&lift * psd * &lift))))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0)[0]
    }

    pub fn diagnostics(&self) -> TpcpDiagnostics {
        let min_eigenvalue = self.min_eigenvalue();
        let reduced = partial_trace_second(&self.0, 2, 2);
        let half = identity2().scale(0.5);
        let trace_defect = (reduced - half)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        TpcpDiagnostics {
            valid: min_eigenvalue >= -POSITIVITY_TOLERANCE && trace_defect <= POSITIVITY_TOLERANCE,
            min_eigenvalue,
            trace_defect,
        }
    }

    /// Canonical Kraus operators `K_k[a, i] = √(2 λ_k) v_k[2i + a]` from the
    /// spectral decomposition; eigenvalues at or below the positivity
    /// tolerance are dropped.
    pub fn to_kraus(&self) -> Result<KrausSet> {
        let (values, vectors) = hermitian_eigen(&self.0);
        if values[0] < -POSITIVITY_TOLERANCE {
            return Err(Error::InvalidChoi {
                min_eigenvalue: values[0],
            });
        }
        let mut ops: Vec<CMatrix> = values
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &l)| l > POSITIVITY_TOLERANCE)
            .map(|(k, &l)| {
                let v = vectors.column(k);
                let s = (2.0 * l).sqrt();
                CMatrix::from_fn(2, 2, |a, i| v[2 * i + a] * s)
            })
            .collect();
        if ops.is_empty() {
            ops.push(CMatrix::zeros(2, 2));
        }
        // Dropped eigenvalues leave a completeness defect of the same order;
        // fold it back in with S^{-1/2}, S = sum K^dag K.
        let s = ops
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, k| acc + k.adjoint() * k);
        let (values, vectors) = hermitian_eigen(&s);
        if values[0] > 0.5 {
            let inv_sqrt = CMatrix::from_diagonal(&DVector::from_iterator(
                2,
                values.iter().map(|&l| Complex64::new(l.powf(-0.5), 0.0)),
            ));
            let correction = &vectors * inv_sqrt * vectors.adjoint();
            for k in &mut ops {
                *k = &*k * &correction;
            }
        }
        KrausSet::new(ops)
    }
}

/// Kraus operators `{K_i}` with `Σ K_i† K_i = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet(Vec<CMatrix>);

impl KrausSet {
    pub const MAX_OPERATORS: usize = 4;

    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        if ops.is_empty() || ops.len() > Self::MAX_OPERATORS {
            return Err(Error::InvalidKraus(format!("{} operators", ops.len())));
        }
        if ops.iter().any(|k| k.shape() != (2, 2)) {
            return Err(Error::InvalidKraus("operators must be 2x2".into()));
        }
        let sum: CMatrix = ops.iter().map(|k| k.adjoint() * k).sum();
        let defect = (sum - identity2())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > COMPLETENESS_TOLERANCE {
            return Err(Error::InvalidKraus(format!(
                "completeness defect {defect:e}"
            )));
        }
        Ok(Self(ops))
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ K_i X K_i†`.
    pub fn act(&self, x: &CMatrix) -> CMatrix {
        self.0.iter().map(|k| k * x * k.adjoint()).sum()
    }

    /// Affine form re-derived from the Kraus action:
    /// `R_ab = ½ tr(σ_a E(σ_b))`, `t_a = ½ tr(σ_a E(I))`.
    pub fn to_channel(&self) -> QubitChannel {
        let sig = paulis();
        let e_id = self.act(&identity2());
        let images: Vec<CMatrix> = sig.iter().map(|s| self.act(s)).collect();
        let r = Matrix3::from_fn(|a, b| 0.5 * (&sig[a] * &images[b]).trace().re);
        let t = Vector3::from_fn(|a, _| 0.5 * (&sig[a] * &e_id).trace().re);
        QubitChannel::new(r, t)
    }

    /// Output of the complementary channel, zero-padded to dimension 4:
    /// `[E_E(ρ)]_ij = tr(K_i ρ K_j†)`.
    pub fn complementary(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != 2 {
            return Err(Error::domain("complementary channel takes a qubit state"));
        }
        let env = CMatrix::from_fn(Self::MAX_OPERATORS, Self::MAX_OPERATORS, |i, j| {
            match (self.0.get(i), self.0.get(j)) {
                (Some(ki), Some(kj)) => (ki * rho.matrix() * kj.adjoint()).trace(),
                _ => ZERO,
            }
        });
        DensityMatrix::new(env)
    }

    /// Unitary remixing `K'_i = Σ_j u_ij K_j`; `u` may be larger than the set,
    /// in which case the set is padded with zero operators.
    pub fn remixed(&self, u: &CMatrix) -> Result<Self> {
        let n = u.nrows();
        if u.ncols() != n || n < self.len() || n > Self::MAX_OPERATORS {
            return Err(Error::InvalidKraus(format!(
                "cannot remix with a {}x{} matrix",
                n,
                u.ncols()
            )));
        }
        let zero = CMatrix::zeros(2, 2);
        let ops = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.0.get(j).unwrap_or(&zero) * u[(i, j)])
                    .sum::<CMatrix>()
            })
            .collect();
        Self::new(ops)
    }

    /// Kraus set cut from a Haar-like random isometry `C² → C^{2·count}`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Self {
        let count = count.clamp(1, Self::MAX_OPERATORS);
        let g = CMatrix::from_fn(2 * count, 2, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let q = g.qr().q();
        let ops = (0..count).map(|k| q.rows(2 * k, 2).into_owned()).collect();
        Self::new(ops).expect("isometry blocks are complete")
    }
}

/// Haar-like random unitary of size `n`.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    g.qr().q()
}

/// Projector onto a computational basis state of a qubit.
pub fn basis_projector(bit: usize) -> CMatrix {
    let mut v = DVector::from_element(2, ZERO);
    v[bit] = ONE;
    &v * v.adjoint()
}
