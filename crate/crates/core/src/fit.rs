//! Fitting estimated `(R_zz, R_zx, R_xz, R_xx, t_z, t_x)` to physical
//! channels under a diagonal weighted least-squares metric.
//!
//! Two fits are provided: the nearest completable parameters (a small convex
//! problem over the six parameters plus `R_yy`), and the nearest channel
//! whose Choi state has at most a given rank, searched over Stinespring
//! isometries with Levenberg-Marquardt.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use num_complex::Complex64;

use crate::channel::{ChoiState, KrausSet};
use crate::error::{Error, Result};
use crate::keyrate::OmegaParams;
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, CMatrix};

const BARRIER_T_MAX: f64 = 1e14;
const BARRIER_GROWTH: f64 = 8.0;
const NEWTON_ITERATIONS: usize = 50;
const NEWTON_TOLERANCE: f64 = 1e-10;

const LM_ITERATIONS: usize = 300;
const LM_STEP: f64 = 1e-7;

pub(crate) fn chi_square(a: &[f64; 6], b: &[f64; 6], weights: &[f64; 6]) -> f64 {
    (0..6).map(|k| weights[k] * (a[k] - b[k]).powi(2)).sum()
}

fn params(x: &[f64]) -> OmegaParams {
    OmegaParams::from_array([x[0], x[1], x[2], x[3], x[4], x[5]])
}

/// Minimizes the weighted distance to `target` over parameters and a free
/// `R_yy`, subject to a positive semidefinite Choi state.
///
/// The Choi state is affine in the seven numbers, so this is convex. It is
/// solved with a log-det barrier and damped Newton steps started from the
/// completely depolarizing channel; the result is strictly inside the
/// feasible set by a margin far below any statistical resolution.
pub(crate) fn nearest_feasible(target: &[f64; 6], weights: &[f64; 6]) -> Result<OmegaParams> {
    let choi_at = |x: &[f64; 7]| params(x).completed(x[6]).choi().matrix().clone();
    let base = choi_at(&[0.0; 7]);
    let basis: Vec<CMatrix> = (0..7)
        .map(|k| {
            let mut e = [0.0; 7];
            e[k] = 1.0;
            choi_at(&e) - &base
        })
        .collect();
    let choi = |x: &[f64; 7]| {
        basis.iter().zip(x).fold(base.clone(), |acc, (a, &xk)| {
            acc + a * Complex64::new(xk, 0.0)
        })
    };
    let objective = |x: &[f64; 7], t: f64| -> Option<f64> {
        let values = hermitian_eigenvalues(&choi(x));
        if values.iter().any(|&l| l <= 0.0) {
            return None;
        }
        let log_det: f64 = values.iter().map(|l| l.ln()).sum();
        let dist: f64 = (0..6)
            .map(|k| weights[k] * (x[k] - target[k]).powi(2))
            .sum();
        Some(t * dist - log_det)
    };

    let mut x = [0.0; 7];
    let mut t = 1.0;
    while t < BARRIER_T_MAX {
        for _ in 0..NEWTON_ITERATIONS {
            // Near a pure Choi state the barrier Hessian can stop being
            // invertible; the current iterate is then as close as it gets.
            let Some(inv) = choi(&x).try_inverse() else {
                break;
            };
            let scaled: Vec<CMatrix> = basis.iter().map(|a| &inv * a).collect();
            let mut grad = SVector::<f64, 7>::zeros();
            let mut hess = SMatrix::<f64, 7, 7>::zeros();
            for k in 0..7 {
                grad[k] = -scaled[k].trace().re;
                if k < 6 {
                    grad[k] += 2.0 * t * weights[k] * (x[k] - target[k]);
                    hess[(k, k)] += 2.0 * t * weights[k];
                }
                for l in 0..=k {
                    let h = (&scaled[k] * &scaled[l]).trace().re;
                    hess[(k, l)] += h;
                    if l != k {
                        hess[(l, k)] += h;
                    }
                }
            }
            let Some(chol) = hess.cholesky() else { break };
            let step = chol.solve(&(-grad));
            let decrement = -grad.dot(&step);
            if decrement / 2.0 < NEWTON_TOLERANCE {
                break;
            }
            let current = objective(&x, t).expect("iterate stays strictly feasible");
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-12 {
                let trial: [f64; 7] = std::array::from_fn(|k| x[k] + s * step[k]);
                if objective(&trial, t).is_some_and(|v| v <= current - 0.25 * s * decrement) {
                    x = trial;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        t *= BARRIER_GROWTH;
    }
    Ok(params(&x))
}

/// Stinespring isometry `V = A (A^dag A)^{-1/2}` for an arbitrary full-rank
/// `2r x 2` matrix `A`, split into `r` Kraus operators.
fn kraus_from_dilation(a: &CMatrix) -> Option<KrausSet> {
    let gram = a.adjoint() * a;
    let (values, vectors) = hermitian_eigen(&gram);
    if values[0] <= 1e-300 {
        return None;
    }
    let inv_sqrt = CMatrix::from_diagonal(&DVector::from_iterator(
        2,
        values.iter().map(|&l| Complex64::new(l.powf(-0.5), 0.0)),
    ));
    let v = a * (&vectors * inv_sqrt * vectors.adjoint());
    let ops = (0..a.nrows() / 2)
        .map(|k| v.rows(2 * k, 2).into_owned())
        .collect();
    KrausSet::new(ops).ok()
}

fn unpack(x: &[f64], rank: usize) -> CMatrix {
    CMatrix::from_fn(2 * rank, 2, |r, c| {
        let k = 2 * (r * 2 + c);
        Complex64::new(x[k], x[k + 1])
    })
}

fn pack(a: &CMatrix) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * a.len());
    for r in 0..a.nrows() {
        for c in 0..2 {
            x.push(a[(r, c)].re);
            x.push(a[(r, c)].im);
        }
    }
    x
}

/// Best channel with Choi rank at most `rank` (1 to 3) under the weighted
/// metric, started from the leading eigenvectors of `start`. Returns the
/// fitted parameters and their chi-square distance from `target`.
pub(crate) fn low_rank_fit(
    target: &[f64; 6],
    weights: &[f64; 6],
    rank: usize,
    start: &ChoiState,
) -> Result<(OmegaParams, f64)> {
    if !(1..=3).contains(&rank) {
        return Err(Error::domain(format!("rank must lie in 1..=3, got {rank}")));
    }
    let (values, vectors) = hermitian_eigen(start.matrix());
    let init = CMatrix::from_fn(2 * rank, 2, |r, i| {
        let (k, a) = (r / 2, r % 2);
        let idx = 3 - k;
        vectors[(2 * i + a, idx)] * (2.0 * values[idx].max(1e-6)).sqrt()
    });
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let residual = |x: &[f64]| -> Option<DVector<f64>> {
        let om = OmegaParams::from_channel(&kraus_from_dilation(&unpack(x, rank))?.to_channel());
        let a = om.to_array();
        Some(DVector::from_fn(6, |k, _| sqrt_w[k] * (a[k] - target[k])))
    };

    let mut x = pack(&init);
    let n = x.len();
    let mut res = residual(&x).ok_or_else(|| Error::domain("degenerate starting dilation"))?;
    let mut cost = res.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..LM_ITERATIONS {
        let mut jac = DMatrix::<f64>::zeros(6, n);
        for j in 0..n {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[j] += LM_STEP;
            lo[j] -= LM_STEP;
            if let (Some(rh), Some(rl)) = (residual(&hi), residual(&lo)) {
                jac.set_column(j, &((rh - rl) / (2.0 * LM_STEP)));
            }
        }
        let jt_r = jac.transpose() * &res;
        let jt_j = jac.transpose() * &jac;
        let mut improved = false;
        while mu < 1e12 {
            let lhs = &jt_j + DMatrix::<f64>::identity(n, n) * mu;
            let Some(step) = lhs.cholesky().map(|c| c.solve(&(-&jt_r))) else {
                mu *= 4.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            match residual(&trial) {
                Some(r) if r.norm_squared() < cost => {
                    let gain = cost - r.norm_squared();
                    x = trial;
                    res = r;
                    cost = res.norm_squared();
                    mu = (mu / 3.0).max(1e-12);
                    improved = gain > 1e-12 * (1.0 + cost);
                    break;
                }
                _ => mu *= 4.0,
            }
        }
        if !improved {
            break;
        }
    }
    let kraus = kraus_from_dilation(&unpack(&x, rank))
        .ok_or_else(|| Error::domain("degenerate dilation"))?;
    let omega = OmegaParams::from_channel(&kraus.to_channel());
    Ok((omega, chi_square(&omega.to_array(), target, weights)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::QubitChannel;

    const UNIT: [f64; 6] = [1.0; 6];

    #[test]
    fn feasible_target_is_its_own_projection() {
        let target =
            OmegaParams::from_channel(&QubitChannel::amplitude_damping(0.3).unwrap()).to_array();
        let got = nearest_feasible(&target, &UNIT).unwrap().to_array();
        assert!(chi_square(&got, &target, &UNIT) < 1e-10);
    }

    #[test]
    fn projection_lands_on_feasible_set() {
        let target = [1.0, 0.0, 0.0, 1.05, 0.0, 0.0];
        let got = nearest_feasible(&target, &UNIT).unwrap();
        assert!(got.feasible_r_yy().is_ok());
        // Nearest point of the unital slice: R_xx pulled back to 1.
        assert!((got.r_xx - 1.0).abs() < 1e-5, "{got:?}");
    }

    #[test]
    fn low_rank_fit_recovers_rank_two_channel() {
        let ch = QubitChannel::amplitude_damping(0.2).unwrap();
        let target = OmegaParams::from_channel(&ch).to_array();
        let start = QubitChannel::new(ch.r * 0.99, ch.t * 0.99).choi();
        let (om, chi) = low_rank_fit(&target, &UNIT, 2, &start).unwrap();
        assert!(chi < 1e-14, "{chi}");
        assert!(om.feasible_r_yy().is_ok());
    }

    #[test]
    fn rank_one_cannot_fit_depolarizing() {
        let ch = QubitChannel::new(
            nalgebra::Matrix3::identity() * 0.5,
            nalgebra::Vector3::zeros(),
        );
        let target = OmegaParams::from_channel(&ch).to_array();
        let (_, chi) = low_rank_fit(&target, &UNIT, 1, &ch.choi()).unwrap();
        assert!(chi > 0.1, "{chi}");
    }
}
