//! One-dimensional search primitives.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `tol`. Returns `(x, f(x))`.
pub(crate) fn golden_section_max<F, E>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Evenly spaced scan of `n ≥ 2` points over `[a, b]` followed by golden
/// refinement around the best sample.
pub(crate) fn scan_refine_max<F, E>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
    tol: f64,
) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let step = (b - a) / (n - 1) as f64;
    let grid = |i: usize| if i + 1 == n { b } else { a + step * i as f64 };
    let mut best = (a, f64::NEG_INFINITY);
    let mut best_i = 0;
    for i in 0..n {
        let x = grid(i);
        let fx = f(x)?;
        if fx > best.1 {
            best = (x, fx);
            best_i = i;
        }
    }
    let lo = grid(best_i.saturating_sub(1));
    let hi = grid((best_i + 1).min(n - 1));
    let refined = golden_section_max(&mut f, lo, hi, tol)?;
    Ok(if refined.1 > best.1 { refined } else { best })
}

/// Bisection on a predicate that is true at `good` and false at `bad`;
/// returns the last point where it held.
pub(crate) fn bisect<F, E>(
    mut holds: F,
    mut good: f64,
    mut bad: f64,
    iterations: usize,
) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<bool, E>,
{
    for _ in 0..iterations {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if holds(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(
            |x| Ok::<_, Infallible>(-(x - 0.3) * (x - 0.3) + 2.0),
            -1.0,
            1.0,
            1e-10,
        )
        .unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn scan_handles_multimodal() {
        // Two humps; the right one is higher.
        let f = |x: f64| {
            Ok::<_, Infallible>(
                (-(x + 0.5).powi(2) * 50.0).exp() + 1.5 * (-(x - 0.6).powi(2) * 50.0).exp(),
            )
        };
        let (x, _) = scan_refine_max(f, -1.0, 1.0, 101, 1e-10).unwrap();
        assert!((x - 0.6).abs() < 1e-4);
    }

    #[test]
    fn bisect_threshold() {
        let x = bisect(|x| Ok::<_, Infallible>(x < 0.123), 0.0, 1.0, 60).unwrap();
        assert!((x - 0.123).abs() < 1e-15 && x < 0.123);
    }
}
