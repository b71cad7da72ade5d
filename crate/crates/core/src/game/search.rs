//! One-dimensional maximization and root bracketing.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Values closer than this (relative) count as ties.
pub(crate) const TIE_EPS: f64 = 1e-12;

pub(crate) fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + TIE_EPS * incumbent.abs().max(1.0)
}

/// Evenly spaced grid over `[lo, hi]`, endpoints included.
pub(crate) fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    debug_assert!(points >= 2);
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|j| {
            if j + 1 == points {
                hi
            } else {
                lo + step * j as f64
            }
        })
        .collect()
}

/// Index of the first maximum; later points must beat it by more than a tie.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if improves(v, values[best]) {
            best = j;
        }
    }
    best
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub(crate) fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid scan over `xs` (values `ys`) followed by golden-section refinement in
/// the bracket around the best grid point. The refined point is kept only if
/// it beats the grid maximum by more than a tie.
pub(crate) fn maximize(xs: &[f64], ys: &[f64], tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let j = argmax(ys);
    let lo = xs[j.saturating_sub(1)];
    let hi = xs[(j + 1).min(xs.len() - 1)];
    let (x, v) = golden_max(lo, hi, tol, f);
    if improves(v, ys[j]) {
        (x, v)
    } else {
        (xs[j], ys[j])
    }
}

/// Bisection for a sign change of `f` on `[a, b]`, `f(a)` and `f(b)` of opposite sign.
pub(crate) fn bisect(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut fa = f(a);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
