use super::GridSpec;

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub max: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_STEPS: usize = 200;

fn finite_or_neg_inf(y: f64) -> f64 {
    if y.is_nan() {
        f64::NEG_INFINITY
    } else {
        y
    }
}

// Exact ties go to the larger argmax.
fn better(candidate: Maximum, incumbent: Maximum) -> bool {
    candidate.max > incumbent.max || (candidate.max == incumbent.max && candidate.argmax > incumbent.argmax)
}

/// Golden-section search on `[a, b]`, returning the best point evaluated.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Maximum {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = finite_or_neg_inf(f(x1));
    let mut f2 = finite_or_neg_inf(f(x2));
    let mut best = if f2 >= f1 {
        Maximum { argmax: x2, max: f2 }
    } else {
        Maximum { argmax: x1, max: f1 }
    };
    for _ in 0..MAX_GOLDEN_STEPS {
        if b - a <= tol {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = finite_or_neg_inf(f(x2));
            let c = Maximum { argmax: x2, max: f2 };
            if better(c, best) {
                best = c;
            }
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = finite_or_neg_inf(f(x1));
            let c = Maximum { argmax: x1, max: f1 };
            if better(c, best) {
                best = c;
            }
        }
    }
    best
}

/// Global maximization on `[lo, hi]`: scan `grid.n_q1` evenly spaced points,
/// refine every coarse local maximum by golden section, and keep the best.
/// Ties are broken toward the larger argmax.
pub fn maximize_global<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: &GridSpec, tol: f64) -> Maximum {
    maximize_with_points(f, lo, hi, grid.n_q1.max(2), tol)
}

pub fn maximize_with_points<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> Maximum {
    let n = n.max(2);
    if hi <= lo {
        return Maximum {
            argmax: lo,
            max: finite_or_neg_inf(f(lo)),
        };
    }
    let xs = super::linspace(lo, hi, n);
    let ys: Vec<f64> = xs.iter().map(|&x| finite_or_neg_inf(f(x))).collect();

    let mut best = Maximum {
        argmax: xs[0],
        max: ys[0],
    };
    for (&x, &y) in xs.iter().zip(&ys).skip(1) {
        let c = Maximum { argmax: x, max: y };
        if better(c, best) {
            best = c;
        }
    }

    for i in 0..n {
        let left_ok = i == 0 || ys[i] >= ys[i - 1];
        let right_ok = i == n - 1 || ys[i] >= ys[i + 1];
        if !(left_ok && right_ok) || ys[i] == f64::NEG_INFINITY {
            continue;
        }
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(n - 1)];
        let refined = golden_section(&f, a, b, tol);
        if better(refined, best) {
            best = refined;
        }
    }
    best
}
