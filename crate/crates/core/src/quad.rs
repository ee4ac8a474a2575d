//! Adaptive Gauss–Kronrod (7/15) quadrature.

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the local Kronrod − Gauss error estimates.
    pub error: f64,
    /// Whether every accepted panel met its share of the tolerance.
    pub converged: bool,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)`.
///
/// Panels are bisected depth-first; a panel is accepted once its error
/// estimate falls below its length-proportional share of the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    if b < a {
        let r = integrate(f, b, a, abs_tol, rel_tol);
        return Quadrature {
            value: -r.value,
            ..r
        };
    }
    let (whole, whole_err) = kronrod(&f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    let width = b - a;
    let mut stack = vec![(a, b, whole, whole_err, 0u32)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    while let Some((lo, hi, v, e, depth)) = stack.pop() {
        let share = tol * (hi - lo) / width;
        if e <= share || depth >= 50 || hi - lo <= 8.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            if e > share {
                converged = false;
            }
            value += v;
            error += e;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (vl, el) = kronrod(&f, lo, mid);
        let (vr, er) = kronrod(&f, mid, hi);
        stack.push((mid, hi, vr, er, depth + 1));
        stack.push((lo, mid, vl, el, depth + 1));
    }
    Quadrature {
        value,
        error,
        converged,
    }
}

/// Integrates `f` over `[a, ∞)` through the map `y = a + t/(1 − t)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Integrates over `[a, b]` split at the interior `breaks`, which need not be sorted.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Quadrature {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.insert(0, a);
    pts.push(b);
    let pieces = (pts.len() - 1) as f64;
    let mut out = Quadrature {
        value: 0.0,
        error: 0.0,
        converged: true,
    };
    for w in pts.windows(2) {
        let r = integrate(&f, w[0], w[1], abs_tol / pieces, rel_tol);
        out.value += r.value;
        out.error += r.error;
        out.converged &= r.converged;
    }
    out
}
