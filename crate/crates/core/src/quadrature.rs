//! Adaptive Gauss–Kronrod (G7/K15) quadrature for complex-valued integrands.

use num_complex::Complex64;

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

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    /// Estimated absolute error.
    pub error: f64,
    /// False when the subdivision limit was hit before reaching the tolerance.
    pub converged: bool,
}

/// One G7/K15 panel; returns (Kronrod value, |K − G|).
pub fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += sum * WGK[j];
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

/// Recursive bisection until each panel's error is within its share of `tol`.
pub fn adaptive<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64, tol: f64, max_depth: u32) -> Integral {
    let (value, error) = gk15(f, a, b);
    refine(f, a, b, value, error, tol, max_depth)
}

fn refine<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    tol: f64,
    depth: u32,
) -> Integral {
    // the estimate cannot get below rounding of the panel sum
    let floor = 50.0 * f64::EPSILON * value.norm();
    if error <= tol.max(floor) {
        return Integral { value, error, converged: true };
    }
    if depth == 0 {
        return Integral { value, error, converged: false };
    }
    let mid = 0.5 * (a + b);
    let (lv, le) = gk15(f, a, mid);
    let (rv, re) = gk15(f, mid, b);
    let left = refine(f, a, mid, lv, le, 0.5 * tol, depth - 1);
    let right = refine(f, mid, b, rv, re, 0.5 * tol, depth - 1);
    Integral {
        value: left.value + right.value,
        error: left.error + right.error,
        converged: left.converged && right.converged,
    }
}

/// Splits [a, b] at `breaks` and into pieces no wider than `max_width`.
pub fn panels(a: f64, b: f64, breaks: &[f64], max_width: f64) -> Vec<(f64, f64)> {
    let mut nodes = vec![a];
    nodes.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    nodes.push(b);
    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let pieces = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let h = (hi - lo) / pieces as f64;
        for j in 0..pieces {
            let start = lo + h * j as f64;
            let end = if j + 1 == pieces { hi } else { lo + h * (j + 1) as f64 };
            out.push((start, end));
        }
    }
    out
}
