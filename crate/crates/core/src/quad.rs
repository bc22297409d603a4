//! Quadrature and extrapolation kernels shared across the crate.
//!
//! Nothing here knows about Bessel functions or Brownian motion; these are
//! the plain building blocks: Gauss–Legendre panels with adaptive bisection,
//! an Euler-transformed tail summer for alternating series, polynomial
//! extrapolation to zero, and a panel summer for Fourier-type integrals
//! `∫ g(v) sin(ωv) dv` whose oscillation count would defeat blind adaptivity.

use alloc::vec;
use alloc::vec::Vec;

/// Result of a quadrature with an honest absolute error estimate.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

/// Gauss–Legendre rule on `[-1, 1]`, nodes found by Newton iteration on the
/// Legendre recurrence. Deterministic to the last bit for a given `n`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dpdz = 0.0;
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = (((2 * j + 1) as f64) * z * p1 - (j as f64) * p2) / ((j + 1) as f64);
                }
                dpdz = nf * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dpdz;
                z -= dz;
                if libm::fabs(dz) < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dpdz * dpdz);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Integrate `f` over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(self.weights.iter()) {
            acc += w * f(mid + half * x);
        }
        half * acc
    }
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. The error indicator on each panel is the difference
/// between the whole-panel rule and the sum of its two halves.
pub fn adaptive<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> QuadResult {
    let rule = GaussRule::legendre(15);
    adaptive_with_rule(&rule, f, a, b, tol)
}

pub fn adaptive_with_rule<F: FnMut(f64) -> f64>(
    rule: &GaussRule,
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
) -> QuadResult {
    // explicit stack; recursion depth on nasty integrands can exceed what we
    // want to put on the call stack
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    while let Some((a0, b0, t0, depth)) = stack.pop() {
        let whole = rule.integrate(f, a0, b0);
        let m = 0.5 * (a0 + b0);
        let left = rule.integrate(f, a0, m);
        let right = rule.integrate(f, m, b0);
        let err = libm::fabs(left + right - whole);
        if err <= t0 || depth >= 40 {
            value += left + right;
            error += err;
            if depth >= 40 && err > t0 {
                converged = false;
            }
        } else {
            stack.push((a0, m, 0.5 * t0, depth + 1));
            stack.push((m, b0, 0.5 * t0, depth + 1));
        }
    }
    QuadResult {
        value,
        error_estimate: error,
        converged,
    }
}

/// Sum of a (nearly) alternating series by iterated averaging of partial
/// sums (Euler/van Wijngaarden transformation). Returns the accelerated sum
/// and the magnitude of the last correction as an error proxy.
pub fn euler_sum(terms: &[f64]) -> (f64, f64) {
    if terms.is_empty() {
        return (0.0, 0.0);
    }
    let mut row: Vec<f64> = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for &t in terms {
        acc += t;
        row.push(acc);
    }
    let mut last = *row.last().unwrap();
    let mut prev = last;
    while row.len() > 1 {
        for i in 0..row.len() - 1 {
            row[i] = 0.5 * (row[i] + row[i + 1]);
        }
        row.pop();
        prev = last;
        last = *row.last().unwrap();
    }
    (last, libm::fabs(last - prev))
}

/// Polynomial (Neville) extrapolation of `(xs[i], ys[i])` to `x = 0`.
/// `xs` must be distinct and nonzero.
pub fn richardson_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut t: Vec<f64> = ys.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            t[i] = (xs[i] * t[i + 1] - xs[i + m] * t[i]) / (xs[i] - xs[i + m]);
        }
    }
    t[0]
}

/// `∫_lo^hi g(v) sin(omega·v + phase) dv` for smooth `g`, robust to large
/// `omega`. Splits at the sine's zeros so each panel holds half an
/// oscillation, then sums panels in order. For small `omega·(hi−lo)` plain
/// adaptive quadrature is used instead.
pub fn fourier_sine<F: FnMut(f64) -> f64>(
    g: &mut F,
    lo: f64,
    hi: f64,
    omega: f64,
    phase: f64,
    tol: f64,
) -> QuadResult {
    debug_assert!(omega >= 0.0);
    let mut f = |v: f64| g(v) * libm::sin(omega * v + phase);
    if omega * (hi - lo) < 30.0 {
        return adaptive(&mut f, lo, hi, tol);
    }
    let rule = GaussRule::legendre(9);
    // zeros of sin(omega v + phase) at v = (k*pi - phase)/omega
    let k0 = libm::ceil((omega * lo + phase) / core::f64::consts::PI);
    let mut value = 0.0;
    let mut edge = lo;
    let mut k = k0;
    loop {
        let z = (k * core::f64::consts::PI - phase) / omega;
        if z >= hi {
            break;
        }
        if z > edge {
            value += rule.integrate(&mut f, edge, z);
            edge = z;
        }
        k += 1.0;
    }
    value += rule.integrate(&mut f, edge, hi);
    // 9-point Gauss on a half oscillation is accurate to ~1e-14 relative;
    // the dominant residual error is roundoff accumulation over the panels.
    let panels = (omega * (hi - lo) / core::f64::consts::PI).max(1.0);
    QuadResult {
        value,
        error_estimate: 1e-15 * panels.sqrt() * (1.0 + libm::fabs(value)),
        converged: true,
    }
}
