//! Quadrature rules and Chebyshev–Lobatto machinery on an interval `[0, l]`.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[0, l]`, `m` points.
///
/// Newton iteration on the three-term Legendre recurrence; accurate to
/// roundoff for the sizes used here (a few thousand points at most).
pub fn gauss_legendre(m: usize, l: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut t = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(m, t);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        // t runs from +1 downwards; store increasing x
        nodes[i] = 0.5 * l * (1.0 - t);
        nodes[m - 1 - i] = 0.5 * l * (1.0 + t);
        weights[i] = 0.5 * l * w;
        weights[m - 1 - i] = 0.5 * l * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if m == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = m as f64 * (t * p - pm1) / (t * t - 1.0);
    (p, d)
}

/// Chebyshev–Lobatto nodes `x_j = l (1 - cos(j pi / N)) / 2`, increasing.
pub fn chebyshev_lobatto(n: usize, l: f64) -> Vec<f64> {
    let big_n = (n - 1) as f64;
    (0..n)
        .map(|j| {
            if j == 0 {
                0.0
            } else if j == n - 1 {
                l
            } else {
                // sin form keeps the small nodes accurate
                let s = (0.5 * PI * j as f64 / big_n).sin();
                l * s * s
            }
        })
        .collect()
}

/// Clenshaw–Curtis weights for the Lobatto nodes above.
pub fn clenshaw_curtis(n: usize, l: f64) -> Vec<f64> {
    let big_n = n - 1;
    let mut w = vec![0.0; n];
    if big_n == 0 {
        w[0] = l;
        return w;
    }
    let nf = big_n as f64;
    let theta = |j: usize| PI * j as f64 / nf;
    if big_n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[big_n] = w[0];
        for (j, wj) in w.iter_mut().enumerate().take(big_n).skip(1) {
            let mut v = 1.0;
            for k in 1..big_n / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta(j)).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (nf * theta(j)).cos() / (nf * nf - 1.0);
            *wj = 2.0 * v / nf;
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[big_n] = w[0];
        for (j, wj) in w.iter_mut().enumerate().take(big_n).skip(1) {
            let mut v = 1.0;
            for k in 1..=(big_n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta(j)).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            *wj = 2.0 * v / nf;
        }
    }
    // reference interval [-1, 1] has length 2
    w.iter().map(|v| v * 0.5 * l).collect()
}

/// Barycentric weights of the Chebyshev–Lobatto nodes (up to a common factor).
pub fn chebyshev_barycentric_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// First-derivative collocation matrix on the increasing Chebyshev–Lobatto
/// nodes of `[0, l]`.
pub fn chebyshev_diff_matrix(n: usize, l: f64) -> DMatrix<f64> {
    let big_n = n - 1;
    let mut d = DMatrix::zeros(n, n);
    if n == 1 {
        return d;
    }
    let nf = big_n as f64;
    let c = |j: usize| {
        let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        if j == 0 || j == big_n {
            2.0 * s
        } else {
            s
        }
    };
    // t_j = cos(j pi / N); t_i - t_j = -2 sin((i+j) pi / 2N) sin((i-j) pi / 2N)
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let diff =
                    -2.0 * (PI * (i + j) as f64 / (2.0 * nf)).sin() * (PI * (i as f64 - j as f64) / (2.0 * nf)).sin();
                d[(i, j)] = c(i) / c(j) / diff;
            }
        }
    }
    // negative-sum trick for the diagonal
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    // dt/dx = -2/l
    d * (-2.0 / l)
}

/// Interpolation matrix from values at `nodes` to values at `targets`,
/// using the barycentric formula with weights `bary`.
pub fn barycentric_matrix(nodes: &[f64], bary: &[f64], targets: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut m = DMatrix::zeros(targets.len(), n);
    for (r, &x) in targets.iter().enumerate() {
        if let Some(j) = nodes.iter().position(|&xj| xj == x) {
            m[(r, j)] = 1.0;
            continue;
        }
        let mut denom = 0.0;
        for j in 0..n {
            let t = bary[j] / (x - nodes[j]);
            m[(r, j)] = t;
            denom += t;
        }
        for j in 0..n {
            m[(r, j)] /= denom;
        }
    }
    m
}
