//! Reference computations that avoid the library's equilibrium code paths.
#![allow(dead_code)]

use cournot_core::{Color, EconomyParams, FirmCoeffs, Strategy};

/// Expected profit written out from scratch; `β = ∞` charges nothing for a
/// carbon-free strategy and forbids any carbon.
pub fn profit(p: &EconomyParams, beta: f64, q_minus: f64, k_minus: f64, q: f64, k: f64) -> f64 {
    let carbon_cost = if k == 0.0 {
        0.0
    } else if beta.is_infinite() {
        f64::INFINITY
    } else {
        beta * (k + k_minus) * k
    };
    let r = if q > 0.0 { k / q } else { 0.0 };
    (p.demand_intercept - q - q_minus) * q - carbon_cost
        - (p.unit_cost + p.green_premium - p.green_premium * r) * q
}

/// Best profit over a `points × points` grid of `(r, q)` with
/// `q ∈ [0, A − Q₋]`, `r ∈ [0, 1]`.
pub fn grid_best_profit(
    p: &EconomyParams,
    beta: f64,
    q_minus: f64,
    k_minus: f64,
    points: usize,
) -> f64 {
    let q_max = (p.demand_intercept - q_minus).max(0.0);
    let mut best = f64::NEG_INFINITY;
    for iq in 0..points {
        let q = q_max * iq as f64 / (points - 1) as f64;
        for ir in 0..points {
            let r = ir as f64 / (points - 1) as f64;
            best = best.max(profit(p, beta, q_minus, k_minus, q, r * q));
        }
    }
    best
}

/// Best response by enumerating the KKT candidates of the concave program
/// `max profit` over `0 ≤ k ≤ q`: no production, `k = 0`, `k = q`, and the
/// interior point.
pub fn oracle_best_response(
    p: &EconomyParams,
    coeffs: FirmCoeffs,
    q_minus: f64,
    k_minus: f64,
) -> (f64, f64) {
    let z = p.demand_intercept - p.unit_cost - p.green_premium;
    let beta = coeffs.beta;
    let mut cands = vec![(0.0, 0.0), ((z - q_minus) / 2.0, 0.0)];
    if beta.is_finite() {
        let q = (p.demand_intercept - p.unit_cost - q_minus - beta * k_minus) / (2.0 * (1.0 + beta));
        cands.push((q, q));
        if beta > 0.0 {
            let a = p.green_premium / beta;
            cands.push(((z - q_minus) / 2.0, (a - k_minus) / 2.0));
        }
    }
    let mut best = (0.0, 0.0);
    let mut best_profit = 0.0;
    for (q, k) in cands {
        if !(q >= 0.0 && k >= 0.0 && k <= q) {
            continue;
        }
        let v = profit(p, beta, q_minus, k_minus, q, k);
        if v > best_profit {
            best_profit = v;
            best = (q, k);
        }
    }
    best
}

/// Totals `(Q, K)` implied by a coloring, from the 2×2 linear system of the
/// feedback rules, solved by Cramer's rule.
pub fn coloring_totals(p: &EconomyParams, coeffs: &[FirmCoeffs], colors: &[Color]) -> Option<(f64, f64)> {
    let z = p.demand_intercept - p.unit_cost - p.green_premium;
    let margin = p.demand_intercept - p.unit_cost;
    let (mut m, mut n_int, mut n1, mut b1, mut a_int) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (c, col) in coeffs.iter().zip(colors) {
        match col {
            Color::White => {}
            Color::Green => m += 1.0,
            Color::Orange => {
                m += 1.0;
                n_int += 1.0;
                a_int += c.a;
            }
            Color::Red => {
                n1 += 1.0;
                b1 += 1.0 / (1.0 + c.beta);
            }
        }
    }
    // Q = m(z − Q) + B₁(A − c − Q) − (n₁ − B₁)K
    // K = K_ex + A_int − n_int K + B₁(A − c − Q) − (n₁ − B₁)K
    let (a11, a12, r1) = (1.0 + m + b1, n1 - b1, m * z + b1 * margin);
    let (a21, a22, r2) = (b1, 1.0 + n_int + n1 - b1, p.exogenous_carbon + a_int + b1 * margin);
    let det = a11 * a22 - a12 * a21;
    let q = (r1 * a22 - a12 * r2) / det;
    let k = (a11 * r2 - r1 * a21) / det;
    (q.is_finite() && k.is_finite()).then_some((q, k))
}

/// Strategies of a coloring at totals `(Q, K)`.
pub fn coloring_strategies(
    p: &EconomyParams,
    coeffs: &[FirmCoeffs],
    colors: &[Color],
    quantity: f64,
    carbon: f64,
) -> Vec<(f64, f64)> {
    let z = p.demand_intercept - p.unit_cost - p.green_premium;
    let margin = p.demand_intercept - p.unit_cost;
    coeffs
        .iter()
        .zip(colors)
        .map(|(c, col)| match col {
            Color::White => (0.0, 0.0),
            Color::Green => (z - quantity, 0.0),
            Color::Orange => (z - quantity, c.a - carbon),
            Color::Red => {
                let b = 1.0 / (1.0 + c.beta);
                let q = b * (margin - quantity) - (1.0 - b) * carbon;
                (q, q)
            }
        })
        .collect()
}

/// Every profile obtained from one of the `4ⁿ` colorings that is a Nash
/// equilibrium according to [`oracle_best_response`].
pub fn brute_force_equilibria(p: &EconomyParams, coeffs: &[FirmCoeffs], tol: f64) -> Vec<Vec<(f64, f64)>> {
    let n = coeffs.len();
    let mut found = Vec::new();
    for code in 0..4usize.pow(n as u32) {
        let colors: Vec<Color> = (0..n).map(|i| Color::ALL[(code >> (2 * i)) & 3]).collect();
        let Some((quantity, carbon)) = coloring_totals(p, coeffs, &colors) else {
            continue;
        };
        let profile = coloring_strategies(p, coeffs, &colors, quantity, carbon);
        if profile.iter().any(|&(q, k)| !(q >= -tol && k >= -tol && k <= q + tol)) {
            continue;
        }
        let q_sum: f64 = profile.iter().map(|s| s.0).sum();
        let k_sum: f64 = p.exogenous_carbon + profile.iter().map(|s| s.1).sum::<f64>();
        let is_nash = profile.iter().enumerate().all(|(i, &(q, k))| {
            let (bq, bk) = oracle_best_response(p, coeffs[i], q_sum - q, k_sum - k);
            (bq - q).abs() <= tol && (bk - k).abs() <= tol
        });
        if is_nash {
            found.push(profile);
        }
    }
    found
}

pub fn profile_gap(a: &[(f64, f64)], b: &[Strategy]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, s)| (x.0 - s.q).abs().max((x.1 - s.k).abs()))
        .fold(0.0, f64::max)
}

/// Number of green firms when nobody is red:
/// `max{i : a_i < K_ex + Σ_{j>i} (a_j − a_i)}` over ascending `a`.
pub fn green_count(sorted_a: &[f64], exogenous: f64) -> usize {
    (1..=sorted_a.len())
        .filter(|&i| {
            let ai = sorted_a[i - 1];
            ai < exogenous + sorted_a[i..].iter().map(|aj| aj - ai).sum::<f64>()
        })
        .max()
        .unwrap_or(0)
}

/// White/red closed form over capacities `ξ` sorted ascending: the number
/// of white firms, `Q`, and each firm's quantity.
pub fn white_red_closed_form(sorted_xi: &[f64]) -> (usize, f64, Vec<f64>) {
    let n = sorted_xi.len();
    let n0 = (1..=n)
        .filter(|&i| {
            let xi = sorted_xi[i - 1];
            xi < sorted_xi[i..].iter().map(|xj| xj - xi).sum::<f64>()
        })
        .max()
        .unwrap_or(0);
    let n1 = (n - n0) as f64;
    let reds = &sorted_xi[n0..];
    let total: f64 = reds.iter().sum();
    let quantity = total / (n1 + 1.0);
    let q = sorted_xi
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            if i < n0 {
                0.0
            } else {
                n1 / (n1 + 1.0) * xi - (total - xi) / (n1 + 1.0)
            }
        })
        .collect();
    (n0, quantity, q)
}
