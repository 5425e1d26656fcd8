//! Physicists' Hermite polynomials.
//!
//! `H_0 = 1`, `H_1 = 2x`, `H_{p+1} = 2x H_p - 2p H_{p-1}`, with the
//! oscillator normalization `H*_p = H_p / √(2^p p! √π)`, so that
//! `∫ H*_p H*_q e^{-x²} dx = δ_pq`.

use std::f64::consts::PI;

/// `H_p(x)` by upward recurrence.
pub fn hermite(p: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..p {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `1 / √(2^p p! √π)`.
pub fn normalization(p: usize) -> f64 {
    // c_0 = π^{-1/4}, c_k = c_{k-1} / √(2k)
    (1..=p).fold(PI.powf(-0.25), |c, k| c / (2.0 * k as f64).sqrt())
}

/// `H*_p(x)`.
pub fn hermite_normalized(p: usize, x: f64) -> f64 {
    hermite(p, x) * normalization(p)
}

/// `H*_p(x)` together with its first and second derivatives.
///
/// Uses `H_p' = 2p H_{p-1}` and `H_p'' = 4p(p-1) H_{p-2}`, all three from a
/// single recurrence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteJet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

pub fn hermite_normalized_jet(p: usize, x: f64) -> HermiteJet {
    // h[k] holds H_{p-k} for k = 0, 1, 2 once the sweep reaches p
    let mut h = [0.0f64; 3];
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..=p {
        h[2] = h[1];
        h[1] = h[0];
        h[0] = cur;
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    let c = normalization(p);
    let pf = p as f64;
    HermiteJet {
        value: c * h[0],
        first: if p >= 1 { c * 2.0 * pf * h[1] } else { 0.0 },
        second: if p >= 2 {
            c * 4.0 * pf * (pf - 1.0) * h[2]
        } else {
            0.0
        },
    }
}
