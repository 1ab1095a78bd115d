//! Monte Carlo batteries for the Gaussian comparison toolkit: coupling
//! identities, bound batteries, metric properties, and empirical-distance
//! consistency.

use hdns_core::gaussian::{
    coupled_gaussian_pair, coupling_bound, empirical_kolmogorov, empirical_w2_1d, gaussian_w2,
    spd_sqrt, vha_check, SpdMatrix,
};
use hdns_core::rng::{derive_seed, Purpose, Stream};

/// Random SPD matrix A·Aᵀ + 0.5·I with Gaussian A entries.
fn random_spd(d: usize, seed: u64) -> SpdMatrix {
    let mut stream = Stream::new(seed, Purpose::AuxNoise, 0, 0);
    let a: Vec<f64> = (0..d * d).map(|_| stream.next_gaussian()).collect();
    let mut s = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += a[i * d + k] * a[j * d + k];
            }
            s[i * d + j] = acc;
        }
    }
    for i in 0..d {
        s[i * d + i] += 0.5;
    }
    SpdMatrix::new(s, d).unwrap()
}

fn frobenius_diff_sq(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    a.entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// E|x−y|² over 10^5 shared-noise draws equals tr((S1^{1/2} − S2^{1/2})²)
/// within 5%, and respects the λ_*^{-1}|S1−S2|_F² bound.
#[test]
fn coupling_identity_and_bound() {
    let d = 5;
    let s1 = random_spd(d, 101);
    let s2 = random_spd(d, 202);
    let r1 = spd_sqrt(&s1).unwrap();
    let r2 = spd_sqrt(&s2).unwrap();
    let exact = frobenius_diff_sq(&r1, &r2);

    let n_draws = 100_000;
    let mut mean_sq = 0.0;
    for draw in 0..n_draws {
        let seed = derive_seed(999, Purpose::CouplingNoise, draw);
        let pair = coupled_gaussian_pair(&s1, &s2, seed).unwrap();
        let dist_sq: f64 = pair
            .x
            .iter()
            .zip(&pair.y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        mean_sq += dist_sq;
    }
    mean_sq /= n_draws as f64;
    assert!(
        (mean_sq - exact).abs() <= 0.05 * exact,
        "empirical {mean_sq} vs exact {exact}"
    );

    let lambda = s1.min_eigenvalue().min(s2.min_eigenvalue());
    let bound = coupling_bound(&s1, &s2, lambda).unwrap();
    assert!(
        mean_sq <= bound,
        "coupling bound violated: {mean_sq} > {bound}"
    );
}

/// 20 random 5×5 pairs: the Monte Carlo mean square distortion never exceeds
/// the coupling bound (using the correct λ_* for each pair). The exact
/// distortion tr((R1−R2)²) is used in place of sampling noise — the previous
/// test establishes they agree.
#[test]
fn coupling_bound_battery() {
    for pair_idx in 0..20u64 {
        let d = 5;
        let s1 = random_spd(d, 1000 + pair_idx);
        let s2 = random_spd(d, 2000 + pair_idx);
        let r1 = spd_sqrt(&s1).unwrap();
        let r2 = spd_sqrt(&s2).unwrap();
        let exact = frobenius_diff_sq(&r1, &r2);
        let lambda = s1.min_eigenvalue().min(s2.min_eigenvalue());
        let bound = coupling_bound(&s1, &s2, lambda).unwrap();
        assert!(exact <= bound, "pair {pair_idx}: {exact} > {bound}");
    }
}

/// W2 is symmetric within 1e−8 and satisfies the triangle inequality within
/// 1e−6 on random SPD triples.
#[test]
fn w2_is_a_metric_numerically() {
    for t in 0..100u64 {
        let d = 3;
        let s1 = random_spd(d, 3000 + t);
        let s2 = random_spd(d, 4000 + t);
        let s3 = random_spd(d, 5000 + t);
        let w12 = gaussian_w2(&s1, &s2).unwrap();
        let w21 = gaussian_w2(&s2, &s1).unwrap();
        assert!((w12 - w21).abs() <= 1e-8, "asymmetry {w12} vs {w21}");
        let w13 = gaussian_w2(&s1, &s3).unwrap();
        let w23 = gaussian_w2(&s2, &s3).unwrap();
        assert!(w13 <= w12 + w23 + 1e-6, "triangle: {w13} > {w12} + {w23}");
    }
}

/// Square-root perturbation inequality on 100 random pairs with λ_* set to
/// the true smaller minimum eigenvalue.
#[test]
fn vha_battery() {
    for t in 0..100u64 {
        let d = 4;
        let s1 = random_spd(d, 6000 + t);
        let s2 = random_spd(d, 7000 + t);
        let lambda = s1.min_eigenvalue().min(s2.min_eigenvalue());
        let (lhs, rhs) = vha_check(&s1, &s2, lambda).unwrap();
        assert!(lhs <= rhs + 1e-10, "pair {t}: {lhs} > {rhs}");
    }
}

/// Tail comparison at the level of the constructed coupling:
/// Pr(|x−y| > ε) ≤ 10·d^{5/2}·ε^{-2}·|S1−S2|_max on an ε grid, d ≤ 5.
#[test]
fn coupling_tail_bound_battery() {
    for &d in &[2usize, 3, 5] {
        for pair_idx in 0..5u64 {
            let s1 = random_spd(d, 8000 + 10 * d as u64 + pair_idx);
            let s2 = random_spd(d, 9000 + 10 * d as u64 + pair_idx);
            let max_gap = s1
                .entries()
                .iter()
                .zip(s2.entries())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let n_draws = 10_000;
            let mut dists = Vec::with_capacity(n_draws as usize);
            for draw in 0..n_draws {
                let seed = derive_seed(4242 + pair_idx, Purpose::CouplingNoise, draw);
                let pair = coupled_gaussian_pair(&s1, &s2, seed).unwrap();
                let dist: f64 = pair
                    .x
                    .iter()
                    .zip(&pair.y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dists.push(dist);
            }
            let c = 10.0 * (d as f64).powf(2.5) * max_gap;
            for eps in [0.5, 1.0, 2.0, 4.0] {
                let tail = dists.iter().filter(|&&v| v > eps).count() as f64 / n_draws as f64;
                let bound = c / (eps * eps);
                assert!(
                    tail <= bound,
                    "d={d} pair={pair_idx} eps={eps}: tail {tail} > bound {bound}"
                );
            }
        }
    }
}

/// Empirical 1-d W2 between N(0,1) and N(0,4) samples approaches the
/// closed-form distance 1 within 0.05 at m = 10^5.
#[test]
fn empirical_w2_matches_closed_form() {
    let m = 100_000;
    let mut sa = Stream::new(11, Purpose::AuxNoise, 1, 0);
    let mut sb = Stream::new(11, Purpose::AuxNoise, 2, 0);
    let a: Vec<f64> = (0..m).map(|_| sa.next_gaussian()).collect();
    let b: Vec<f64> = (0..m).map(|_| 2.0 * sb.next_gaussian()).collect();
    let w = empirical_w2_1d(&a, &b).unwrap();
    let s1 = SpdMatrix::diagonal(&[1.0]).unwrap();
    let s2 = SpdMatrix::diagonal(&[4.0]).unwrap();
    let closed = gaussian_w2(&s1, &s2).unwrap();
    assert!((closed - 1.0).abs() < 1e-12);
    assert!(
        (w - closed).abs() < 0.05,
        "empirical {w} vs closed form {closed}"
    );
}

/// Kolmogorov distance between two same-law samples of 2000 draws each stays
/// below 0.06.
#[test]
fn kolmogorov_same_law_is_small() {
    let m = 2000;
    let mut sa = Stream::new(21, Purpose::AuxNoise, 1, 0);
    let mut sb = Stream::new(21, Purpose::AuxNoise, 2, 0);
    let a: Vec<f64> = (0..m).map(|_| sa.next_gaussian()).collect();
    let b: Vec<f64> = (0..m).map(|_| sb.next_gaussian()).collect();
    let ks = empirical_kolmogorov(&a, &b).unwrap();
    assert!(ks < 0.06, "same-law KS = {ks}");
}
