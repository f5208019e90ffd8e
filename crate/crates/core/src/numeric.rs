//! Small numerical helpers shared by the calibration and model code.

use libm::erfc;

// 8-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let lo = a + k as f64 * h;
        let mid = lo + h / 2.0;
        let half = h / 2.0;
        let s: f64 = GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        total += s * half;
    }
    total
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `Φ(hi) - Φ(lo)` without cancellation in either tail.
pub fn norm_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        // upper tail: Q(lo) - Q(hi)
        0.5 * (erfc(lo / std::f64::consts::SQRT_2) - erfc(hi / std::f64::consts::SQRT_2))
    } else if hi <= 0.0 {
        norm_cdf(hi) - norm_cdf(lo)
    } else {
        1.0 - norm_cdf(lo) - 0.5 * erfc(hi / std::f64::consts::SQRT_2)
    }
}

/// Linear-domain power ratio of a dB value.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_polynomial_exact() {
        // degree 15 is exact for 8 nodes
        let v = integrate(|x| x.powi(15) + 3.0 * x * x, 0.0, 2.0, 1);
        let want = 2f64.powi(16) / 16.0 + 8.0;
        assert!((v - want).abs() < 1e-9 * want);
    }

    #[test]
    fn norm_mass_tails() {
        let m = norm_mass(-1.0, 1.0);
        assert!((m - 0.682_689_492_137_085_9).abs() < 1e-12, "{m}");
        // far tail keeps relative precision
        let m = norm_mass(8.0, 9.0);
        let want = 6.220_960_574_271_784e-16 - 1.128_588_405_953_840_8e-19;
        assert!((m / want - 1.0).abs() < 1e-6, "{m}");
        assert_eq!(norm_mass(1.0, 1.0), 0.0);
    }

    #[test]
    fn db_roundtrip() {
        assert!((lin_to_db(db_to_lin(-3.3)) + 3.3).abs() < 1e-12);
    }
}
