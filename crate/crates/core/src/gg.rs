//! Godsil–Gutman determinant estimators of the permanent.
//!
//! Each entry becomes `√a_ij · x_ij` with `x_ij` an independent random unit:
//! a sign (real), a 4th root of unity (complex), or one of the eight units
//! `±1, ±i, ±j, ±k` (quaternion). The squared determinant modulus, or for
//! quaternions the determinant of the `2n × 2n` complex embedding, has
//! expectation `per A`.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sampler::trial_rng;

/// Default cap on the total number of determinant evaluations.
pub const DEFAULT_SAMPLE_CAP: u64 = 10_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GGVariant {
    Real,
    Complex,
    Quaternion,
}

impl GGVariant {
    pub const ALL: [GGVariant; 3] = [GGVariant::Real, GGVariant::Complex, GGVariant::Quaternion];

    /// `c` in the critical-ratio bound `c^{n/2}`.
    pub fn critical_ratio_base(&self) -> f64 {
        match self {
            GGVariant::Real => 3.0,
            GGVariant::Complex => 2.0,
            GGVariant::Quaternion => 1.5,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Some(GGVariant::Real),
            "complex" => Some(GGVariant::Complex),
            "quaternion" => Some(GGVariant::Quaternion),
            _ => None,
        }
    }
}

/// Determinant by Gaussian elimination with partial pivoting; `a` is
/// row-major `n x n` and is overwritten.
pub fn det_real(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x * n + k].abs().total_cmp(&a[y * n + k].abs()))
            .unwrap();
        let pivot = a[p * n + k];
        if pivot == 0.0 {
            return 0.0;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            det = -det;
        }
        det *= pivot;
        for r in k + 1..n {
            let f = a[r * n + k] / pivot;
            if f != 0.0 {
                for c in k + 1..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
            }
        }
    }
    det
}

/// Complex counterpart of [`det_real`], pivoting on the modulus.
pub fn det_complex(a: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x * n + k].norm_sqr().total_cmp(&a[y * n + k].norm_sqr()))
            .unwrap();
        let pivot = a[p * n + k];
        if pivot.norm_sqr() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            det = -det;
        }
        det *= pivot;
        for r in k + 1..n {
            let f = a[r * n + k] / pivot;
            for c in k + 1..n {
                let v = a[k * n + c];
                a[r * n + c] -= f * v;
            }
        }
    }
    det
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One unbiased estimate of `per m`.
pub fn gg_single_estimate<R: Rng + ?Sized>(m: &Matrix, variant: GGVariant, rng: &mut R) -> Result<f64> {
    let n = m.order()?;
    let roots: Vec<f64> = m.data().iter().map(|v| v.sqrt()).collect();
    Ok(match variant {
        GGVariant::Real => {
            let mut a: Vec<f64> = roots
                .iter()
                .map(|&r| if rng.random_bool(0.5) { r } else { -r })
                .collect();
            let d = det_real(&mut a, n);
            d * d
        }
        GGVariant::Complex => {
            let mut a: Vec<Complex64> = roots
                .iter()
                .map(|&r| r * I.powu(rng.random_range(0..4u32)))
                .collect();
            det_complex(&mut a, n).norm_sqr()
        }
        GGVariant::Quaternion => {
            // q = α + β j  ↦  [[α, β], [−β̄, ᾱ]]
            let w = 2 * n;
            let mut a = vec![ZERO; w * w];
            for i in 0..n {
                for j in 0..n {
                    let r = roots[i * n + j];
                    let sign = if rng.random_bool(0.5) { r } else { -r };
                    let (alpha, beta) = match rng.random_range(0..4u32) {
                        0 => (ONE, ZERO),
                        1 => (I, ZERO),
                        2 => (ZERO, ONE),
                        _ => (ZERO, I),
                    };
                    let (alpha, beta) = (alpha * sign, beta * sign);
                    a[i * w + j] = alpha;
                    a[i * w + n + j] = beta;
                    a[(n + i) * w + j] = -beta.conj();
                    a[(n + i) * w + n + j] = alpha.conj();
                }
            }
            det_complex(&mut a, w).re.max(0.0)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GGReport {
    pub estimate: f64,
    pub variant: GGVariant,
    pub epsilon: f64,
    pub delta: f64,
    pub batches: u64,
    pub batch_size: u64,
    pub samples: u64,
    pub wall_time_s: f64,
}

/// Batch count and batch size of the median-of-means wrapper.
///
/// With `ε' = ε/(1+ε)` and batches of `⌈4 c^{n/2} / ε'²⌉` samples,
/// Chebyshev puts each batch mean outside `(1 ± ε')·per` with probability at
/// most 1/4. The median of `⌈8 ln(2/δ)⌉` such means is then off with
/// probability at most `exp(−m/8) ≤ δ/2` by Hoeffding, and
/// `(1 ± ε')·per` lies inside `[per/(1+ε), (1+ε)·per]`.
pub fn median_of_means_plan(n: usize, variant: GGVariant, eps: f64, delta: f64) -> (u64, u64) {
    let batches = (8.0 * (2.0 / delta).ln()).ceil().max(1.0) as u64;
    let e = eps / (1.0 + eps);
    let size = (4.0 * variant.critical_ratio_base().powf(n as f64 / 2.0) / (e * e)).ceil();
    (batches, size.min(u64::MAX as f64) as u64)
}

pub fn gg_estimate(
    m: &Matrix,
    variant: GGVariant,
    eps: f64,
    delta: f64,
    seed: u64,
    sample_cap: u64,
) -> Result<GGReport> {
    let started = Instant::now();
    let n = m.order()?;
    if eps.is_nan() || eps <= 0.0 || delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::Config(format!("bad accuracy target eps={eps} delta={delta}")));
    }
    let (batches, size) = median_of_means_plan(n, variant, eps, delta);
    let required = batches.saturating_mul(size);
    if required > sample_cap {
        return Err(Error::SampleBudget {
            required,
            cap: sample_cap,
        });
    }
    // batches in parallel, each summed in sample order for reproducibility
    let mut means = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = 0.0;
            for s in 0..size {
                let mut rng = trial_rng(seed, b * size + s);
                acc += gg_single_estimate(m, variant, &mut rng)?;
            }
            Ok(acc / size as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    means.sort_by(f64::total_cmp);
    let estimate = if means.len() % 2 == 1 {
        means[means.len() / 2]
    } else {
        0.5 * (means[means.len() / 2 - 1] + means[means.len() / 2])
    };
    Ok(GGReport {
        estimate,
        variant,
        epsilon: eps,
        delta,
        batches,
        batch_size: size,
        samples: required,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cofactor(a: &[f64], n: usize) -> f64 {
        if n == 1 {
            return a[0];
        }
        let mut total = 0.0;
        for c in 0..n {
            let minor: Vec<f64> = (1..n)
                .flat_map(|r| (0..n).filter(move |&k| k != c).map(move |k| (r, k)))
                .map(|(r, k)| a[r * n + k])
                .collect();
            let s = if c % 2 == 0 { 1.0 } else { -1.0 };
            total += s * a[c] * cofactor(&minor, n - 1);
        }
        total
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=5 {
            for _ in 0..20 {
                let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let want = cofactor(&a, n);
                let got = det_real(&mut a.clone(), n);
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "n={n}");
                let mut c: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                let gc = det_complex(&mut c, n);
                assert!((gc.re - want).abs() <= 1e-10 * want.abs().max(1.0));
                assert!(gc.im.abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn complex_determinant_of_rotation() {
        // det [[i, 0], [0, i]] = -1
        let mut a = vec![I, ZERO, ZERO, I];
        assert!((det_complex(&mut a, 2) + ONE).norm() < 1e-15);
    }

    #[test]
    fn identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in GGVariant::ALL {
            for _ in 0..50 {
                let x = gg_single_estimate(&Matrix::identity(5), v, &mut rng).unwrap();
                assert!((x - 1.0).abs() < 1e-12, "{v:?} {x}");
                assert_eq!(gg_single_estimate(&Matrix::zeros(3, 3), v, &mut rng).unwrap(), 0.0);
            }
        }
        for v in GGVariant::ALL {
            let r = gg_estimate(&Matrix::identity(4), v, 0.2, 0.1, 3, DEFAULT_SAMPLE_CAP).unwrap();
            assert!((r.estimate - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_constants() {
        let (m, s) = median_of_means_plan(4, GGVariant::Real, 0.2, 0.1);
        assert_eq!(m, 24);
        // 4 * 9 / (1/6)^2
        assert_eq!(s, 1296);
    }

    #[test]
    fn sample_cap_enforced() {
        let e = gg_estimate(&Matrix::filled(30, 1.0), GGVariant::Real, 0.1, 0.05, 0, 1_000_000).unwrap_err();
        assert!(matches!(e, Error::SampleBudget { .. }));
    }
}
