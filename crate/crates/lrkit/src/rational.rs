//! Exact rational arithmetic helpers.
//!
//! Knot values are `f64` data. Every finite `f64` is an exact dyadic
//! rational, so converting knots (and scaling factors) into `BigRational`
//! lets rank, nestedness and partition-of-unity checks run without any
//! floating tolerance.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

/// Exact conversion of a finite `f64` into a rational.
pub fn rat(x: f64) -> Rat {
    BigRational::from_float(x).expect("finite value required for exact conversion")
}

pub fn rat_usize(n: usize) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn binomial(n: usize, k: usize) -> Rat {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k.min(n - k) {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    BigRational::new(num, den)
}

/// Dense square-matrix inverse by Gauss-Jordan elimination.
/// Returns `None` for singular input.
pub fn invert(mat: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = mat.len();
    let mut a: Vec<Vec<Rat>> = mat.to_vec();
    let mut inv: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Rat::one() } else { Rat::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = a[col][col].clone();
        for j in 0..n {
            a[col][j] /= &scale;
            inv[col][j] /= &scale;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    let av = &a[col][j] * &f;
                    a[r][j] -= av;
                    let iv = &inv[col][j] * &f;
                    inv[r][j] -= iv;
                }
            }
        }
    }
    Some(inv)
}

/// Maximum absolute value of a rational vector, as `f64`.
pub fn max_abs_f64(v: &[Rat]) -> f64 {
    v.iter()
        .map(|r| to_f64(&r.abs()))
        .fold(0.0f64, |acc, x| acc.max(x))
}
