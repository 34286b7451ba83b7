//! Small dense helpers on complex slices.

use crate::C64;

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm2_sqr(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `|v|` as `√(re² + im²)`; much cheaper than `hypot`, and the inputs here never come close
/// to overflowing the squares.
#[inline]
pub fn modulus(v: C64) -> f64 {
    v.norm_sqr().sqrt()
}

pub fn norm1(x: &[C64]) -> f64 {
    x.iter().map(|&v| modulus(v)).sum()
}

pub fn norm_inf(x: &[C64]) -> f64 {
    x.iter().map(|&v| modulus(v)).fold(0.0, f64::max)
}

/// `max(‖Re x‖∞, ‖Im x‖∞)`.
pub fn norm_inf_tilde(x: &[C64]) -> f64 {
    x.iter()
        .map(|v| v.re.abs().max(v.im.abs()))
        .fold(0.0, f64::max)
}

/// Dual of [`norm_inf_tilde`]: `‖Re x‖₁ + ‖Im x‖₁`.
pub fn norm1_tilde(x: &[C64]) -> f64 {
    x.iter().map(|v| v.re.abs() + v.im.abs()).sum()
}

/// `⟨a, b⟩ = bᴴ a`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[C64], s: f64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist2(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn all_finite(x: &[C64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Phase of a complex scalar, with `sign(0) = 0`.
pub fn sign(z: C64) -> C64 {
    let r = modulus(z);
    if r == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        z / r
    }
}
