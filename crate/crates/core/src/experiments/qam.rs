//! Gray-coded square QAM.

use crate::{Error, Result, C64};

pub const SUPPORTED_ORDERS: [u32; 4] = [4, 16, 64, 256];

fn bits_per_axis(order: u32) -> Result<usize> {
    if !SUPPORTED_ORDERS.contains(&order) {
        return Err(Error::Unsupported(format!(
            "QAM order {order} (supported: 4, 16, 64, 256)"
        )));
    }
    Ok(order.trailing_zeros() as usize / 2)
}

/// Amplitude index whose Gray code is `code`.
fn gray_to_index(mut code: u32) -> u32 {
    let mut index = code;
    while code > 0 {
        code >>= 1;
        index ^= code;
    }
    index
}

/// Maps groups of `log2(order)` bits (most significant first; the first half of each group
/// selects the in-phase level, the second half the quadrature level) to unit-energy symbols.
pub fn qam_map(bits: &[bool], order: u32) -> Result<Vec<C64>> {
    let k = bits_per_axis(order)?;
    let group = 2 * k;
    if bits.len() % group != 0 {
        return Err(Error::InvalidParameter(format!(
            "{} bits is not a multiple of {group}",
            bits.len()
        )));
    }
    let side = 1u32 << k;
    // mean of |a + ib|² over the square grid {±1, ±3, …}² is 2(order − 1)/3
    let scale = (1.5 / (order - 1) as f64).sqrt();
    let level = |axis: &[bool]| -> f64 {
        let code = axis.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
        (2 * gray_to_index(code)) as f64 - (side - 1) as f64
    };
    Ok(bits
        .chunks_exact(group)
        .map(|g| C64::new(level(&g[..k]), level(&g[k..])) * scale)
        .collect())
}

/// Every symbol of the constellation, in bit-pattern order.
pub fn qam_alphabet(order: u32) -> Result<Vec<C64>> {
    let group = 2 * bits_per_axis(order)?;
    let bits: Vec<bool> = (0..order)
        .flat_map(|s| (0..group).rev().map(move |b| (s >> b) & 1 == 1))
        .collect();
    qam_map(&bits, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_points() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pts = qam_alphabet(4).unwrap();
        for p in &pts {
            assert!((p.re.abs() - s).abs() < 1e-15 && (p.im.abs() - s).abs() < 1e-15);
        }
        let mut distinct = pts.iter().map(|p| (p.re > 0.0, p.im > 0.0)).collect::<Vec<_>>();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn unit_average_energy() {
        for order in SUPPORTED_ORDERS {
            let pts = qam_alphabet(order).unwrap();
            let e = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
            assert!((e - 1.0).abs() < 1e-12, "order {order}: {e}");
        }
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        let pts = qam_alphabet(16).unwrap();
        let step = 2.0 * (1.5f64 / 15.0).sqrt();
        for a in 0..16usize {
            for b in 0..16usize {
                let d = pts[a] - pts[b];
                let horizontal = (d.re.abs() - step).abs() < 1e-9 && d.im.abs() < 1e-9;
                let vertical = (d.im.abs() - step).abs() < 1e-9 && d.re.abs() < 1e-9;
                if horizontal || vertical {
                    assert_eq!((a ^ b).count_ones(), 1, "{a:04b} vs {b:04b}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(qam_map(&[true; 6], 8), Err(Error::Unsupported(_))));
        assert!(qam_map(&[true; 6], 16).is_err());
        assert!(qam_map(&[], 16).unwrap().is_empty());
    }
}
