use demrep::experiments::{ccdf, qam_map};
use demrep::frames::build_subsampled_dft;
use demrep::io::{apply_override, decode_complex_le, encode_complex_le, parse_override};
use demrep::prox::{project_l1_ball, prox_inf, prox_inf_tilde};
use demrep::vecops::{inner, norm1, norm_inf, norm_inf_tilde};
use demrep::C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cvec(max_len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..=max_len)
        .prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
}

/// Soft-threshold level for projecting real magnitudes onto the unit ℓ1 ball, by bisection.
fn l1_level(mags: &[f64]) -> f64 {
    let mass = |t: f64| mags.iter().map(|m| (m - t).max(0.0)).sum::<f64>();
    if mass(0.0) <= 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, mags.iter().copied().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prox_is_moreau_complement(z in cvec(40), tau in 0.01..50.0f64) {
        let u = prox_inf(&z, tau).unwrap();
        let scaled: Vec<C64> = z.iter().map(|v| v / tau).collect();
        let p = project_l1_ball(&scaled, 1.0).unwrap();
        for ((a, zi), pi) in u.u.iter().zip(&z).zip(&p) {
            prop_assert!((a - (zi - pi * tau)).norm() <= 1e-9 * (1.0 + zi.norm()));
        }
        // clamping never increases a modulus and caps at α
        prop_assert!(norm_inf(&u.u) <= u.alpha + 1e-9 * (1.0 + u.alpha) || u.alpha == 0.0);
        for (a, zi) in u.u.iter().zip(&z) {
            prop_assert!(a.norm() <= zi.norm() * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn tilde_prox_acts_on_real_parts(z in cvec(30), tau in 0.01..50.0f64) {
        let u = prox_inf_tilde(&z, tau).unwrap().u;
        let parts: Vec<f64> = z.iter().flat_map(|v| [v.re / tau, v.im / tau]).collect();
        let t = l1_level(&parts.iter().map(|p| p.abs()).collect::<Vec<_>>());
        for (a, zi) in u.iter().zip(&z) {
            let shrink = |x: f64| x - tau * (x / tau).signum() * ((x / tau).abs() - t).max(0.0);
            prop_assert!((a.re - shrink(zi.re)).abs() <= 1e-8 * (1.0 + zi.norm()));
            prop_assert!((a.im - shrink(zi.im)).abs() <= 1e-8 * (1.0 + zi.norm()));
        }
    }

    #[test]
    fn l1_projection_lands_in_ball(z in cvec(40), r in 0.01..10.0f64) {
        let p = project_l1_ball(&z, r).unwrap();
        prop_assert!(norm1(&p) <= r * (1.0 + 1e-12));
        if norm1(&z) <= r {
            prop_assert_eq!(p, z);
        }
    }

    #[test]
    fn norm_chain(z in cvec(64)) {
        let (a, t) = (norm_inf(&z), norm_inf_tilde(&z));
        prop_assert!(a / 2f64.sqrt() <= t * (1.0 + 1e-15));
        prop_assert!(t <= a * (1.0 + 1e-15));
    }

    #[test]
    fn binary_roundtrip(z in cvec(50)) {
        prop_assert_eq!(decode_complex_le(&encode_complex_le(&z)).unwrap(), z);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let r = decode_complex_le(&bytes);
        if bytes.len() % 16 != 0 {
            prop_assert!(r.is_err());
        }
        if let Ok(v) = r {
            prop_assert!(v.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        }
    }

    #[test]
    fn override_sets_nested_value(keys in prop::collection::vec("[a-z]{1,6}", 1..4), n in any::<i32>()) {
        let spec = format!("{}={n}", keys.join("."));
        let (path, value) = parse_override(&spec).unwrap();
        let mut root = serde_json::json!({});
        apply_override(&mut root, &path, value).unwrap();
        let mut node = &root;
        for k in &keys {
            node = &node[k];
        }
        prop_assert_eq!(node.as_i64(), Some(n as i64));
    }

    #[test]
    fn ccdf_is_monotone(vals in prop::collection::vec(-20.0..20.0f64, 1..100), res in 0.05..1.0f64) {
        let t = ccdf(&vals, res).unwrap();
        prop_assert_eq!(t.probabilities[0], 1.0);
        prop_assert_eq!(*t.probabilities.last().unwrap(), 0.0);
        prop_assert!(t.probabilities.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(t.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn qam_symbols_are_alphabet_points(bits in prop::collection::vec(any::<bool>(), 0..64), which in 0usize..4) {
        let order = [4u32, 16, 64, 256][which];
        let k = order.trailing_zeros() as usize;
        let bits = &bits[..bits.len() / k * k];
        let syms = qam_map(bits, order).unwrap();
        prop_assert_eq!(syms.len(), bits.len() / k);
        let side = (order as f64).sqrt();
        let scale = (1.5 / (order as f64 - 1.0)).sqrt();
        for s in syms {
            // odd-integer grid after unscaling
            for c in [s.re / scale, s.im / scale] {
                prop_assert!(((c + 1.0) / 2.0 - ((c + 1.0) / 2.0).round()).abs() < 1e-9);
                prop_assert!(c.abs() <= side - 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn dft_adjoint_identity(seed in any::<u64>(), n in 2usize..64, frac in 0.1..1.0f64) {
        let m = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = build_subsampled_dft(n, m, &mut rng).unwrap();
        let x: Vec<C64> = (0..n).map(|k| C64::new((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        let y: Vec<C64> = (0..m).map(|k| C64::new((k as f64 * 1.3).cos(), -(k as f64).sin())).collect();
        let lhs = inner(&d.apply(&x).unwrap(), &y);
        let rhs = inner(&x, &d.adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }
}
