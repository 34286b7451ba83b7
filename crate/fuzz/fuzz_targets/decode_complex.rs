#![no_main]

use demrep::io::{decode_complex_le, encode_complex_le};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(values) = decode_complex_le(data) {
        assert_eq!(values.len() * 16, data.len());
        assert_eq!(encode_complex_le(&values), data);
    }
});
