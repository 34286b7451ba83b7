#![no_main]

use demrep::io::{frame_from_descriptor, parse_frame_descriptor};
use libfuzzer_sys::fuzz_target;

/// Keeps generated frames small enough for the fuzzer's time budget.
const MAX_ENTRIES: usize = 1 << 14;

// Input: descriptor JSON, optionally followed by a NUL byte and the sidecar bytes.
fuzz_target!(|data: &[u8]| {
    let (text, sidecar) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], Some(&data[i + 1..])),
        None => (data, None),
    };
    let Ok(text) = std::str::from_utf8(text) else { return };
    let Ok(desc) = parse_frame_descriptor(text) else { return };
    if desc.n.saturating_mul(desc.m) > MAX_ENTRIES || desc.equiangular_iters.unwrap_or(0) > 20 {
        return;
    }
    if let Ok(frame) = frame_from_descriptor(&desc, sidecar) {
        assert_eq!((frame.rows(), frame.cols()), (desc.m, desc.n));
    }
});
