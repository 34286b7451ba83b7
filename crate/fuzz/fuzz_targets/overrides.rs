#![no_main]

use demrep::io::{apply_override, parse_override};
use libfuzzer_sys::fuzz_target;
use serde_json::Value;

// Input: a JSON document on the first line, one `key=value` override per following line.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut lines = text.lines();
    let Some(Ok(mut root)) = lines.next().map(serde_json::from_str::<Value>) else { return };
    for spec in lines {
        if let Ok((path, value)) = parse_override(spec) {
            if apply_override(&mut root, &path, value.clone()).is_ok() {
                let mut node = &root;
                for key in &path {
                    node = &node[key];
                }
                assert_eq!(node, &value);
            }
        }
    }
});
