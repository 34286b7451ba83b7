#![no_main]

use demrep::io::SolveConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (json, rest) = text.split_once('\n').unwrap_or((text, ""));
    let overrides: Vec<String> = rest.lines().map(str::to_string).collect();
    if let Ok(cfg) = SolveConfig::from_json(json, &overrides) {
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SolveConfig::from_json(&echoed, &[]).unwrap(), cfg);
    }
});
