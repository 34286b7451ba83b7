#![no_main]

use demrep::experiments::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

// Input: config JSON, then `key=value` overrides on the following lines.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (json, rest) = text.split_once('\n').unwrap_or((text, ""));
    let overrides: Vec<String> = rest.lines().map(str::to_string).collect();
    if let Ok(cfg) = ExperimentConfig::from_json(json, &overrides) {
        // an accepted config echoes back to an equal one
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&echoed, &[]).unwrap(), cfg);
    }
});
