#![no_main]
use libfuzzer_sys::fuzz_target;

use spectral_fsd::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Accepted configs must survive a serialize/parse round trip unchanged.
    if let Ok(config) = parse_config_str(text) {
        let again = serde_json::to_string(&config).unwrap();
        assert_eq!(parse_config_str(&again).unwrap(), config);
    }
});
