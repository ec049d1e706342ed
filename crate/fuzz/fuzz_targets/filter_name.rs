#![no_main]
use libfuzzer_sys::fuzz_target;

use spectral_fsd::FilterSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(name) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = name.parse::<FilterSpec>() {
        assert_eq!(spec.to_string().parse::<FilterSpec>().unwrap(), spec);
    }
});
