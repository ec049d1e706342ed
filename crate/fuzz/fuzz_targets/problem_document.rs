#![no_main]
use libfuzzer_sys::fuzz_target;

use spectral_fsd::RegressionProblem;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(problem) = RegressionProblem::from_json(text) {
        let again = RegressionProblem::from_json(&problem.to_json()).unwrap();
        assert_eq!(again.to_json(), problem.to_json());
    }
});
