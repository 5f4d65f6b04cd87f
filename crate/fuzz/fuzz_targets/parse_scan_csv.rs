#![no_main]

use libfuzzer_sys::fuzz_target;
use microcavity::instrument::{measure_roc, RetroScan};
use microcavity::optics::BeamParams;

fuzz_target!(|data: &[u8]| {
    let beam = BeamParams::new(780e-9, 2e-6, 0.0).expect("valid beam");
    if let Ok(scan) = RetroScan::read_csv(data, beam) {
        // any outcome is fine as long as it does not panic
        let _ = measure_roc(&scan);
    }
});
