#![no_main]

use libfuzzer_sys::fuzz_target;
use microcavity::instrument::SweepTrace;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = SweepTrace::read_csv(data) {
        assert_eq!(trace.u.len(), trace.s.len());
        let mut out = Vec::new();
        trace.write_csv(&mut out).expect("trace writes");
        assert_eq!(SweepTrace::read_csv(out.as_slice()).expect("written trace reparses"), trace);
    }
});
