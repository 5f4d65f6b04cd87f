#![no_main]

use libfuzzer_sys::fuzz_target;
use microcavity::metrology::SurfaceProfile;

fuzz_target!(|data: &[u8]| {
    if let Ok(profile) = SurfaceProfile::read_csv(data) {
        assert!(profile.positions().windows(2).all(|w| w[0] < w[1]));
        let mut out = Vec::new();
        profile.write_csv(&mut out).expect("profile writes");
        let again = SurfaceProfile::read_csv(out.as_slice()).expect("written profile reparses");
        assert_eq!(again.len(), profile.len());
    }
});
