#![no_main]

use libfuzzer_sys::fuzz_target;
use microcavity::config::ToolConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ToolConfig::parse(text) {
        let written = config.to_config_string();
        let again = ToolConfig::parse(&written).expect("serialized configuration reparses");
        assert_eq!(config, again);
    }
});
