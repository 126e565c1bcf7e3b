#![no_main]

use libfuzzer_sys::fuzz_target;
use rsopt::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json_str(s) {
            // A config that validates must yield its derived objects.
            cfg.problem().unwrap();
            if cfg.method.is_some() {
                cfg.method_config().unwrap();
            }
            if cfg.bench.is_some() {
                cfg.experiment().unwrap();
            }
        }
    }
});
