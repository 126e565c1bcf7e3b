#![no_main]

use libfuzzer_sys::fuzz_target;
use rsopt::bench::{parse_curves_csv, write_curves_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(curves) = parse_curves_csv(data) {
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &curves).unwrap();
    }
});
