#![no_main]

use libfuzzer_sys::fuzz_target;
use rsopt::bench::parse_trajectory_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_trajectory_csv(data);
});
