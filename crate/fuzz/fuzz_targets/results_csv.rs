#![no_main]

use libfuzzer_sys::fuzz_target;
use relay_attack::interdiction::parse_results_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_results_csv(text) {
        for r in &rows {
            let _ = r.quality_pct(1.0);
            let _ = r.complete();
        }
    }
});
