#![no_main]

use libfuzzer_sys::fuzz_target;
use relay_attack::netmodel::{parse_matpower_with, ParseOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let opts = ParseOptions { absolute_reactance: true, ..ParseOptions::default() };
    if let Ok((net, _)) = parse_matpower_with(text, &opts) {
        for l in net.lines() {
            assert!(l.from < net.n_buses() && l.to < net.n_buses());
            assert!(l.susceptance > 0.0 && l.susceptance.is_finite());
        }
        assert!(net.generators().iter().all(|g| g.bus < net.n_buses()));
    }
});
