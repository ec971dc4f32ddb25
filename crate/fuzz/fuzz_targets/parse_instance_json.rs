#![no_main]

use libfuzzer_sys::fuzz_target;
use relay_attack::netmodel::{parse_instance_json, write_instance_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = parse_instance_json(text) {
        // anything accepted must survive a write/read cycle unchanged
        let again = parse_instance_json(&write_instance_json(&inst)).expect("round trip");
        assert_eq!(again.network, inst.network);
        assert_eq!(again.relays, inst.relays);
    }
});
