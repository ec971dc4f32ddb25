#![no_main]

use libfuzzer_sys::fuzz_target;
use relay_attack::interdiction::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        assert!(!cfg.instances.is_empty() && !cfg.budgets.is_empty());
        assert!(cfg.time_limit_s > 0.0 && cfg.jobs >= 1);
    }
});
