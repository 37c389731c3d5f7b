#![no_main]

use discor_lab::config::{ExperimentConfig, RawConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(raw) = RawConfig::parse(text) else { return };
    if let Ok(cfg) = ExperimentConfig::from_raw(&raw) {
        let canonical = cfg.run_config_text(&cfg.env, cfg.scheme, cfg.seed);
        let back = ExperimentConfig::from_raw(&RawConfig::parse(&canonical).expect("canonical text parses"))
            .expect("canonical text validates");
        assert_eq!(back.run_config_text(&cfg.env, cfg.scheme, cfg.seed), canonical);
    }
});
