#![no_main]

use discor_core::mdp::text::{parse_mdp, write_mdp};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mdp) = parse_mdp(text) {
        let again = parse_mdp(&write_mdp(&mdp)).expect("written MDP parses");
        assert_eq!(again, mdp);
    }
});
