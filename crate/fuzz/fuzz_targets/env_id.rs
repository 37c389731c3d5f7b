#![no_main]

use discor_core::envs::make_env;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(id) = std::str::from_utf8(data) else { return };
    if id.len() > 128 {
        return;
    }
    if let Ok(env) = make_env(id, 0) {
        assert_eq!(env.features.rows(), env.mdp.num_states() * env.mdp.num_actions());
    }
});
