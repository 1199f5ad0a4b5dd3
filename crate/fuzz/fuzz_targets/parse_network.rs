#![no_main]

use libfuzzer_sys::fuzz_target;
use tauleap_core::model::parse_network;

// Accepted models must print back to text that parses to the same network.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(net) = parse_network(text) {
        let printed = net.to_dsl();
        let again = parse_network(&printed).expect("printed model parses");
        assert_eq!(net, again);
        assert_eq!(net.fingerprint(), again.fingerprint());
    }
});
