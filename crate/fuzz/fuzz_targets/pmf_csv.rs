#![no_main]

use libfuzzer_sys::fuzz_target;
use tauleap_core::io::{read_pmf_csv, write_pmf_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = read_pmf_csv(text) {
        let written = write_pmf_csv(&table.pmf, &table.species, &table.metadata);
        let again = read_pmf_csv(&written).expect("written pmf reads back");
        assert_eq!(table.species, again.species);
        assert_eq!(table.pmf, again.pmf);
    }
});
