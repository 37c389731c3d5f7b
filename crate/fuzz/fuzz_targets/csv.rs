#![no_main]

use discor_lab::csv::MetricsCsv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(csv) = MetricsCsv::parse(text) {
        let again = MetricsCsv::parse(&csv.to_text()).expect("written CSV parses");
        assert_eq!(again.records.len(), csv.records.len());
        assert_eq!(again.meta, csv.meta);
    }
});
