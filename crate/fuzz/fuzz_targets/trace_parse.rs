#![no_main]

use libfuzzer_sys::fuzz_target;
use placelab::sim::WorkloadTrace;

fuzz_target!(|data: &[u8]| {
    let Ok(trace) = WorkloadTrace::parse_bytes(data) else {
        return;
    };
    // anything accepted must survive a write/read cycle unchanged
    let text = trace.to_text().expect("parsed traces are two-dimensional");
    let again = WorkloadTrace::parse(&text).expect("emitted trace must parse");
    assert_eq!(again, trace);
});
