#![no_main]

use libfuzzer_sys::fuzz_target;
use placelab::policy::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(ckpt) = Checkpoint::from_bytes(data) else {
        return;
    };
    // the encoding is canonical: accepted input re-encodes to itself
    assert_eq!(ckpt.to_bytes(), data);
    assert!(ckpt.params.is_finite());
});
