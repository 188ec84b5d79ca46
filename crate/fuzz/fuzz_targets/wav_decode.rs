//! The WAV decoder must reject arbitrary bytes with an error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = emphlab::decode_wav(data);
});
