//! The table CSV importer must reject arbitrary bytes with an error, never
//! a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = emphlab::DeemphasisTable::from_csv(0.7, data);
});
