#![no_main]

use libfuzzer_sys::fuzz_target;
use nfisac::channel::ChannelTensor;

fuzz_target!(|data: &[u8]| {
    let _ = ChannelTensor::read_csv(data);
});
