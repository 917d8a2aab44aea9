#![no_main]

use libfuzzer_sys::fuzz_target;
use nfisac::channel::ChannelTensor;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = ChannelTensor::from_binary(data) {
        assert_eq!(t.to_binary(), data);
    }
});
