//! Filters and interpolators shared by the transmitter, channel and receiver.

pub mod fracdelay;
pub mod lagrange;
pub mod loopfilter;
pub mod rrc;
