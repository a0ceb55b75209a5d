use crate::error::{Error, Result};

/// Remaining lifetime of a service in the next slot.
///
/// A service that stays placed counts down by one per slot. When its lifetime
/// reaches 0 it is refreshed in that slot, which restores the full interval, so
/// the following slot sees `lf - 1`. Anything else (freshly placed, not placed)
/// yields `lf`. A continuously placed service is therefore refreshed exactly
/// every `lf` slots.
pub fn advance_lifetime(l_prev: u32, placed_prev: bool, placed_now: bool, lf: u32) -> Result<u32> {
    if lf == 0 {
        return Err(Error::InvalidLifetime("refresh interval must be at least 1".into()));
    }
    if l_prev > lf {
        return Err(Error::InvalidLifetime(format!(
            "previous lifetime {l_prev} exceeds the refresh interval {lf}"
        )));
    }
    if placed_prev && placed_now {
        Ok(if l_prev >= 1 { l_prev - 1 } else { lf - 1 })
    } else {
        Ok(lf)
    }
}

/// Whether a service with remaining lifetime `l` is refreshed this slot.
pub fn needs_refresh(l: u32) -> bool {
    l == 0
}
