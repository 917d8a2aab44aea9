//! Float formatting shared by every CSV writer.

use std::fmt;

/// Shortest decimal that round-trips to the same `f64`, in positional
/// notation for magnitudes in `[1e-4, 1e16)` and scientific otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        let a = x.abs();
        if !x.is_finite() || x == 0.0 || (1e-4..1e16).contains(&a) {
            write!(f, "{x}")
        } else {
            write!(f, "{x:e}")
        }
    }
}
