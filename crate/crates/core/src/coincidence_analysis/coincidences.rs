use crate::error::{Error, Result};
use crate::photon_sim::EventStream;

/// Coincidence window `[t_a + offset, t_a + offset + width)` relative to a
/// reference event at `t_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoincidenceWindow {
    pub width_ns: u64,
    pub offset_ns: i64,
}

impl CoincidenceWindow {
    pub fn new(width_ns: u64, offset_ns: i64) -> Result<Self> {
        if width_ns == 0 {
            return Err(Error::Argument("coincidence window must be > 0 ns".into()));
        }
        Ok(Self {
            width_ns,
            offset_ns,
        })
    }

    /// Window of `width_ns` centered on the reference event.
    pub fn centered(width_ns: u64) -> Result<Self> {
        Self::new(width_ns, -((width_ns / 2) as i64))
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.width_ns, self.offset_ns).map(|_| ())
    }

    pub fn start(&self, t: u64) -> i64 {
        t as i64 + self.offset_ns
    }

    pub fn end(&self, t: u64) -> i64 {
        self.start(t) + self.width_ns as i64
    }
}

/// Calls `visit(i, lo, hi)` for every reference event `i` of `a` with the
/// index range `lo..hi` of `b` events inside its window. Both pointers only
/// move forward, so the sweep is linear in the stream lengths.
pub(crate) fn sweep_windows(
    a: &[u64],
    b: &[u64],
    window: CoincidenceWindow,
    mut visit: impl FnMut(usize, usize, usize),
) {
    let mut lo = 0usize;
    let mut hi = 0usize;
    for (i, &t) in a.iter().enumerate() {
        let start = window.start(t);
        let end = window.end(t);
        while lo < b.len() && (b[lo] as i64) < start {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < b.len() && (b[hi] as i64) < end {
            hi += 1;
        }
        visit(i, lo, hi);
    }
}

pub(crate) fn timestamps(s: &EventStream) -> Result<Vec<u64>> {
    s.check_sorted()?;
    Ok(s.timestamps().collect())
}

/// Number of pairs `(t_a, t_b)` with `t_b − t_a − offset ∈ [0, window)`.
pub fn count_coincidences(
    a: &EventStream,
    b: &EventStream,
    window_ns: u64,
    offset_ns: i64,
) -> Result<u64> {
    let window = CoincidenceWindow::new(window_ns, offset_ns)?;
    let ta = timestamps(a)?;
    let tb = timestamps(b)?;
    let mut total = 0u64;
    sweep_windows(&ta, &tb, window, |_, lo, hi| total += (hi - lo) as u64);
    Ok(total)
}
