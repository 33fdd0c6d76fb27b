use std::io::Write;

use super::coincidences::{timestamps, CoincidenceWindow};
use super::g2::aligned_windows;
use crate::error::{Error, Result};
use crate::photon_sim::EventStream;

/// Number of intervening-herald bins beyond the same-herald bin.
pub const HISTOGRAM_DEPTH: usize = 10;

/// Triple coincidences sorted by how many herald windows separate the
/// output-1 and output-2 detections. Bin 0 is the same-herald coincidence;
/// bin `d ≥ 1` counts both orderings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleHistogram {
    pub bins: Vec<u64>,
    pub herald_total: u64,
}

impl TripleHistogram {
    pub const CSV_HEADER: &'static str = "bin,count";

    pub fn new(depth: usize) -> Self {
        Self {
            bins: vec![0; depth + 1],
            herald_total: 0,
        }
    }

    pub fn add(&mut self, other: &TripleHistogram) -> Result<()> {
        if self.bins.len() != other.bins.len() {
            return Err(Error::Argument(format!(
                "histogram depths differ ({} vs {})",
                self.bins.len() - 1,
                other.bins.len() - 1
            )));
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self.herald_total += other.herald_total;
        Ok(())
    }

    /// Bins per ordering, divided by the mean of the uncorrelated bins
    /// `d ≥ 1`. Bin 0 of the result estimates the heralded g2.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let far: u64 = self.bins.iter().skip(1).sum();
        if far == 0 {
            return Err(Error::UndefinedEstimate(
                "no triple coincidences across different heralds".into(),
            ));
        }
        let reference = far as f64 / (2.0 * (self.bins.len() - 1) as f64);
        Ok(self
            .bins
            .iter()
            .enumerate()
            .map(|(d, &c)| {
                let orderings = if d == 0 { 1.0 } else { 2.0 };
                c as f64 / orderings / reference
            })
            .collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for (d, c) in self.bins.iter().enumerate() {
            writeln!(w, "{d},{c}")?;
        }
        Ok(())
    }
}

/// Raw counts behind a heralded autocorrelation; chunks of one run can be
/// added together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeraldedCounts {
    pub heralds: u64,
    pub heralds_1: u64,
    pub heralds_2: u64,
    pub heralds_12: u64,
    pub histogram: TripleHistogram,
}

impl HeraldedCounts {
    pub fn empty() -> Self {
        Self {
            heralds: 0,
            heralds_1: 0,
            heralds_2: 0,
            heralds_12: 0,
            histogram: TripleHistogram::new(HISTOGRAM_DEPTH),
        }
    }

    pub fn add(&mut self, other: &HeraldedCounts) -> Result<()> {
        self.histogram.add(&other.histogram)?;
        self.heralds += other.heralds;
        self.heralds_1 += other.heralds_1;
        self.heralds_2 += other.heralds_2;
        self.heralds_12 += other.heralds_12;
        Ok(())
    }

    /// `N_h·N_h12 / (N_h1·N_h2)`.
    pub fn g2(&self) -> Result<HeraldedG2> {
        if self.heralds_1 == 0 || self.heralds_2 == 0 {
            return Err(Error::UndefinedEstimate(format!(
                "heralded g2 needs detections on both outputs (got {} and {})",
                self.heralds_1, self.heralds_2
            )));
        }
        let scale = self.heralds as f64 / (self.heralds_1 as f64 * self.heralds_2 as f64);
        let value = scale * self.heralds_12 as f64;
        // With no triples the error is that of a single count.
        let std_error = scale * (self.heralds_12.max(1) as f64).sqrt();
        Ok(HeraldedG2 {
            value,
            std_error,
            counts: self.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedG2 {
    pub value: f64,
    pub std_error: f64,
    pub counts: HeraldedCounts,
}

impl HeraldedG2 {
    pub const CSV_HEADER: &'static str = "g2,g2_std_error,heralds,heralds_1,heralds_2,heralds_12";

    pub fn csv_fields(&self) -> String {
        let c = &self.counts;
        format!(
            "{},{},{},{},{},{}",
            self.value, self.std_error, c.heralds, c.heralds_1, c.heralds_2, c.heralds_12
        )
    }

    pub fn histogram(&self) -> &TripleHistogram {
        &self.counts.histogram
    }
}

/// Counts heralds with detections in either or both outputs, using
/// non-overlapping windows centered on the heralds.
pub fn heralded_counts(
    herald: &EventStream,
    out1: &EventStream,
    out2: &EventStream,
    window_ns: u64,
) -> Result<HeraldedCounts> {
    let window = CoincidenceWindow::centered(window_ns)?;
    let th = timestamps(herald)?;
    let t1 = timestamps(out1)?;
    let t2 = timestamps(out2)?;
    let w1 = aligned_windows(&th, &t1, window);
    let w2 = aligned_windows(&th, &t2, window);
    debug_assert_eq!(w1.len(), w2.len());
    let d1: Vec<bool> = w1.iter().map(|(lo, hi)| hi > lo).collect();
    let d2: Vec<bool> = w2.iter().map(|(lo, hi)| hi > lo).collect();

    let mut counts = HeraldedCounts::empty();
    counts.heralds = d1.len() as u64;
    counts.histogram.herald_total = counts.heralds;
    counts.heralds_1 = d1.iter().filter(|&&x| x).count() as u64;
    counts.heralds_2 = d2.iter().filter(|&&x| x).count() as u64;
    counts.heralds_12 = d1.iter().zip(&d2).filter(|(a, b)| **a && **b).count() as u64;
    counts.histogram.bins[0] = counts.heralds_12;
    for d in 1..=HISTOGRAM_DEPTH {
        let mut n = 0u64;
        for i in 0..d1.len().saturating_sub(d) {
            n += (d1[i] && d2[i + d]) as u64 + (d2[i] && d1[i + d]) as u64;
        }
        counts.histogram.bins[d] = n;
    }
    Ok(counts)
}

/// Heralded autocorrelation of the light split over `out1` and `out2`.
pub fn heralded_g2(
    herald: &EventStream,
    out1: &EventStream,
    out2: &EventStream,
    window_ns: u64,
) -> Result<HeraldedG2> {
    if herald.is_empty() {
        return Err(Error::UndefinedEstimate("herald stream is empty".into()));
    }
    heralded_counts(herald, out1, out2, window_ns)?.g2()
}
