use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Detector channel an event was recorded on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Channel {
    /// Idler detector announcing a signal photon.
    Herald = 0,
    /// Signal-wavelength output of the converter (also the bare signal arm).
    Unconverted = 1,
    /// Telecom output of the converter.
    Converted = 2,
}

/// Where a click physically came from. Diagnostic only: estimators never
/// look at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Origin {
    /// Photon of the heralded, correlated source mode.
    Pair = 0,
    /// Photon of an uncorrelated signal-arm mode.
    BackgroundMode = 1,
    ConversionNoise = 2,
    Dark = 3,
    /// Photon of a weak coherent pulse.
    Coherent = 4,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Herald => "herald",
            Channel::Unconverted => "unconverted",
            Channel::Converted => "converted",
        }
    }
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Pair => "pair",
            Origin::BackgroundMode => "background-mode",
            Origin::ConversionNoise => "conversion-noise",
            Origin::Dark => "dark",
            Origin::Coherent => "coherent",
        }
    }
}

impl TryFrom<u8> for Channel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Channel::Herald),
            1 => Ok(Channel::Unconverted),
            2 => Ok(Channel::Converted),
            _ => Err(Error::Argument(format!("unknown channel code {v}"))),
        }
    }
}

impl TryFrom<u8> for Origin {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Origin::Pair),
            1 => Ok(Origin::BackgroundMode),
            2 => Ok(Origin::ConversionNoise),
            3 => Ok(Origin::Dark),
            4 => Ok(Origin::Coherent),
            _ => Err(Error::Argument(format!("unknown origin code {v}"))),
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Channel::Herald, Channel::Unconverted, Channel::Converted]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown channel '{s}'")))
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Origin::Pair,
            Origin::BackgroundMode,
            Origin::ConversionNoise,
            Origin::Dark,
            Origin::Coherent,
        ]
        .into_iter()
        .find(|o| o.name() == s)
        .ok_or_else(|| Error::Argument(format!("unknown origin '{s}'")))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DetectionEvent {
    /// Nanoseconds since the start of the run.
    pub timestamp: u64,
    pub channel: Channel,
    pub origin: Origin,
}

/// Time-ordered clicks of one channel over a run of fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    channel: Channel,
    duration_ns: u64,
    events: Vec<DetectionEvent>,
}

impl EventStream {
    pub fn empty(channel: Channel, duration_ns: u64) -> Self {
        Self {
            channel,
            duration_ns,
            events: Vec::new(),
        }
    }

    /// Builds a stream, checking ordering, channel and time range.
    pub fn new(channel: Channel, duration_ns: u64, events: Vec<DetectionEvent>) -> Result<Self> {
        let stream = Self {
            channel,
            duration_ns,
            events,
        };
        stream.validate()?;
        Ok(stream)
    }

    /// Builds a stream from unsorted events of the right channel.
    pub(crate) fn from_unsorted(
        channel: Channel,
        duration_ns: u64,
        mut events: Vec<DetectionEvent>,
    ) -> Self {
        events.sort_by_key(|e| e.timestamp);
        debug_assert!(events
            .iter()
            .all(|e| e.channel == channel && e.timestamp < duration_ns));
        Self {
            channel,
            duration_ns,
            events,
        }
    }

    pub(crate) fn from_sorted_unchecked(
        channel: Channel,
        duration_ns: u64,
        events: Vec<DetectionEvent>,
    ) -> Self {
        Self {
            channel,
            duration_ns,
            events,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check_sorted()?;
        if let Some((i, e)) = self
            .events
            .iter()
            .enumerate()
            .find(|(_, e)| e.channel != self.channel)
        {
            return Err(Error::Argument(format!(
                "event {i} is on channel {} in a {} stream",
                e.channel, self.channel
            )));
        }
        if let Some(last) = self.events.last() {
            if last.timestamp >= self.duration_ns {
                return Err(Error::Argument(format!(
                    "timestamp {} ns is outside the {} ns run",
                    last.timestamp, self.duration_ns
                )));
            }
        }
        Ok(())
    }

    pub fn check_sorted(&self) -> Result<()> {
        match self
            .events
            .windows(2)
            .position(|w| w[1].timestamp < w[0].timestamp)
        {
            Some(i) => Err(Error::Unsorted { index: i + 1 }),
            None => Ok(()),
        }
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn duration_ns(&self) -> u64 {
        self.duration_ns
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ns as f64 * 1e-9
    }

    pub fn events(&self) -> &[DetectionEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<DetectionEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = u64> + '_ {
        self.events.iter().map(|e| e.timestamp)
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.events.iter().filter(|e| e.origin == origin).count()
    }

    /// Copy of the stream with every provenance tag replaced by `Pair`.
    pub fn scrubbed(&self) -> Self {
        let events = self
            .events
            .iter()
            .map(|e| DetectionEvent {
                origin: Origin::Pair,
                ..*e
            })
            .collect();
        Self::from_sorted_unchecked(self.channel, self.duration_ns, events)
    }

    /// Same events relabeled onto another channel.
    pub fn relabel(mut self, channel: Channel) -> Self {
        for e in &mut self.events {
            e.channel = channel;
        }
        self.channel = channel;
        self
    }

    /// Ordered merge of two streams of the same channel. On equal
    /// timestamps events of `self` come first.
    pub fn merge(self, other: EventStream) -> Result<EventStream> {
        if self.channel != other.channel {
            return Err(Error::Argument(format!(
                "cannot merge {} and {} streams",
                self.channel, other.channel
            )));
        }
        let duration_ns = self.duration_ns.max(other.duration_ns);
        let mut out = Vec::with_capacity(self.events.len() + other.events.len());
        let mut a = self.events.into_iter().peekable();
        let mut b = other.events.into_iter().peekable();
        loop {
            let take_a = match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => x.timestamp <= y.timestamp,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            let next = if take_a { a.next() } else { b.next() };
            out.extend(next);
        }
        Ok(EventStream::from_sorted_unchecked(
            self.channel,
            duration_ns,
            out,
        ))
    }
}
