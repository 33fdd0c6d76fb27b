//! Event stream serialization.
//!
//! CSV: header `channel,timestamp_ns,origin`, one event per row, channel and
//! origin by name. Binary: 10-byte records of little-endian `u64` timestamp,
//! `u8` channel code, `u8` origin code, with no header.

use std::io::{Read, Write};

use super::events::{Channel, DetectionEvent, EventStream, Origin};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 3] = ["channel", "timestamp_ns", "origin"];
pub const BINARY_RECORD_LEN: usize = 10;

pub fn write_csv<W: Write>(stream: &EventStream, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for e in stream.events() {
        w.write_record([e.channel.name(), &e.timestamp.to_string(), e.origin.name()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV event list. The run length is not part of the format and
/// must be supplied.
pub fn read_csv<R: Read>(reader: R, channel: Channel, duration_ns: u64) -> Result<EventStream> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            record: 0,
            reason: format!(
                "expected header {}, found {:?}",
                CSV_HEADER.join(","),
                header
            ),
        });
    }
    let mut events = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse_err = |reason: String| Error::Parse {
            record: i + 1,
            reason,
        };
        let channel: Channel = rec[0]
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let timestamp: u64 = rec[1]
            .parse()
            .map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?;
        let origin: Origin = rec[2]
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        events.push(DetectionEvent {
            timestamp,
            channel,
            origin,
        });
    }
    EventStream::new(channel, duration_ns, events)
}

pub fn write_binary<W: Write>(stream: &EventStream, mut writer: W) -> Result<()> {
    let mut buf = Vec::with_capacity(stream.len() * BINARY_RECORD_LEN);
    for e in stream.events() {
        buf.extend_from_slice(&e.timestamp.to_le_bytes());
        buf.push(e.channel as u8);
        buf.push(e.origin as u8);
    }
    writer.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(
    mut reader: R,
    channel: Channel,
    duration_ns: u64,
) -> Result<EventStream> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    if buf.len() % BINARY_RECORD_LEN != 0 {
        return Err(Error::Parse {
            record: buf.len() / BINARY_RECORD_LEN,
            reason: format!("trailing {} bytes", buf.len() % BINARY_RECORD_LEN),
        });
    }
    let events = buf
        .chunks_exact(BINARY_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let mut ts = [0u8; 8];
            ts.copy_from_slice(&rec[..8]);
            let wrap = |e: Error| Error::Parse {
                record: i,
                reason: e.to_string(),
            };
            Ok(DetectionEvent {
                timestamp: u64::from_le_bytes(ts),
                channel: Channel::try_from(rec[8]).map_err(wrap)?,
                origin: Origin::try_from(rec[9]).map_err(wrap)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EventStream::new(channel, duration_ns, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_sim::{apply_detector, simulate_pair_source, DetectorParams, SourceParams};
    use proptest::prelude::*;

    fn sample() -> EventStream {
        let (_, s) = simulate_pair_source(&SourceParams::nominal(), 0.002, 4).unwrap();
        let det = DetectorParams {
            efficiency: 0.5,
            dark_rate_hz: 1e5,
        };
        apply_detector(s, &det, 4).unwrap()
    }

    #[test]
    fn csv_layout() {
        let s = EventStream::new(
            Channel::Converted,
            100,
            vec![DetectionEvent {
                timestamp: 42,
                channel: Channel::Converted,
                origin: Origin::ConversionNoise,
            }],
        )
        .unwrap();
        let mut out = Vec::new();
        write_csv(&s, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "channel,timestamp_ns,origin\nconverted,42,conversion-noise\n"
        );
    }

    #[test]
    fn binary_layout() {
        let s = EventStream::new(
            Channel::Herald,
            1 << 41,
            vec![DetectionEvent {
                timestamp: 0x0102_0304_0506,
                channel: Channel::Herald,
                origin: Origin::Dark,
            }],
        )
        .unwrap();
        let mut out = Vec::new();
        write_binary(&s, &mut out).unwrap();
        assert_eq!(out, vec![6, 5, 4, 3, 2, 1, 0, 0, 0, 3]);
    }

    #[test]
    fn bad_inputs() {
        assert!(read_csv("a,b,c\n".as_bytes(), Channel::Herald, 10).is_err());
        assert!(read_csv(
            "channel,timestamp_ns,origin\nherald,x,pair\n".as_bytes(),
            Channel::Herald,
            10
        )
        .is_err());
        assert!(read_binary(&[0u8; 11][..], Channel::Herald, 10).is_err());
        let unsorted = "channel,timestamp_ns,origin\nherald,5,pair\nherald,2,pair\n";
        assert!(matches!(
            read_csv(unsorted.as_bytes(), Channel::Herald, 10),
            Err(Error::Unsorted { index: 1 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn round_trips(seed in 0u64..1000) {
            let (h, _) = simulate_pair_source(&SourceParams::nominal(), 0.005, seed).unwrap();
            for s in [h, sample()] {
                let mut csv_bytes = Vec::new();
                write_csv(&s, &mut csv_bytes).unwrap();
                prop_assert_eq!(&read_csv(&csv_bytes[..], s.channel(), s.duration_ns()).unwrap(), &s);
                let mut bin = Vec::new();
                write_binary(&s, &mut bin).unwrap();
                prop_assert_eq!(bin.len(), s.len() * BINARY_RECORD_LEN);
                prop_assert_eq!(&read_binary(&bin[..], s.channel(), s.duration_ns()).unwrap(), &s);
            }
        }
    }
}
