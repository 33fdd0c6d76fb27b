use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    /// Standard deviation of `y`, if known.
    pub sigma: Option<f64>,
}

/// Sweep data for a fit. Either every point carries a sigma or none does.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::Parse {
                    record: i,
                    reason: format!("non-finite point ({}, {})", p.x, p.y),
                });
            }
            if let Some(s) = p.sigma {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::Parse {
                        record: i,
                        reason: format!("sigma = {s} must be > 0"),
                    });
                }
            }
        }
        let with_sigma = points.iter().filter(|p| p.sigma.is_some()).count();
        if with_sigma != 0 && with_sigma != points.len() {
            return Err(Error::Argument(format!(
                "{with_sigma} of {} points carry a sigma; give all or none",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    pub fn from_xy(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Argument(format!(
                "{} x values but {} y values",
                xs.len(),
                ys.len()
            )));
        }
        Self::new(
            xs.iter()
                .zip(ys)
                .map(|(&x, &y)| DataPoint { x, y, sigma: None })
                .collect(),
        )
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_sigmas(&self) -> bool {
        self.points.first().is_some_and(|p| p.sigma.is_some())
    }

    /// Residual weights 1/σ, or 1 for unweighted data.
    pub fn weights(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.sigma.map_or(1.0, |s| 1.0 / s))
            .collect()
    }

    /// Reads `x,y` or `x,y,sigma` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let with_sigma = match header
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>()
            .as_slice()
        {
            ["x", "y"] => false,
            ["x", "y", "sigma"] => true,
            _ => {
                return Err(Error::Parse {
                    record: 0,
                    reason: format!("expected header x,y[,sigma], got {}", header.join(",")),
                })
            }
        };
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse {
                        record: i + 1,
                        reason: format!("missing column {k}"),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        record: i + 1,
                        reason: format!("column {k}: {e}"),
                    })
            };
            points.push(DataPoint {
                x: field(0)?,
                y: field(1)?,
                sigma: if with_sigma { Some(field(2)?) } else { None },
            });
        }
        Self::new(points)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        if self.has_sigmas() {
            wtr.write_record(["x", "y", "sigma"])?;
        } else {
            wtr.write_record(["x", "y"])?;
        }
        for p in &self.points {
            match p.sigma {
                Some(s) => wtr.write_record([p.x.to_string(), p.y.to_string(), s.to_string()])?,
                None => wtr.write_record([p.x.to_string(), p.y.to_string()])?,
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
