//! Raw timestamp labels to dense indexes and back.
//!
//! Labels are either integers or `YYYY-MM-DD` dates. The codec maps the
//! earliest label to 0 and divides offsets by the dataset's granularity,
//! the gcd of all offsets, so spans keep their meaning.

use std::fmt;

use chrono::NaiveDate;

use anot_core::Timestamp;

use crate::error::DataError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeKind {
    Integer,
    Date,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeCodec {
    pub kind: TimeKind,
    /// Raw value of index 0; days since 1970-01-01 for dates.
    pub base: i64,
    /// Raw units per index step.
    pub step: i64,
}

const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => panic!(),
};

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn raw_value(kind: TimeKind, label: &str) -> Option<i64> {
    match kind {
        TimeKind::Integer => label.parse().ok(),
        TimeKind::Date => NaiveDate::parse_from_str(label, "%Y-%m-%d").ok().map(|d| (d - EPOCH).num_days()),
    }
}

impl TimeCodec {
    /// Identity on non-negative integers.
    pub fn identity() -> Self {
        TimeCodec { kind: TimeKind::Integer, base: 0, step: 1 }
    }

    /// Picks the kind, base and step that fit every label.
    pub fn fit<'a, I: IntoIterator<Item = &'a str>>(labels: I) -> Result<Self, DataError> {
        let labels: Vec<&str> = labels.into_iter().collect();
        let first = match labels.first() {
            Some(l) => *l,
            None => return Ok(Self::identity()),
        };
        let kind = if raw_value(TimeKind::Integer, first).is_some() { TimeKind::Integer } else { TimeKind::Date };
        let mut values = Vec::with_capacity(labels.len());
        for l in &labels {
            values.push(raw_value(kind, l).ok_or_else(|| DataError::Time((*l).to_string()))?);
        }
        let base = *values.iter().min().expect("non-empty");
        let step = values.iter().fold(0, |g, &v| gcd(g, v - base)).max(1);
        Ok(TimeCodec { kind, base, step })
    }

    pub fn encode(&self, label: &str) -> Result<Timestamp, DataError> {
        let v = raw_value(self.kind, label).ok_or_else(|| DataError::Time(label.to_string()))?;
        let off = v - self.base;
        if off < 0 || off % self.step != 0 || off / self.step > Timestamp::MAX as i64 {
            return Err(DataError::OffGrid { label: label.to_string(), codec: *self });
        }
        Ok((off / self.step) as Timestamp)
    }

    pub fn decode(&self, t: Timestamp) -> String {
        let v = self.base + t as i64 * self.step;
        match self.kind {
            TimeKind::Integer => v.to_string(),
            TimeKind::Date => (EPOCH + chrono::Duration::days(v)).format("%Y-%m-%d").to_string(),
        }
    }

    /// Inverse of the `Display` form.
    pub fn parse(s: &str) -> Option<Self> {
        let mut it = s.split_whitespace();
        let kind = match it.next()? {
            "int" => TimeKind::Integer,
            "date" => TimeKind::Date,
            _ => return None,
        };
        let base = it.next()?.parse().ok()?;
        let step: i64 = it.next()?.parse().ok()?;
        (step > 0 && it.next().is_none()).then_some(TimeCodec { kind, base, step })
    }
}

impl fmt::Display for TimeCodec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TimeKind::Integer => "int",
            TimeKind::Date => "date",
        };
        write!(f, "{kind} {} {}", self.base, self.step)
    }
}
