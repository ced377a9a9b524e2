//! Tab-separated quadruples: `subject relation object time`, or
//! `subject relation object start end` in duration mode. Lines starting
//! with `#` and blank lines are skipped. Extra trailing columns are kept.

use std::io::{BufRead, Write};

use anot_core::{DurationFact, TkgStore};

use crate::error::DataError;
use crate::time::TimeCodec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    /// 1-based line number in the source.
    pub line: usize,
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub start: String,
    pub end: String,
    pub extra: Vec<String>,
}

pub fn read_rows<R: BufRead>(reader: R, duration: bool) -> Result<Vec<Row>, DataError> {
    let want = if duration { 5 } else { 4 };
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < want {
            return Err(DataError::Fields { line: i + 1, expected: want, found: fields.len() });
        }
        if fields[..want].iter().any(|f| f.is_empty()) {
            return Err(DataError::at(i + 1, "empty field"));
        }
        let end = if duration { fields[4] } else { fields[3] };
        rows.push(Row {
            line: i + 1,
            subject: fields[0].to_string(),
            relation: fields[1].to_string(),
            object: fields[2].to_string(),
            start: fields[3].to_string(),
            end: end.to_string(),
            extra: fields[want..].iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(rows)
}

/// Interns the labels of `rows` into `store` and encodes their times.
pub fn encode_rows(store: &mut TkgStore, codec: &TimeCodec, rows: &[Row]) -> Result<Vec<DurationFact>, DataError> {
    rows.iter()
        .map(|r| {
            let start = codec.encode(&r.start).map_err(|e| DataError::at(r.line, e))?;
            let end = codec.encode(&r.end).map_err(|e| DataError::at(r.line, e))?;
            if end < start {
                return Err(DataError::at(r.line, format!("interval ends before it starts: {} > {}", r.start, r.end)));
            }
            Ok(DurationFact {
                subject: store.intern_entity(&r.subject),
                relation: store.intern_relation(&r.relation),
                object: store.intern_entity(&r.object),
                start,
                end,
            })
        })
        .collect()
}

/// A store holding `rows`, with a time codec fitted to them. Exact
/// duplicates are dropped.
pub fn load_store(rows: &[Row], duration: bool) -> Result<(TkgStore, TimeCodec), DataError> {
    let codec = TimeCodec::fit(rows.iter().flat_map(|r| [r.start.as_str(), r.end.as_str()]))?;
    let mut store = if duration { TkgStore::with_durations() } else { TkgStore::new() };
    let facts = encode_rows(&mut store, &codec, rows)?;
    for (f, r) in facts.into_iter().zip(rows) {
        if duration {
            store.insert_duration(f).map_err(|e| DataError::at(r.line, e))?;
        } else {
            store.insert(anot_core::Fact::new(f.subject, f.relation, f.object, f.start));
        }
    }
    Ok((store, codec))
}

/// Writes `s r o t` (or `s r o start end`) with labels and raw times.
pub fn write_fact<W: Write>(w: &mut W, store: &TkgStore, codec: &TimeCodec, f: &DurationFact, duration: bool) -> std::io::Result<()> {
    let e = |id| store.entities().label(id).unwrap_or("?");
    let r = store.relations().label(f.relation).unwrap_or("?");
    write!(w, "{}\t{}\t{}\t{}", e(f.subject), r, e(f.object), codec.decode(f.start))?;
    if duration {
        write!(w, "\t{}", codec.decode(f.end))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blanks_and_errors() {
        let text = "# header\na\tr\tb\t0\n\nb\tr\tc\t24\textra\n";
        let rows = read_rows(text.as_bytes(), false).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].line, 4);
        assert_eq!(rows[1].extra, ["extra"]);
        let (store, codec) = load_store(&rows, false).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(codec.step, 24);
        assert!(matches!(read_rows("a\tr\tb\n".as_bytes(), false), Err(DataError::Fields { line: 1, .. })));
        assert!(read_rows("a\tr\tb\t1\n".as_bytes(), true).is_err());
    }

    #[test]
    fn intervals() {
        let rows = read_rows("a\tr\tb\t1\t3\nb\tr\tc\t2\t2\n".as_bytes(), true).unwrap();
        let (store, _) = load_store(&rows, true).unwrap();
        assert!(store.is_duration());
        // times count from the earliest label
        assert_eq!((store.fact(0).time, store.end(0)), (0, 2));
        let bad = read_rows("a\tr\tb\t3\t1\n".as_bytes(), true).unwrap();
        assert!(load_store(&bad, true).is_err());
    }
}
