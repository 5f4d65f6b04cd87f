//! Two-column CSV files with a fixed header and `#` comment lines.

use std::io::{Read, Write};

use crate::error::{Error, Result};

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line: line as usize, message: message.into() }
}

/// Reads a comma-separated file whose header must be exactly `header`.
pub fn read_two_columns<R: Read>(reader: R, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut saw_header = false;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", record.len())));
        }
        if !saw_header {
            if record[0] != *header[0] || record[1] != *header[1] {
                return Err(parse_err(
                    line,
                    format!("expected header `{},{}`, found `{},{}`", header[0], header[1], &record[0], &record[1]),
                ));
            }
            saw_header = true;
            continue;
        }
        let mut values = [0.0; 2];
        for (k, v) in values.iter_mut().enumerate() {
            *v = record[k]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(line, format!("`{}` is not a finite number", &record[k])))?;
        }
        first.push(values[0]);
        second.push(values[1]);
    }
    if !saw_header {
        return Err(parse_err(1, format!("missing header `{},{}`", header[0], header[1])));
    }
    Ok((first, second))
}

pub fn write_two_columns<W, I>(writer: W, header: [&str; 2], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for (a, b) in rows {
        w.write_record([a.to_string(), b.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# a\n\nu,s\n# b\n1,2\n\n3, 4\n";
        let (a, b) = read_two_columns(text.as_bytes(), ["u", "s"]).unwrap();
        assert_eq!(a, vec![1.0, 3.0]);
        assert_eq!(b, vec![2.0, 4.0]);
    }

    #[test]
    fn reports_line_of_bad_value() {
        let text = "u,s\n1,2\n1,x\n";
        match read_two_columns(text.as_bytes(), ["u", "s"]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_missing_header() {
        assert!(read_two_columns("u,s\n1,inf\n".as_bytes(), ["u", "s"]).is_err());
        assert!(read_two_columns("".as_bytes(), ["u", "s"]).is_err());
        assert!(read_two_columns("u,s,t\n".as_bytes(), ["u", "s"]).is_err());
    }
}
