//! Matrix stream formats.
//!
//! Text: a first line `n p`, then blocks of `n` rows with `p`
//! whitespace-separated decimals each, blocks separated by blank lines.
//!
//! Binary: a 16-byte header of two little-endian `u64` (`n`, `p`) followed
//! by contiguous little-endian `f64` blocks of `n·p` values, row-major.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::corrstats::DataBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Text,
    Binary,
}

/// Block dimensions shared by every block in a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub n: usize,
    pub p: usize,
    pub format: StreamFormat,
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("block {block}, row {row} (line {line}): {message}")]
    Row {
        block: usize,
        row: usize,
        line: usize,
        message: String,
    },
    #[error("block {block}: {message}")]
    Block { block: usize, message: String },
    #[error("stream is {found_n}x{found_p}, expected {expected_n}x{expected_p}")]
    Dimension {
        expected_n: usize,
        expected_p: usize,
        found_n: usize,
        found_p: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl StreamHeader {
    pub fn check(&self, n: Option<usize>, p: Option<usize>) -> Result<(), StreamError> {
        let (en, ep) = (n.unwrap_or(self.n), p.unwrap_or(self.p));
        if (en, ep) != (self.n, self.p) {
            return Err(StreamError::Dimension {
                expected_n: en,
                expected_p: ep,
                found_n: self.n,
                found_p: self.p,
            });
        }
        Ok(())
    }
}

fn validate_dims(n: usize, p: usize, line: usize) -> Result<(), StreamError> {
    if n < 3 || p < 2 {
        return Err(StreamError::Parse {
            line,
            message: format!("header dimensions {n}x{p} need n >= 3 and p >= 2"),
        });
    }
    Ok(())
}

/// Iterator over blocks of a text stream.
pub struct TextBlocks<R> {
    reader: R,
    header: StreamHeader,
    line_no: usize,
    block_no: usize,
    done: bool,
    buf: String,
}

impl<R: BufRead> TextBlocks<R> {
    pub fn new(mut reader: R) -> Result<Self, StreamError> {
        let mut buf = String::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            if reader.read_line(&mut buf)? == 0 {
                return Err(StreamError::Parse {
                    line: line_no + 1,
                    message: "missing `n p` header".into(),
                });
            }
            line_no += 1;
            if !buf.trim().is_empty() {
                break;
            }
        }
        let dims: Vec<&str> = buf.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| StreamError::Parse {
                line: line_no,
                message: format!("header must be `n p`, got `{}`", buf.trim()),
            })
        };
        if dims.len() != 2 {
            return Err(StreamError::Parse {
                line: line_no,
                message: format!("header must be `n p`, got `{}`", buf.trim()),
            });
        }
        let (n, p) = (parse(dims[0])?, parse(dims[1])?);
        validate_dims(n, p, line_no)?;
        Ok(Self {
            reader,
            header: StreamHeader {
                n,
                p,
                format: StreamFormat::Text,
            },
            line_no,
            block_no: 0,
            done: false,
            buf: String::new(),
        })
    }

    pub fn header(&self) -> StreamHeader {
        self.header
    }

    fn next_block(&mut self) -> Result<Option<DataBlock>, StreamError> {
        let StreamHeader { n, p, .. } = self.header;
        let mut values = Vec::with_capacity(n * p);
        let mut rows = 0;
        loop {
            self.buf.clear();
            let read = self.reader.read_line(&mut self.buf)?;
            if read == 0 {
                self.done = true;
                break;
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                if rows == 0 {
                    continue;
                }
                break;
            }
            if rows == 0 {
                self.block_no += 1;
            }
            rows += 1;
            if rows > n {
                return Err(StreamError::Row {
                    block: self.block_no,
                    row: rows,
                    line: self.line_no,
                    message: format!("block has more than n = {n} rows"),
                });
            }
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| StreamError::Row {
                    block: self.block_no,
                    row: rows,
                    line: self.line_no,
                    message: format!("cannot parse `{tok}` as a number"),
                })?;
                values.push(v);
            }
            let count = values.len() - before;
            if count != p {
                return Err(StreamError::Row {
                    block: self.block_no,
                    row: rows,
                    line: self.line_no,
                    message: format!("expected {p} values, found {count}"),
                });
            }
        }
        if rows == 0 {
            return Ok(None);
        }
        if rows != n {
            return Err(StreamError::Block {
                block: self.block_no,
                message: format!("has {rows} rows, expected {n}"),
            });
        }
        DataBlock::new(n, p, values).map(Some).map_err(|e| StreamError::Block {
            block: self.block_no,
            message: e.to_string(),
        })
    }
}

impl<R: BufRead> Iterator for TextBlocks<R> {
    type Item = Result<DataBlock, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_block() {
            Ok(Some(b)) => Some(Ok(b)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Iterator over blocks of a binary stream.
pub struct BinaryBlocks<R> {
    reader: R,
    header: StreamHeader,
    block_no: usize,
    done: bool,
}

/// Largest block a binary header may announce (512 MiB of doubles).
pub const MAX_BINARY_BLOCK_VALUES: usize = 1 << 26;

impl<R: Read> BinaryBlocks<R> {
    pub fn new(mut reader: R) -> Result<Self, StreamError> {
        let mut head = [0u8; 16];
        reader.read_exact(&mut head).map_err(|_| StreamError::Parse {
            line: 0,
            message: "binary stream shorter than its 16-byte header".into(),
        })?;
        let n = u64::from_le_bytes(head[..8].try_into().expect("8 bytes")) as usize;
        let p = u64::from_le_bytes(head[8..].try_into().expect("8 bytes")) as usize;
        validate_dims(n, p, 0)?;
        if n.checked_mul(p).is_none_or(|len| len > MAX_BINARY_BLOCK_VALUES) {
            return Err(StreamError::Parse {
                line: 0,
                message: format!("binary header {n} x {p} exceeds {MAX_BINARY_BLOCK_VALUES} values per block"),
            });
        }
        Ok(Self {
            reader,
            header: StreamHeader {
                n,
                p,
                format: StreamFormat::Binary,
            },
            block_no: 0,
            done: false,
        })
    }

    pub fn header(&self) -> StreamHeader {
        self.header
    }

    fn next_block(&mut self) -> Result<Option<DataBlock>, StreamError> {
        let StreamHeader { n, p, .. } = self.header;
        let mut bytes = vec![0u8; n * p * 8];
        let mut filled = 0;
        while filled < bytes.len() {
            let got = self.reader.read(&mut bytes[filled..])?;
            if got == 0 {
                break;
            }
            filled += got;
        }
        if filled == 0 {
            return Ok(None);
        }
        self.block_no += 1;
        if filled < bytes.len() {
            return Err(StreamError::Block {
                block: self.block_no,
                message: format!("truncated: {filled} of {} bytes", bytes.len()),
            });
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        DataBlock::new(n, p, values).map(Some).map_err(|e| StreamError::Block {
            block: self.block_no,
            message: e.to_string(),
        })
    }
}

impl<R: Read> Iterator for BinaryBlocks<R> {
    type Item = Result<DataBlock, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_block() {
            Ok(Some(b)) => Some(Ok(b)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Boxed block iterator for either format.
pub type BlockIter<'a> = Box<dyn Iterator<Item = Result<DataBlock, StreamError>> + 'a>;

pub fn open_stream<'a, R: BufRead + 'a>(
    reader: R,
    format: StreamFormat,
) -> Result<(StreamHeader, BlockIter<'a>), StreamError> {
    match format {
        StreamFormat::Text => {
            let it = TextBlocks::new(reader)?;
            Ok((it.header(), Box::new(it)))
        }
        StreamFormat::Binary => {
            let it = BinaryBlocks::new(reader)?;
            Ok((it.header(), Box::new(it)))
        }
    }
}

pub fn write_text_header<W: Write>(w: &mut W, n: usize, p: usize) -> io::Result<()> {
    writeln!(w, "{n} {p}")
}

/// Writes one block; a blank line precedes every block.
pub fn write_text_block<W: Write>(w: &mut W, block: &DataBlock) -> io::Result<()> {
    writeln!(w)?;
    for r in 0..block.n() {
        let row: Vec<String> = block.row(r).iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_binary_header<W: Write>(w: &mut W, n: usize, p: usize) -> io::Result<()> {
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(p as u64).to_le_bytes())
}

pub fn write_binary_block<W: Write>(w: &mut W, block: &DataBlock) -> io::Result<()> {
    for v in block.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one summary value per nonblank line.
pub fn read_values<R: BufRead>(reader: R) -> Result<Vec<f64>, StreamError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| StreamError::Parse {
            line: idx + 1,
            message: format!("cannot parse `{t}` as a number"),
        })?;
        if !(0.0..=1.0).contains(&v) {
            return Err(StreamError::Parse {
                line: idx + 1,
                message: format!("summary value {v} outside [0, 1]"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(text: &str) -> Result<Vec<DataBlock>, StreamError> {
        TextBlocks::new(text.as_bytes())?.collect()
    }

    #[test]
    fn text_roundtrip() {
        let b1 = DataBlock::new(3, 2, vec![1.0, 2.0, 3.5, -4.0, 5.0, 6.25]).unwrap();
        let b2 = DataBlock::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let mut out = Vec::new();
        write_text_header(&mut out, 3, 2).unwrap();
        write_text_block(&mut out, &b1).unwrap();
        write_text_block(&mut out, &b2).unwrap();
        let got = blocks(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(got, vec![b1, b2]);
    }

    #[test]
    fn binary_roundtrip_and_truncation() {
        let b1 = DataBlock::new(3, 2, vec![1.0, 2.0, 3.5, -4.0, 5.0, 6.25]).unwrap();
        let mut out = Vec::new();
        write_binary_header(&mut out, 3, 2).unwrap();
        write_binary_block(&mut out, &b1).unwrap();
        write_binary_block(&mut out, &b1).unwrap();
        let got: Vec<_> = BinaryBlocks::new(&out[..]).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(got, vec![b1.clone(), b1]);
        out.truncate(out.len() - 3);
        let res: Result<Vec<_>, _> = BinaryBlocks::new(&out[..]).unwrap().collect();
        assert!(matches!(res, Err(StreamError::Block { block: 2, .. })));
        let mut huge = Vec::new();
        write_binary_header(&mut huge, usize::MAX / 2, 3).unwrap();
        assert!(matches!(BinaryBlocks::new(&huge[..]), Err(StreamError::Parse { .. })));
    }

    #[test]
    fn short_row_cites_block_and_row() {
        let text = "3 2\n1 2\n3 4\n5 6\n\n1 2\n3\n5 6\n";
        match blocks(text) {
            Err(StreamError::Row { block, row, line, .. }) => {
                assert_eq!((block, row, line), (2, 2, 7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            blocks("3 2\n1 2\n3 4\n"),
            Err(StreamError::Block { block: 1, .. })
        ));
        assert!(matches!(
            blocks("3 2\n1 2\n3 4\n5 6\n7 8\n"),
            Err(StreamError::Row { row: 4, .. })
        ));
        assert!(matches!(blocks("3 x\n"), Err(StreamError::Parse { line: 1, .. })));
        assert!(matches!(blocks(""), Err(StreamError::Parse { .. })));
        assert!(matches!(blocks("2 5\n"), Err(StreamError::Parse { .. })));
        assert!(matches!(blocks("3 2\n1 2\n3 abc\n5 6\n"), Err(StreamError::Row { .. })));
        assert_eq!(blocks("3 2\n\n\n").unwrap().len(), 0);
    }

    #[test]
    fn header_check() {
        let h = StreamHeader {
            n: 3,
            p: 4,
            format: StreamFormat::Text,
        };
        assert!(h.check(None, Some(4)).is_ok());
        assert!(matches!(h.check(Some(5), None), Err(StreamError::Dimension { .. })));
    }

    #[test]
    fn values_list() {
        assert_eq!(read_values("0.5\n\n# c\n0.25\n".as_bytes()).unwrap(), vec![0.5, 0.25]);
        assert!(read_values("1.5\n".as_bytes()).is_err());
        assert!(read_values("x\n".as_bytes()).is_err());
    }
}
