//! Append-only shard log: each frame is a 4-byte big-endian length followed
//! by the canonical JSON aggregate record.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::model::{decode_aggregate, encode_aggregate, AggregateRecord};

pub fn log_file_name(shard_id: u32) -> String {
    format!("shard-{shard_id}.log")
}

pub fn encode_log_frame(record: &AggregateRecord) -> Vec<u8> {
    let body = encode_aggregate(record);
    let len = u32::try_from(body.len()).expect("aggregate frame fits in u32");
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&len.to_be_bytes());
    frame.extend_from_slice(&body);
    frame
}

/// Result of scanning a log image. Records before the first bad frame are
/// always returned.
#[derive(Debug, Default)]
pub struct LogReplay {
    pub records: Vec<(u64, AggregateRecord)>,
    pub corrupt: Option<(u64, String)>,
}

/// Decodes frames until the end of input or the first undecodable frame.
pub fn scan_log(bytes: &[u8]) -> LogReplay {
    let mut replay = LogReplay::default();
    let mut offset = 0usize;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        if rest.len() < 4 {
            replay.corrupt = Some((offset as u64, "truncated length prefix".into()));
            break;
        }
        let len = u32::from_be_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
        let Some(body) = rest.get(4..4 + len) else {
            replay.corrupt = Some((offset as u64, format!("frame declares {len} bytes, {} available", rest.len() - 4)));
            break;
        };
        match decode_aggregate(body) {
            Ok(rec) => replay.records.push((offset as u64, rec)),
            Err(e) => {
                replay.corrupt = Some((offset as u64, e.to_string()));
                break;
            }
        }
        offset += 4 + len;
    }
    replay
}

#[derive(Debug)]
pub(crate) struct ShardLog {
    path: PathBuf,
    file: File,
}

impl ShardLog {
    pub fn open_append(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ShardLog { path: path.to_owned(), file })
    }

    pub fn append(&mut self, record: &AggregateRecord) -> io::Result<()> {
        self.file.write_all(&encode_log_frame(record))?;
        self.file.flush()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
