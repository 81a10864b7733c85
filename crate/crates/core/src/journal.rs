//! Append-only JSONL files that survive being killed mid-write.

use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Reads every record of a JSONL journal and opens it for appending.
///
/// A final line without its newline is a write that was never acknowledged;
/// it is dropped and cut from the file so later appends start on a clean
/// line. Any other malformed line is an error.
pub fn open_journal<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, File)> {
    let mut records = Vec::new();
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut offset = 0;
        let mut keep = text.len();
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let complete = line.ends_with('\n');
            let body = line.trim_end_matches(['\n', '\r']);
            if !body.trim().is_empty() {
                match serde_json::from_str(body) {
                    Ok(r) => records.push(r),
                    Err(_) if !complete => {
                        keep = offset;
                        break;
                    }
                    Err(e) => return Err(Error::parse(i + 1, format!("{}: {e}", path.display()))),
                }
            }
            offset += line.len();
        }
        if keep < text.len() {
            let f = OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(|e| Error::file(path, e))?;
            f.set_len(keep as u64)?;
        } else if !text.is_empty() && !text.ends_with('\n') {
            // A complete record that only lacks its newline.
            use std::io::Write;
            let mut f = OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(|e| Error::file(path, e))?;
            f.write_all(b"\n")?;
        }
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::file(path, e))?;
    Ok((records, file))
}
