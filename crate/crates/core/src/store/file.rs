//! Single-file persistence: a magic header followed by checksummed frames,
//! one per committed batch (normally one release).
//!
//! ```text
//! header: b"ANTRACE\0" | format version (u32 LE)
//! frame:  payload length (u32 LE) | crc32 of payload (u32 LE) | payload
//! ```
//!
//! A torn or corrupt frame at the tail is ignored on load and cut off when
//! the file is next opened for writing, so readers only ever see whole
//! releases.

use std::fs::{File, OpenOptions, TryLockError};
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{Corpus, Op, StoreError};

pub const MAGIC: &[u8; 8] = b"ANTRACE\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: u64 = 12;

fn format_err(path: &Path, reason: impl Into<String>) -> StoreError {
    StoreError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads every intact frame; returns the corpus and the byte offset where the
/// intact prefix ends.
fn replay(path: &Path, file: &mut File) -> Result<(Corpus, u64), StoreError> {
    file.seek(SeekFrom::Start(0))?;
    let mut reader = BufReader::with_capacity(1 << 20, &mut *file);
    let mut header = [0u8; HEADER_LEN as usize];
    reader
        .read_exact(&mut header)
        .map_err(|_| format_err(path, "missing header"))?;
    if &header[..8] != MAGIC {
        return Err(format_err(path, "not a store file (bad magic)"));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format_err(
            path,
            format!("unsupported format version {version}"),
        ));
    }

    let mut corpus = Corpus::new();
    let mut good_end = HEADER_LEN;
    let mut frame_header = [0u8; 8];
    let mut payload = Vec::new();
    loop {
        if !read_fully(&mut reader, &mut frame_header)? {
            break;
        }
        let len = u32::from_le_bytes(frame_header[..4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(frame_header[4..].try_into().unwrap());
        payload.resize(len, 0);
        if !read_fully(&mut reader, &mut payload)? || crc32fast::hash(&payload) != crc {
            break;
        }
        let ops: Vec<Op> = bincode::deserialize(&payload)
            .map_err(|e| format_err(path, format!("undecodable frame: {e}")))?;
        for op in ops {
            corpus.apply(op)?;
        }
        good_end += 8 + len as u64;
    }
    corpus.compact();
    Ok((corpus, good_end))
}

/// Like `read_exact`, but a short read means "torn tail" (false) instead of an error.
fn read_fully(reader: &mut impl Read, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => return Ok(false),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// An open store file with its in-memory corpus.
pub struct StoreFile {
    path: PathBuf,
    file: File,
}

impl StoreFile {
    /// Loads a store for reading.
    pub fn load(path: &Path) -> Result<Corpus, StoreError> {
        let mut file = File::open(path)?;
        Ok(replay(path, &mut file)?.0)
    }

    /// Opens (creating if needed) a store for appending. The returned corpus
    /// journals its mutations until the next [`StoreFile::commit`].
    pub fn open(path: &Path) -> Result<(StoreFile, Corpus), StoreError> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)?;
        if file.metadata()?.len() == 0 {
            let mut header = Vec::with_capacity(HEADER_LEN as usize);
            header.extend_from_slice(MAGIC);
            header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
            file.write_all(&header)?;
            file.sync_all()?;
        }
        let (mut corpus, good_end) = replay(path, &mut file)?;
        if file.metadata()?.len() != good_end {
            file.set_len(good_end)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::Start(good_end))?;
        corpus.set_journaling(true);
        Ok((
            StoreFile {
                path: path.to_owned(),
                file,
            },
            corpus,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends everything journaled since the last commit as one frame.
    /// Returns false when there was nothing to write.
    pub fn commit(&mut self, corpus: &mut Corpus) -> Result<bool, StoreError> {
        if !corpus.has_pending_changes() {
            return Ok(false);
        }
        let ops = corpus.take_journal();
        let payload = bincode::serialize(&ops)
            .map_err(|e| format_err(&self.path, format!("encode failed: {e}")))?;
        let len = u32::try_from(payload.len())
            .map_err(|_| format_err(&self.path, "frame larger than 4 GiB"))?;
        let mut writer = BufWriter::with_capacity(1 << 20, &mut self.file);
        writer.write_all(&len.to_le_bytes())?;
        writer.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
        writer.write_all(&payload)?;
        writer.flush()?;
        drop(writer);
        self.file.sync_data()?;
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockMode {
    /// Held by readers serving queries.
    Shared,
    /// Held by ingestion.
    Exclusive,
}

/// Advisory lock on `<store>.lock` keeping ingestion and serving apart.
pub struct StoreLock {
    _file: File,
}

impl StoreLock {
    pub fn acquire(store: &Path, mode: LockMode) -> Result<StoreLock, StoreError> {
        let mut lock_path = store.as_os_str().to_owned();
        lock_path.push(".lock");
        let lock_path = PathBuf::from(lock_path);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)?;
        let attempt = match mode {
            LockMode::Shared => file.try_lock_shared(),
            LockMode::Exclusive => file.try_lock(),
        };
        match attempt {
            Ok(()) => Ok(StoreLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(StoreError::Locked(lock_path.display().to_string())),
            Err(TryLockError::Error(e)) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::release::{Release, Section};
    use chrono::NaiveDate;

    fn release(label: &str, year: i32) -> Release {
        Release::new(
            Section::SwissProt,
            label,
            NaiveDate::from_ymd_opt(year, 1, 1).unwrap(),
        )
    }

    #[test]
    fn commit_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.store");
        {
            let (mut store, mut corpus) = StoreFile::open(&path).unwrap();
            let r = corpus.register_release(release("1", 2000)).unwrap();
            let c = corpus.upsert_entry(r, &["P00001", "P00002"]).unwrap();
            corpus.add_occurrence("binds zinc.", c, r).unwrap();
            assert!(store.commit(&mut corpus).unwrap());
            assert!(!store.commit(&mut corpus).unwrap());
        }
        let corpus = StoreFile::load(&path).unwrap();
        assert_eq!(corpus.release_count(), 1);
        assert_eq!(corpus.sentence_count(), 1);
        assert_eq!(corpus.cluster_of("P00002"), corpus.cluster_of("P00001"));
        assert_eq!(corpus.occurrence_count(), 1);
    }

    #[test]
    fn torn_tail_is_invisible_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.store");
        {
            let (mut store, mut corpus) = StoreFile::open(&path).unwrap();
            corpus.register_release(release("1", 2000)).unwrap();
            store.commit(&mut corpus).unwrap();
            corpus.register_release(release("2", 2001)).unwrap();
            store.commit(&mut corpus).unwrap();
        }
        let full = std::fs::metadata(&path).unwrap().len();
        let f = OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(full - 3).unwrap();
        drop(f);

        assert_eq!(StoreFile::load(&path).unwrap().release_count(), 1);
        let (_store, corpus) = StoreFile::open(&path).unwrap();
        assert_eq!(corpus.release_count(), 1);
        assert!(std::fs::metadata(&path).unwrap().len() < full - 3);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not-a-store");
        std::fs::write(&path, b"hello world, this is text").unwrap();
        assert!(matches!(
            StoreFile::load(&path),
            Err(StoreError::Format { .. })
        ));
    }

    #[test]
    fn exclusive_lock_excludes_readers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.store");
        let shared = StoreLock::acquire(&path, LockMode::Shared).unwrap();
        let _shared2 = StoreLock::acquire(&path, LockMode::Shared).unwrap();
        assert!(matches!(
            StoreLock::acquire(&path, LockMode::Exclusive),
            Err(StoreError::Locked(_))
        ));
        drop(shared);
        drop(_shared2);
        let _ex = StoreLock::acquire(&path, LockMode::Exclusive).unwrap();
        assert!(StoreLock::acquire(&path, LockMode::Shared).is_err());
    }
}
