use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use super::{Chunk, Frame};
use crate::error::{Error, Result};

#[derive(Debug)]
enum Slot {
    Start(u32),
    Frame(Frame),
    End(u32),
}

#[derive(Debug)]
struct Inner {
    slots: VecDeque<Slot>,
    capacity: usize,
    buffered_frames: usize,
    write_cursor: u64,
    read_cursor: u64,
    closed: bool,
    writing_segment: Option<u32>,
    reading_segment: Option<(u32, u32)>,
}

#[derive(Debug)]
struct Shared {
    inner: Mutex<Inner>,
    ready: Condvar,
}

/// Snapshot of the buffer cursors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferStats {
    pub capacity: usize,
    pub write_cursor: u64,
    pub read_cursor: u64,
    pub closed: bool,
}

/// Outcome of a chunk read.
#[derive(Debug, Clone, PartialEq)]
pub enum ChunkRead {
    Chunk(Chunk),
    NotYetAvailable,
    EndOfSegment(u32),
    /// The writer closed the stream and everything has been read.
    Closed,
}

/// Bounded frame queue shared by exactly one writer (the segmenter) and one
/// reader (the decoder).
///
/// Segment boundaries travel in-band as markers; only frames count against
/// the capacity. Both halves are `Send`, so they may live on different
/// threads.
pub struct StreamBuffer;

impl StreamBuffer {
    pub fn with_capacity(capacity: usize) -> (BufferWriter, BufferReader) {
        let shared = Arc::new(Shared {
            inner: Mutex::new(Inner {
                slots: VecDeque::new(),
                capacity,
                buffered_frames: 0,
                write_cursor: 0,
                read_cursor: 0,
                closed: false,
                writing_segment: None,
                reading_segment: None,
            }),
            ready: Condvar::new(),
        });
        (
            BufferWriter {
                shared: Arc::clone(&shared),
            },
            BufferReader { shared },
        )
    }
}

fn lock(shared: &Shared) -> MutexGuard<'_, Inner> {
    // A panicking peer leaves the queue itself consistent.
    shared.inner.lock().unwrap_or_else(|e| e.into_inner())
}

fn stats(inner: &Inner) -> BufferStats {
    BufferStats {
        capacity: inner.capacity,
        write_cursor: inner.write_cursor,
        read_cursor: inner.read_cursor,
        closed: inner.closed,
    }
}

pub struct BufferWriter {
    shared: Arc<Shared>,
}

impl BufferWriter {
    pub fn start_segment(&mut self, segment_id: u32) -> Result<()> {
        let mut inner = lock(&self.shared);
        if inner.closed {
            return Err(Error::Protocol("segment start after close".into()));
        }
        if let Some(open) = inner.writing_segment {
            return Err(Error::Protocol(format!(
                "segment {segment_id} started while {open} is open"
            )));
        }
        inner.writing_segment = Some(segment_id);
        inner.slots.push_back(Slot::Start(segment_id));
        drop(inner);
        self.shared.ready.notify_one();
        Ok(())
    }

    /// Appends as many frames as fit and returns how many were taken. Never
    /// blocks; the caller retries the rest later.
    pub fn write(&mut self, frames: &[Frame]) -> Result<usize> {
        let mut inner = lock(&self.shared);
        if inner.closed {
            return Err(Error::Protocol("write after close".into()));
        }
        if inner.writing_segment.is_none() && !frames.is_empty() {
            return Err(Error::Protocol("frames written outside a segment".into()));
        }
        let room = inner.capacity - inner.buffered_frames;
        let n = room.min(frames.len());
        for f in &frames[..n] {
            inner.slots.push_back(Slot::Frame(f.clone()));
        }
        inner.buffered_frames += n;
        inner.write_cursor += n as u64;
        drop(inner);
        if n > 0 {
            self.shared.ready.notify_one();
        }
        Ok(n)
    }

    pub fn end_segment(&mut self) -> Result<()> {
        let mut inner = lock(&self.shared);
        let Some(id) = inner.writing_segment.take() else {
            return Err(Error::Protocol("segment end without start".into()));
        };
        inner.slots.push_back(Slot::End(id));
        drop(inner);
        self.shared.ready.notify_one();
        Ok(())
    }

    pub fn close(&mut self) {
        let mut inner = lock(&self.shared);
        if let Some(id) = inner.writing_segment.take() {
            inner.slots.push_back(Slot::End(id));
        }
        inner.closed = true;
        drop(inner);
        self.shared.ready.notify_all();
    }

    pub fn stats(&self) -> BufferStats {
        stats(&lock(&self.shared))
    }
}

impl Drop for BufferWriter {
    fn drop(&mut self) {
        self.close();
    }
}

pub struct BufferReader {
    shared: Arc<Shared>,
}

impl BufferReader {
    /// Takes the next chunk of the current segment: a full one once
    /// `chunk_size` frames are buffered, a short one when the segment ended
    /// first.
    pub fn read_chunk(&mut self, chunk_size: usize) -> ChunkRead {
        let mut inner = lock(&self.shared);
        Self::try_read(&mut inner, chunk_size.max(1))
    }

    /// Like [`read_chunk`](Self::read_chunk) but waits up to `timeout` for
    /// data instead of returning `NotYetAvailable` straight away.
    pub fn read_chunk_timeout(&mut self, chunk_size: usize, timeout: Duration) -> ChunkRead {
        let mut inner = lock(&self.shared);
        let deadline = std::time::Instant::now() + timeout;
        loop {
            match Self::try_read(&mut inner, chunk_size.max(1)) {
                ChunkRead::NotYetAvailable => {}
                other => return other,
            }
            let now = std::time::Instant::now();
            if now >= deadline {
                return ChunkRead::NotYetAvailable;
            }
            inner = self
                .shared
                .ready
                .wait_timeout(inner, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    pub fn stats(&self) -> BufferStats {
        stats(&lock(&self.shared))
    }

    fn try_read(inner: &mut Inner, chunk_size: usize) -> ChunkRead {
        loop {
            match inner.slots.front() {
                None => {
                    return if inner.closed {
                        ChunkRead::Closed
                    } else {
                        ChunkRead::NotYetAvailable
                    }
                }
                Some(Slot::Start(id)) => {
                    let id = *id;
                    inner.slots.pop_front();
                    inner.reading_segment = Some((id, 0));
                }
                Some(Slot::End(id)) => {
                    let id = *id;
                    inner.slots.pop_front();
                    inner.reading_segment = None;
                    return ChunkRead::EndOfSegment(id);
                }
                Some(Slot::Frame(_)) => break,
            }
        }

        let mut available = 0;
        let mut segment_over = inner.closed;
        for slot in inner.slots.iter() {
            match slot {
                Slot::Frame(_) if available < chunk_size => available += 1,
                Slot::Frame(_) => break,
                Slot::End(_) | Slot::Start(_) => {
                    segment_over = true;
                    break;
                }
            }
        }
        if available < chunk_size && !segment_over {
            return ChunkRead::NotYetAvailable;
        }

        let frames: Vec<Frame> = inner
            .slots
            .drain(..available)
            .map(|s| match s {
                Slot::Frame(f) => f,
                _ => unreachable!("counted only frame slots"),
            })
            .collect();
        inner.buffered_frames -= available;
        inner.read_cursor += available as u64;
        let (segment_id, chunk_index) = inner.reading_segment.unwrap_or((0, 0));
        inner.reading_segment = Some((segment_id, chunk_index + 1));
        match Chunk::new(frames, segment_id, chunk_index) {
            Ok(chunk) => ChunkRead::Chunk(chunk),
            // The writer only ever forwards consecutive frames.
            Err(e) => panic!("stream buffer held a non-contiguous run: {e}"),
        }
    }
}
