//! Debounced interaction events over a frame sequence.
//!
//! An event opens once `open_after` consecutive frames each hold at least one
//! detection, and closes after `close_after` consecutive empty frames. The
//! event spans its first and last positive frames.

use serde::Serialize;

use crate::postprocess::Detection;

pub const DEFAULT_OPEN_AFTER: usize = 3;
pub const DEFAULT_CLOSE_AFTER: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionEvent {
    pub start_frame: u64,
    pub end_frame: u64,
    pub peak_confidence: f32,
    /// Highest-confidence detection within the event.
    pub representative_box: Detection,
    /// Frames spanned, `end_frame - start_frame + 1`.
    pub frame_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Debounce {
    pub open_after: usize,
    pub close_after: usize,
}

impl Default for Debounce {
    fn default() -> Self {
        Self {
            open_after: DEFAULT_OPEN_AFTER,
            close_after: DEFAULT_CLOSE_AFTER,
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    start: u64,
    last_positive: u64,
    best: Detection,
}

impl Candidate {
    fn absorb(&mut self, frame: u64, dets: &[Detection]) {
        self.last_positive = frame;
        for d in dets {
            if d.confidence > self.best.confidence {
                self.best = *d;
            }
        }
    }

    fn finish(self) -> InteractionEvent {
        InteractionEvent {
            start_frame: self.start,
            end_frame: self.last_positive,
            peak_confidence: self.best.confidence,
            representative_box: self.best,
            frame_count: self.last_positive - self.start + 1,
        }
    }
}

/// Streaming state machine. Feed frames in order with [`push`](Self::push)
/// and call [`finish`](Self::finish) at the end of the stream.
#[derive(Debug, Clone)]
pub struct EventAggregator {
    debounce: Debounce,
    run: usize,
    gap: usize,
    open: bool,
    current: Option<Candidate>,
}

impl EventAggregator {
    pub fn new(debounce: Debounce) -> Self {
        assert!(debounce.open_after >= 1 && debounce.close_after >= 1);
        Self {
            debounce,
            run: 0,
            gap: 0,
            open: false,
            current: None,
        }
    }

    /// Consumes one frame; returns an event when this frame closes one.
    pub fn push(&mut self, frame: u64, dets: &[Detection]) -> Option<InteractionEvent> {
        if !dets.is_empty() {
            self.gap = 0;
            self.run += 1;
            match &mut self.current {
                Some(c) => c.absorb(frame, dets),
                None => {
                    let mut c = Candidate {
                        start: frame,
                        last_positive: frame,
                        best: dets[0],
                    };
                    c.absorb(frame, dets);
                    self.current = Some(c);
                }
            }
            if self.run >= self.debounce.open_after {
                self.open = true;
            }
            return None;
        }

        self.run = 0;
        if !self.open {
            self.current = None;
            return None;
        }
        self.gap += 1;
        if self.gap >= self.debounce.close_after {
            self.open = false;
            self.gap = 0;
            return self.current.take().map(Candidate::finish);
        }
        None
    }

    /// Closes an event still open at the end of the stream.
    pub fn finish(&mut self) -> Option<InteractionEvent> {
        let was_open = std::mem::replace(&mut self.open, false);
        self.run = 0;
        self.gap = 0;
        let current = self.current.take();
        if was_open {
            current.map(Candidate::finish)
        } else {
            None
        }
    }
}

/// Runs the aggregator over a whole sequence.
pub fn aggregate<'a, I>(frames: I, debounce: Debounce) -> Vec<InteractionEvent>
where
    I: IntoIterator<Item = (u64, &'a [Detection])>,
{
    let mut agg = EventAggregator::new(debounce);
    let mut events: Vec<InteractionEvent> = frames.into_iter().filter_map(|(f, d)| agg.push(f, d)).collect();
    events.extend(agg.finish());
    events
}
