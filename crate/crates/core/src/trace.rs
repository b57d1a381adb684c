//! Structured run trace: one JSON object per line, in emission order.
//!
//! Every line carries a strictly increasing `seq`, the `tick` it belongs to
//! and an `event` tag. Traces from scripted runs are byte-identical across
//! repeated runs with the same configuration.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::WorldDelta;
use crate::error::{Error, Result};
use crate::modules::ReafferenceEntry;
use crate::processor::CallRecord;
use crate::types::{Kind, ModuleId, RepId, Representation, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// Fell below the refresh threshold or out of the bounded workspace.
    Refresh,
    /// A fresh observation of the same content replaced it.
    Superseded,
    /// Displaced to make room for a plan or action.
    Capacity,
    /// A refined plan replaced it.
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Header {
        seed: u64,
        ticks: u64,
        scripted: bool,
    },
    Observed {
        channel: String,
        text: String,
        priority: f64,
    },
    PerceptCreated {
        item: Representation,
        channel: String,
        repeat_count: u32,
    },
    Stored {
        module: ModuleId,
        item: Representation,
    },
    Removed {
        module: ModuleId,
        id: RepId,
    },
    Competed {
        selected: Vec<RepId>,
        scores: Vec<(RepId, f64)>,
        percept_count: usize,
        pool_size: usize,
    },
    Admitted {
        id: RepId,
        kind: Kind,
        content: String,
    },
    Discarded {
        id: RepId,
        reason: DiscardReason,
    },
    Refreshed {
        items: Vec<RepId>,
    },
    CoherenceEvicted {
        id: RepId,
        by: RepId,
    },
    PlanFormed {
        item: Representation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replaced: Option<RepId>,
    },
    ActionChosen {
        item: Representation,
    },
    Broadcast {
        deliveries: Vec<(ModuleId, Vec<RepId>)>,
    },
    ProcessorCall {
        call: CallRecord,
    },
    Warning {
        message: String,
    },
    WorldChanged {
        delta: WorldDelta,
    },
    Reafference {
        entry: ReafferenceEntry,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub tick: Tick,
    #[serde(flatten)]
    pub event: Event,
}

impl TraceEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace events always serialize")
    }
}

/// Collects trace events and optionally streams them to a writer as they arrive.
#[derive(Default)]
pub struct TraceSink {
    events: Vec<TraceEvent>,
    out: Option<Box<dyn Write + Send>>,
    next_seq: u64,
}

impl std::fmt::Debug for TraceSink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceSink")
            .field("events", &self.events.len())
            .field("streaming", &self.out.is_some())
            .finish()
    }
}

impl TraceSink {
    pub fn streaming(out: Box<dyn Write + Send>) -> Self {
        TraceSink {
            out: Some(out),
            ..Default::default()
        }
    }

    pub fn emit(&mut self, tick: Tick, event: Event) -> Result<()> {
        let ev = TraceEvent {
            seq: self.next_seq,
            tick,
            event,
        };
        self.next_seq += 1;
        if let Some(out) = self.out.as_mut() {
            writeln!(out, "{}", ev.to_line()).map_err(|e| Error::io("trace", e))?;
        }
        self.events.push(ev);
        Ok(())
    }

    /// Adopts an event produced by another sink, without writing it.
    pub fn push_existing(&mut self, ev: TraceEvent) {
        self.next_seq = self.next_seq.max(ev.seq + 1);
        self.events.push(ev);
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(out) = self.out.as_mut() {
            out.flush().map_err(|e| Error::io("trace", e))?;
        }
        Ok(())
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }
}

pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_line());
        s.push('\n');
    }
    s
}

pub fn write_jsonl(path: &Path, events: &[TraceEvent]) -> Result<()> {
    std::fs::write(path, to_jsonl(events)).map_err(|e| Error::io(path, e))
}

pub fn parse_jsonl(reader: impl BufRead, name: &str) -> Result<Vec<TraceEvent>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: TraceEvent =
            serde_json::from_str(&line).map_err(|e| Error::json(format!("{name}, line {}", i + 1), e))?;
        out.push(ev);
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TraceEvent>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(std::io::BufReader::new(file), &path.display().to_string())
}

/// Workspace membership at the end of each tick, reconstructed from
/// admission, discard and eviction events.
pub fn workspace_by_tick(events: &[TraceEvent]) -> Vec<(Tick, Vec<RepId>)> {
    let mut current: std::collections::BTreeSet<RepId> = Default::default();
    let mut out: Vec<(Tick, Vec<RepId>)> = Vec::new();
    let mut tick: Option<Tick> = None;
    for ev in events {
        if tick.is_some_and(|t| t != ev.tick) {
            out.push((tick.unwrap(), current.iter().copied().collect()));
        }
        tick = Some(ev.tick);
        match &ev.event {
            Event::Admitted { id, .. } => {
                current.insert(*id);
            }
            Event::Discarded { id, .. } | Event::CoherenceEvicted { id, .. } => {
                current.remove(id);
            }
            Event::PlanFormed { item, .. } | Event::ActionChosen { item } => {
                current.insert(item.id);
            }
            _ => {}
        }
    }
    if let Some(t) = tick {
        out.push((t, current.iter().copied().collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Draft, IdAllocator};

    #[test]
    fn events_round_trip_through_json() {
        let mut ids = IdAllocator::default();
        let p = ids.assign(
            Draft::new(Kind::Percept, "a siren wails", ModuleId::Perception, 3)
                .salience(0.95)
                .importance(0.95),
        );
        let mut sink = TraceSink::default();
        sink.emit(
            0,
            Event::Header {
                seed: 7,
                ticks: 3,
                scripted: true,
            },
        )
        .unwrap();
        sink.emit(
            3,
            Event::PerceptCreated {
                item: p.clone(),
                channel: "right".into(),
                repeat_count: 0,
            },
        )
        .unwrap();
        sink.emit(
            3,
            Event::Competed {
                selected: vec![p.id],
                scores: vec![(p.id, 1.0 / 3.0)],
                percept_count: 1,
                pool_size: 1,
            },
        )
        .unwrap();
        sink.emit(
            3,
            Event::Broadcast {
                deliveries: vec![(ModuleId::Belief, vec![p.id])],
            },
        )
        .unwrap();
        let text = to_jsonl(sink.events());
        let back = parse_jsonl(text.as_bytes(), "mem").unwrap();
        assert_eq!(back, sink.events());
        assert_eq!(to_jsonl(&back), text);
        assert!(text.lines().nth(1).unwrap().contains("\"event\":\"percept_created\""));
    }

    #[test]
    fn bad_line_is_reported() {
        let err = parse_jsonl(
            "{\"seq\":0,\"tick\":0,\"event\":\"warning\",\"message\":\"x\"}\nnot json\n".as_bytes(),
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
