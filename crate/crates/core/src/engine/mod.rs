//! Discrete-event execution of a scenario.

mod message;
mod queue;
mod sim;
mod transcript;

pub use message::{ControlKind, ControlMessage, EventKind, Message, Timer};
pub use queue::{EventQueue, ScheduleInPast, Scheduled};
pub use sim::{run, run_on_topology, run_with, EngineError, Network, RunOptions};
pub use transcript::{
    EventRecord, Outcome, PacketFate, RecordKind, RunStats, RunTranscript, TraceLevel,
    VerdictRecord,
};
