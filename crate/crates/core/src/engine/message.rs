

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::detector::{BlacklistBroadcast, HelloMessage, MaliciousReport};
use crate::rpl::{DataPacket, DioMessage};
use crate::NodeId;

/// Control-plane traffic. RREQ emissions are not sent one by one; each Hello
/// discloses how many the sender emitted in the period that just ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ControlMessage {
    Dio(DioMessage),
    Hello(HelloMessage),
    Report(MaliciousReport),
    Broadcast(BlacklistBroadcast),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Control(ControlMessage),
    Data(DataPacket),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum ControlKind {
    Dio,
    Hello,
    Report,
    Broadcast,
}

impl ControlMessage {
    pub fn kind(&self) -> ControlKind {
        match self {
            ControlMessage::Dio(_) => ControlKind::Dio,
            ControlMessage::Hello(_) => ControlKind::Hello,
            ControlMessage::Report(_) => ControlKind::Report,
            ControlMessage::Broadcast(_) => ControlKind::Broadcast,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Timer {
    Dio(NodeId),
    Hello(NodeId),
    Mobility,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    TimerFire(Timer),
    MessageDelivery {
        from: NodeId,
        to: NodeId,
        message: Message,
    },
    TrafficEmit(NodeId),
    /// A sinkhole's next malicious DIO.
    AttackAction(NodeId),
}

impl EventKind {
    pub fn is_data_delivery(&self) -> bool {
        matches!(
            self,
            EventKind::MessageDelivery {
                message: Message::Data(_),
                ..
            }
        )
    }
}

