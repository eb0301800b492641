use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Message {
    pub topic: String,
    pub payload: Value,
    pub send_tick: u64,
    pub deliver_tick: u64,
}

/// Reliable pub/sub channel. No loss, and no reordering within a topic even
/// when the latency changes between sends.
#[derive(Clone, Debug, Default)]
pub struct Bus {
    queue: VecDeque<Message>,
    last_delivery: BTreeMap<String, u64>,
}

impl Bus {
    pub fn new() -> Self {
        Bus::default()
    }

    pub fn publish(&mut self, topic: &str, payload: Value, send_tick: u64, latency: u64) {
        let earliest = send_tick + 1 + latency;
        let last = self.last_delivery.entry(String::from(topic)).or_insert(0);
        let deliver_tick = earliest.max(*last);
        *last = deliver_tick;
        self.queue.push_back(Message {
            topic: String::from(topic),
            payload,
            send_tick,
            deliver_tick,
        });
    }

    /// Messages due at `tick`, in send order.
    pub fn deliver(&mut self, tick: u64) -> Vec<Message> {
        let (due, rest): (Vec<_>, Vec<_>) =
            self.queue.drain(..).partition(|m| m.deliver_tick <= tick);
        self.queue = rest.into();
        due
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delivers_after_latency() {
        let mut b = Bus::new();
        b.publish("t", Value::from(1), 5, 0);
        assert!(b.deliver(5).is_empty());
        assert_eq!(b.deliver(6).len(), 1);
        assert_eq!(b.in_flight(), 0);
    }

    #[test]
    fn topic_order_survives_latency_drop() {
        let mut b = Bus::new();
        b.publish("t", Value::from(1), 1, 5);
        b.publish("t", Value::from(2), 2, 0);
        b.publish("u", Value::from(3), 2, 0);
        let first = b.deliver(3);
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].topic, "u");
        let rest: Vec<_> = b.deliver(7).into_iter().map(|m| m.payload).collect();
        assert_eq!(rest, [Value::from(1), Value::from(2)]);
    }
}
