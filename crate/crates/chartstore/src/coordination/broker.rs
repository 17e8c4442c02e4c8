//! Event broker: scope-filtered, priority-aware delivery of mutation events.
//!
//! The broker is an in-process reader of the shared mutation log. Each
//! subscription names a path scope and tracks a delivery cursor (the last
//! acknowledged version). Delivery is at-least-once: `poll` returns every
//! pending event past the cursor — priority events first, version order
//! within each class — until the subscriber acknowledges.

use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::store::{DocStore, MutationEvent, NodePath, StoreError};

pub type SubscriptionId = u64;

/// A subscriber's registration.
#[derive(Debug, Clone)]
pub struct Subscription {
    pub id: SubscriptionId,
    pub subscriber: String,
    pub scope: NodePath,
    /// Last acknowledged version.
    pub cursor: u64,
}

/// One delivery record, for audit and ordering assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    /// Global delivery sequence number.
    pub seq: u64,
    /// Poll call this delivery belonged to; batches share a poll id.
    pub poll: u64,
    pub subscriber: String,
    pub subscription: SubscriptionId,
    pub version: u64,
    pub priority: bool,
}

struct SubState {
    subscriber: String,
    scope: NodePath,
    cursor: u64,
    pending: Vec<MutationEvent>,
}

#[derive(Default)]
struct BrokerState {
    subs: BTreeMap<SubscriptionId, SubState>,
    next_id: SubscriptionId,
    last_ingested: u64,
    deliveries: Vec<Delivery>,
    delivery_seq: u64,
    poll_seq: u64,
}

/// In-process broker over one store's mutation log.
#[derive(Default)]
pub struct Broker {
    state: Mutex<BrokerState>,
}

impl Broker {
    pub fn new() -> Self {
        Broker::default()
    }

    /// Register a subscription scoped to a path prefix, starting after
    /// `cursor` (0 delivers everything).
    pub fn subscribe(&self, subscriber: &str, scope: NodePath, cursor: u64) -> SubscriptionId {
        let mut st = self.state.lock().unwrap();
        st.next_id += 1;
        let id = st.next_id;
        st.subs.insert(
            id,
            SubState { subscriber: subscriber.to_string(), scope, cursor, pending: Vec::new() },
        );
        id
    }

    pub fn subscription(&self, id: SubscriptionId) -> Option<Subscription> {
        let st = self.state.lock().unwrap();
        st.subs.get(&id).map(|s| Subscription {
            id,
            subscriber: s.subscriber.clone(),
            scope: s.scope.clone(),
            cursor: s.cursor,
        })
    }

    /// Queue one event to every scope-matching subscription.
    pub fn dispatch(&self, event: &MutationEvent) {
        let mut st = self.state.lock().unwrap();
        st.last_ingested = st.last_ingested.max(event.version);
        for sub in st.subs.values_mut() {
            let matches = sub.scope.contains(&event.doc_id);
            if matches && event.version > sub.cursor && !sub.pending.iter().any(|e| e.version == event.version) {
                sub.pending.push(event.clone());
            }
        }
    }

    /// Ingest any log entries not yet seen by this broker.
    pub fn drain_log(&self, store: &DocStore) -> Result<usize, StoreError> {
        let since = self.state.lock().unwrap().last_ingested;
        let events = store.mutation_log(since)?;
        for e in &events {
            self.dispatch(e);
        }
        Ok(events.len())
    }

    /// Pending events for a subscription: all priority events before all
    /// standard events, version order within each class. Events stay
    /// pending until acknowledged.
    pub fn poll(&self, id: SubscriptionId) -> Vec<MutationEvent> {
        let mut st = self.state.lock().unwrap();
        st.poll_seq += 1;
        let poll = st.poll_seq;
        let Some(sub) = st.subs.get_mut(&id) else {
            return Vec::new();
        };
        let mut batch = sub.pending.clone();
        batch.sort_by_key(|e| (!e.priority, e.version));
        let subscriber = sub.subscriber.clone();
        for e in &batch {
            st.delivery_seq += 1;
            let seq = st.delivery_seq;
            st.deliveries.push(Delivery {
                seq,
                poll,
                subscriber: subscriber.clone(),
                subscription: id,
                version: e.version,
                priority: e.priority,
            });
        }
        batch
    }

    /// Advance the cursor: every event at or below `version` is
    /// acknowledged and leaves the pending queue.
    pub fn ack(&self, id: SubscriptionId, version: u64) {
        let mut st = self.state.lock().unwrap();
        if let Some(sub) = st.subs.get_mut(&id) {
            sub.cursor = sub.cursor.max(version);
            let cursor = sub.cursor;
            sub.pending.retain(|e| e.version > cursor);
        }
    }

    /// Full delivery log since broker creation.
    pub fn deliveries(&self) -> Vec<Delivery> {
        self.state.lock().unwrap().deliveries.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{PageRef, WriterRole};

    fn event(version: u64, patient: &str, priority: bool) -> MutationEvent {
        let path = NodePath::leaf(patient, "hadm_20000001", "triage.md").unwrap();
        MutationEvent {
            version,
            doc_id: path.clone(),
            page_ref: PageRef { path, revision: 1 },
            writer_role: WriterRole::System,
            priority,
            timestamp: 0,
        }
    }

    #[test]
    fn priority_events_jump_the_queue() {
        let broker = Broker::new();
        let sub = broker.subscribe("clinician", NodePath::root(), 0);
        broker.dispatch(&event(1, "S10000001", false));
        broker.dispatch(&event(2, "S10000001", false));
        broker.dispatch(&event(3, "S10000001", true));
        let batch = broker.poll(sub);
        let versions: Vec<u64> = batch.iter().map(|e| e.version).collect();
        assert_eq!(versions, vec![3, 1, 2]);
    }

    #[test]
    fn scope_filters_deliveries() {
        let broker = Broker::new();
        let sub = broker.subscribe("a-watcher", NodePath::patient("S10000001").unwrap(), 0);
        broker.dispatch(&event(1, "S10000001", false));
        broker.dispatch(&event(2, "S10000002", false));
        let batch = broker.poll(sub);
        assert_eq!(batch.len(), 1);
        assert_eq!(batch[0].version, 1);
    }

    #[test]
    fn ack_prevents_redelivery() {
        let broker = Broker::new();
        let sub = broker.subscribe("w", NodePath::root(), 0);
        broker.dispatch(&event(1, "S10000001", false));
        broker.dispatch(&event(2, "S10000001", false));
        let batch = broker.poll(sub);
        assert_eq!(batch.len(), 2);
        broker.ack(sub, 2);
        assert!(broker.poll(sub).is_empty());
        // Unacked events are redelivered (at-least-once).
        broker.dispatch(&event(3, "S10000001", false));
        assert_eq!(broker.poll(sub).len(), 1);
        assert_eq!(broker.poll(sub).len(), 1);
    }

    #[test]
    fn dispatch_below_cursor_is_dropped() {
        let broker = Broker::new();
        let sub = broker.subscribe("w", NodePath::root(), 5);
        broker.dispatch(&event(4, "S10000001", false));
        assert!(broker.poll(sub).is_empty());
        broker.dispatch(&event(6, "S10000001", false));
        assert_eq!(broker.poll(sub).len(), 1);
    }

    #[test]
    fn duplicate_dispatch_queues_once() {
        let broker = Broker::new();
        let sub = broker.subscribe("w", NodePath::root(), 0);
        let e = event(1, "S10000001", false);
        broker.dispatch(&e);
        broker.dispatch(&e);
        assert_eq!(broker.poll(sub).len(), 1);
    }
}
