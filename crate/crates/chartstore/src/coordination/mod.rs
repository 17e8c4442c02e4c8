//! Inter-agent coordination: patient-scoped write leases and the
//! priority-aware event broker. Agents never talk to each other directly —
//! every interaction is a document write observed through the broker.

mod broker;
mod lease;

pub use broker::{Broker, Delivery, Subscription, SubscriptionId};
pub use lease::{
    Lease, LeaseError, LeaseManager, LeaseRecord, DEFAULT_HEARTBEAT_SECONDS, DEFAULT_TTL_SECONDS,
};
