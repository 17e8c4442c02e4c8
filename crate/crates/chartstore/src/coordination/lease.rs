//! Patient-scoped exclusive write leases on the filesystem.
//!
//! A lease is a directory `<root>/.leases/<patient>/` created with the
//! atomic `mkdir` primitive, holding a JSON record of the holder identity,
//! acquisition time, and last heartbeat. On contention exactly one
//! contender's `mkdir` succeeds. A holder renews by heartbeat and releases
//! by removing the directory; a crashed holder's lease expires once the
//! heartbeat is older than the ttl and can then be reclaimed. Reclaim
//! renames the expired directory aside before re-acquiring, so two
//! reclaimers cannot both win.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{SharedClock, WriteAuthority, LEASE_DIR};

pub const DEFAULT_TTL_SECONDS: u64 = 30;
pub const DEFAULT_HEARTBEAT_SECONDS: u64 = 10;

const RECORD_FILE: &str = "record.json";

/// On-disk lease record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaseRecord {
    pub patient: String,
    pub holder: String,
    /// Unix milliseconds.
    pub acquired_at: u64,
    /// Unix milliseconds; expiry is measured from here.
    pub last_heartbeat: u64,
    pub ttl_seconds: u64,
}

impl LeaseRecord {
    pub fn expired(&self, now_millis: u64) -> bool {
        now_millis.saturating_sub(self.last_heartbeat) > self.ttl_seconds * 1000
    }
}

#[derive(Debug, Error)]
pub enum LeaseError {
    #[error("lease for {patient} is held by {holder:?}")]
    LeaseHeld { patient: String, holder: Option<String> },
    #[error("{agent} does not hold the lease for {patient}")]
    NotHolder { patient: String, agent: String },
    #[error("lease for {patient} has not expired ({remaining_millis} ms remaining)")]
    NotExpired { patient: String, remaining_millis: u64 },
    #[error("no lease exists for {patient}")]
    NotHeld { patient: String },
    #[error("lease io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt lease record at {path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> LeaseError {
    LeaseError::Io { path: path.to_path_buf(), source }
}

struct ManagerInner {
    leases_root: PathBuf,
    agent: String,
    clock: SharedClock,
    reclaim_nonce: AtomicU64,
}

/// Per-agent handle for acquiring and reclaiming leases under one store root.
#[derive(Clone)]
pub struct LeaseManager {
    inner: Arc<ManagerInner>,
}

impl LeaseManager {
    pub fn new(store_root: &Path, agent: &str, clock: SharedClock) -> Self {
        LeaseManager {
            inner: Arc::new(ManagerInner {
                leases_root: store_root.join(LEASE_DIR),
                agent: agent.to_string(),
                clock,
                reclaim_nonce: AtomicU64::new(0),
            }),
        }
    }

    pub fn agent(&self) -> &str {
        &self.inner.agent
    }

    fn lease_dir(&self, patient: &str) -> PathBuf {
        self.inner.leases_root.join(patient)
    }

    /// Acquire the patient's lease. Exactly one contender succeeds; losers
    /// see `LeaseHeld` with the current holder when its record is readable.
    pub fn acquire(&self, patient: &str, ttl_seconds: u64) -> Result<Lease, LeaseError> {
        fs::create_dir_all(&self.inner.leases_root).map_err(|e| io_err(&self.inner.leases_root, e))?;
        let dir = self.lease_dir(patient);
        match fs::create_dir(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                let holder = self.read_record(patient).ok().map(|r| r.holder);
                return Err(LeaseError::LeaseHeld { patient: patient.to_string(), holder });
            }
            Err(e) => return Err(io_err(&dir, e)),
        }
        let now = self.inner.clock.now_millis();
        let record = LeaseRecord {
            patient: patient.to_string(),
            holder: self.inner.agent.clone(),
            acquired_at: now,
            last_heartbeat: now,
            ttl_seconds,
        };
        self.write_record(&record)?;
        Ok(Lease { manager: self.clone(), record })
    }

    /// Read the live record for a patient, if any.
    pub fn read_record(&self, patient: &str) -> Result<LeaseRecord, LeaseError> {
        let path = self.lease_dir(patient).join(RECORD_FILE);
        // The winner writes its record just after mkdir; a reader racing
        // that window retries briefly before reporting an unknown holder.
        for attempt in 0..3 {
            match fs::read_to_string(&path) {
                Ok(text) => {
                    return serde_json::from_str(&text)
                        .map_err(|e| LeaseError::Corrupt { path: path.clone(), source: e })
                }
                Err(e) if e.kind() == ErrorKind::NotFound && attempt < 2 => {
                    std::thread::sleep(std::time::Duration::from_millis(1));
                }
                Err(e) if e.kind() == ErrorKind::NotFound => {
                    return Err(LeaseError::NotHeld { patient: patient.to_string() })
                }
                Err(e) => return Err(io_err(&path, e)),
            }
        }
        unreachable!("loop returns")
    }

    fn write_record(&self, record: &LeaseRecord) -> Result<(), LeaseError> {
        let dir = self.lease_dir(&record.patient);
        let tmp = dir.join(".record.tmp");
        let path = dir.join(RECORD_FILE);
        let json = serde_json::to_string_pretty(record).expect("record serializes");
        fs::write(&tmp, json).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        Ok(())
    }

    /// Reclaim an expired lease for this agent. Fails with `NotExpired`
    /// while the holder's heartbeat is fresh.
    pub fn reclaim_expired(&self, patient: &str, ttl_seconds: u64) -> Result<Lease, LeaseError> {
        let record = self.read_record(patient)?;
        let now = self.inner.clock.now_millis();
        if !record.expired(now) {
            let remaining = record.ttl_seconds * 1000 - now.saturating_sub(record.last_heartbeat);
            return Err(LeaseError::NotExpired { patient: patient.to_string(), remaining_millis: remaining });
        }
        // Rename-then-remove: only one reclaimer's rename of the expired
        // directory can succeed, so a racing reclaimer cannot delete the
        // winner's fresh lease.
        let nonce = self.inner.reclaim_nonce.fetch_add(1, Ordering::SeqCst);
        let grave = self
            .inner
            .leases_root
            .join(format!(".reap-{patient}-{}-{}-{nonce}", std::process::id(), now));
        match fs::rename(self.lease_dir(patient), &grave) {
            Ok(()) => {
                let _ = fs::remove_dir_all(&grave);
            }
            Err(e) if e.kind() == ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(&grave, e)),
        }
        self.acquire(patient, ttl_seconds)
    }

    /// Live lease records under the store root (expired ones included).
    pub fn status(store_root: &Path) -> Result<Vec<LeaseRecord>, LeaseError> {
        let leases_root = store_root.join(LEASE_DIR);
        let mut records = Vec::new();
        if !leases_root.exists() {
            return Ok(records);
        }
        let entries = fs::read_dir(&leases_root).map_err(|e| io_err(&leases_root, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| io_err(&leases_root, e))?;
            if !entry.path().is_dir() || entry.file_name().to_string_lossy().starts_with('.') {
                continue;
            }
            let path = entry.path().join(RECORD_FILE);
            if let Ok(text) = fs::read_to_string(&path) {
                let record =
                    serde_json::from_str(&text).map_err(|e| LeaseError::Corrupt { path, source: e })?;
                records.push(record);
            }
        }
        records.sort_by(|a: &LeaseRecord, b: &LeaseRecord| a.patient.cmp(&b.patient));
        Ok(records)
    }
}

/// A held lease. Writing through [`WriteAuthority`] re-validates the
/// on-disk record, so a reclaimed or expired holder's late writes fail.
#[derive(Clone)]
pub struct Lease {
    manager: LeaseManager,
    record: LeaseRecord,
}

impl std::fmt::Debug for Lease {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lease").field("record", &self.record).finish()
    }
}

impl Lease {
    pub fn record(&self) -> &LeaseRecord {
        &self.record
    }

    pub fn patient(&self) -> &str {
        &self.record.patient
    }

    /// Refresh the heartbeat. Fails if this agent no longer holds the lease.
    pub fn renew(&mut self) -> Result<(), LeaseError> {
        self.check_still_holder()?;
        self.record.last_heartbeat = self.manager.inner.clock.now_millis();
        self.manager.write_record(&self.record)
    }

    /// Release by removing the lease directory. Fails (and leaves the
    /// current lease intact) if this agent no longer holds it.
    pub fn release(self) -> Result<(), LeaseError> {
        self.check_still_holder()?;
        let dir = self.manager.lease_dir(&self.record.patient);
        fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))
    }

    fn check_still_holder(&self) -> Result<(), LeaseError> {
        let current = self.manager.read_record(&self.record.patient)?;
        if current.holder != self.record.holder || current.acquired_at != self.record.acquired_at {
            return Err(LeaseError::NotHolder {
                patient: self.record.patient.clone(),
                agent: self.manager.inner.agent.clone(),
            });
        }
        Ok(())
    }
}

impl WriteAuthority for Lease {
    fn authorize(&self, patient: &str) -> Result<(), String> {
        if patient != self.record.patient {
            return Err(format!(
                "lease covers {} but the write targets {patient}",
                self.record.patient
            ));
        }
        let current = self
            .manager
            .read_record(patient)
            .map_err(|e| format!("lease record unreadable: {e}"))?;
        if current.holder != self.record.holder || current.acquired_at != self.record.acquired_at {
            return Err(format!("lease for {patient} now held by {}", current.holder));
        }
        let now = self.manager.inner.clock.now_millis();
        if current.expired(now) {
            return Err(format!("lease for {patient} expired"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::logical_clock;

    #[test]
    fn acquire_free_patient() {
        let dir = tempfile::tempdir().unwrap();
        let clock = logical_clock(1000);
        let mgr = LeaseManager::new(dir.path(), "agent-1", clock);
        let lease = mgr.acquire("S10000001", 30).unwrap();
        assert_eq!(lease.record().holder, "agent-1");
        lease.release().unwrap();
        // Released: a second acquire succeeds.
        mgr.acquire("S10000001", 30).unwrap();
    }

    #[test]
    fn contender_sees_holder() {
        let dir = tempfile::tempdir().unwrap();
        let clock = logical_clock(1000);
        let a = LeaseManager::new(dir.path(), "agent-a", clock.clone());
        let b = LeaseManager::new(dir.path(), "agent-b", clock);
        let _held = a.acquire("S10000001", 30).unwrap();
        match b.acquire("S10000001", 30) {
            Err(LeaseError::LeaseHeld { holder, .. }) => assert_eq!(holder.as_deref(), Some("agent-a")),
            other => panic!("expected LeaseHeld, got {other:?}"),
        }
    }

    #[test]
    fn unrelated_patients_are_independent() {
        let dir = tempfile::tempdir().unwrap();
        let clock = logical_clock(1000);
        let a = LeaseManager::new(dir.path(), "agent-a", clock.clone());
        let b = LeaseManager::new(dir.path(), "agent-b", clock);
        let _a = a.acquire("S10000001", 30).unwrap();
        b.acquire("S10000002", 30).unwrap();
    }

    #[test]
    fn renew_advances_heartbeat() {
        let dir = tempfile::tempdir().unwrap();
        let clock = logical_clock(1000);
        let mgr = LeaseManager::new(dir.path(), "agent-1", clock.clone());
        let mut lease = mgr.acquire("S10000001", 30).unwrap();
        let first = lease.record().last_heartbeat;
        clock.advance(5_000);
        lease.renew().unwrap();
        assert!(lease.record().last_heartbeat > first);
    }

    #[test]
    fn reclaim_before_expiry_fails() {
        let dir = tempfile::tempdir().unwrap();
        let clock = logical_clock(1000);
        let a = LeaseManager::new(dir.path(), "agent-a", clock.clone());
        let b = LeaseManager::new(dir.path(), "agent-b", clock.clone());
        let _held = a.acquire("S10000001", 30).unwrap();
        clock.advance(10_000);
        assert!(matches!(
            b.reclaim_expired("S10000001", 30),
            Err(LeaseError::NotExpired { .. })
        ));
    }

    #[test]
    fn crashed_holder_reclaimed_and_late_release_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let clock = logical_clock(1000);
        let a = LeaseManager::new(dir.path(), "agent-a", clock.clone());
        let b = LeaseManager::new(dir.path(), "agent-b", clock.clone());
        let crashed = a.acquire("S10000001", 30).unwrap();
        // No heartbeats; the ttl elapses.
        clock.advance(31_000);
        let reclaimed = b.reclaim_expired("S10000001", 30).unwrap();
        assert_eq!(reclaimed.record().holder, "agent-b");
        // The crashed holder's release must not disturb the new lease.
        assert!(matches!(crashed.release(), Err(LeaseError::NotHolder { .. })));
        assert_eq!(LeaseManager::status(dir.path()).unwrap().len(), 1);
    }

    #[test]
    fn expired_holder_write_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let clock = logical_clock(1000);
        let a = LeaseManager::new(dir.path(), "agent-a", clock.clone());
        let lease = a.acquire("S10000001", 30).unwrap();
        assert!(lease.authorize("S10000001").is_ok());
        assert!(lease.authorize("S10000002").is_err());
        clock.advance(31_000);
        assert!(lease.authorize("S10000001").is_err());
    }
}
