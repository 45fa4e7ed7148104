//! In-process time-series store for KPM reports.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::{KpmRecord, Snssai};

pub const DEFAULT_RETENTION_S: f64 = 60.0;

/// Series key: one flow of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeriesKey {
    pub snssai: Snssai,
    pub rnti: u16,
    pub pdu_id: u8,
}

impl SeriesKey {
    pub fn of(r: &KpmRecord) -> Self {
        Self { snssai: r.snssai, rnti: r.rnti, pdu_id: r.pdu_id }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("record at {timestamp_ms} ms for {key:?} is not after {last_ms} ms")]
    NonMonotonicTimestamp { key: SeriesKey, timestamp_ms: u64, last_ms: u64 },
    #[error("slice {0} has never reported")]
    UnknownSlice(Snssai),
    #[error("window must be positive, got {0}")]
    InvalidWindow(f64),
}

#[derive(Debug, Clone)]
pub struct KpmStore {
    retention_ms: u64,
    series: BTreeMap<SeriesKey, VecDeque<KpmRecord>>,
    seen: BTreeSet<Snssai>,
    newest_ms: Option<u64>,
}

impl Default for KpmStore {
    fn default() -> Self {
        Self::new(DEFAULT_RETENTION_S)
    }
}

impl KpmStore {
    pub fn new(retention_s: f64) -> Self {
        Self {
            retention_ms: (retention_s * 1000.0).round().max(0.0) as u64,
            series: BTreeMap::new(),
            seen: BTreeSet::new(),
            newest_ms: None,
        }
    }

    /// Appends one record and evicts everything older than the retention
    /// window, measured back from the newest timestamp stored.
    pub fn append(&mut self, record: KpmRecord) -> Result<(), StoreError> {
        let key = SeriesKey::of(&record);
        let series = self.series.entry(key).or_default();
        if let Some(last) = series.back() {
            if record.timestamp_ms <= last.timestamp_ms {
                return Err(StoreError::NonMonotonicTimestamp {
                    key,
                    timestamp_ms: record.timestamp_ms,
                    last_ms: last.timestamp_ms,
                });
            }
        }
        self.seen.insert(record.snssai);
        let ts = record.timestamp_ms;
        series.push_back(record);
        if self.newest_ms.is_none_or(|n| ts > n) {
            self.newest_ms = Some(ts);
        }
        self.evict();
        Ok(())
    }

    /// Appends every record; rejected ones are returned and the rest kept.
    pub fn ingest(&mut self, records: &[KpmRecord]) -> Vec<StoreError> {
        records.iter().filter_map(|r| self.append(r.clone()).err()).collect()
    }

    fn evict(&mut self) {
        let Some(newest) = self.newest_ms else { return };
        let Some(cutoff) = newest.checked_sub(self.retention_ms) else { return };
        for s in self.series.values_mut() {
            while s.front().is_some_and(|r| r.timestamp_ms < cutoff) {
                s.pop_front();
            }
        }
        self.series.retain(|_, s| !s.is_empty());
    }

    pub fn len(&self) -> usize {
        self.series.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, key: &SeriesKey) -> impl Iterator<Item = &KpmRecord> {
        self.series.get(key).into_iter().flatten()
    }

    pub fn keys(&self) -> impl Iterator<Item = &SeriesKey> {
        self.series.keys()
    }

    pub fn has_seen(&self, snssai: Snssai) -> bool {
        self.seen.contains(&snssai)
    }

    /// Mean slice throughput over `(now - window, now]`: flows are summed per
    /// timestamp, then the per-timestamp totals are averaged. Zero when the
    /// window holds no records.
    pub fn avg_slice_throughput(&self, snssai: Snssai, now_ms: u64, window_s: f64) -> Result<f64, StoreError> {
        if !(window_s > 0.0) {
            return Err(StoreError::InvalidWindow(window_s));
        }
        if !self.has_seen(snssai) {
            return Err(StoreError::UnknownSlice(snssai));
        }
        let window_ms = (window_s * 1000.0).round() as u64;
        let start = now_ms.saturating_sub(window_ms);
        let mut per_ts: BTreeMap<u64, f64> = BTreeMap::new();
        for (key, series) in self.series.range(slice_range(snssai)) {
            debug_assert_eq!(key.snssai, snssai);
            for r in series.iter().filter(|r| r.timestamp_ms > start && r.timestamp_ms <= now_ms) {
                *per_ts.entry(r.timestamp_ms).or_default() += r.dl_thp_bps;
            }
        }
        if per_ts.is_empty() {
            return Ok(0.0);
        }
        Ok(per_ts.values().sum::<f64>() / per_ts.len() as f64)
    }
}

fn slice_range(snssai: Snssai) -> std::ops::RangeInclusive<SeriesKey> {
    SeriesKey { snssai, rnti: 0, pdu_id: 0 }..=SeriesKey { snssai, rnti: u16::MAX, pdu_id: u8::MAX }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: u64, sst: u8, rnti: u16, thp: f64) -> KpmRecord {
        KpmRecord {
            timestamp_ms: ts,
            rnti,
            snssai: Snssai::sst_only(sst),
            pdu_id: 1,
            mcs: 20,
            bler: 0.0,
            dl_thp_bps: thp,
            dl_prbs: 0,
        }
    }

    #[test]
    fn two_records_two_points() {
        let mut s = KpmStore::default();
        assert!(s.ingest(&[rec(500, 1, 1, 1.0), rec(500, 2, 2, 1.0)]).is_empty());
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn eviction_after_later_append() {
        let mut s = KpmStore::new(60.0);
        s.append(rec(1000, 1, 1, 1.0)).unwrap();
        s.append(rec(61_000, 1, 1, 1.0)).unwrap();
        assert_eq!(s.len(), 2);
        s.append(rec(61_001, 1, 1, 1.0)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.series(&SeriesKey::of(&rec(0, 1, 1, 0.0))).next().unwrap().timestamp_ms, 61_000);
    }

    #[test]
    fn duplicate_timestamp_rejected_others_kept() {
        let mut s = KpmStore::default();
        s.append(rec(500, 1, 1, 1.0)).unwrap();
        let errs = s.ingest(&[rec(500, 1, 1, 2.0), rec(500, 1, 2, 2.0)]);
        assert!(matches!(errs[..], [StoreError::NonMonotonicTimestamp { timestamp_ms: 500, .. }]));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn averages() {
        let mut s = KpmStore::default();
        for k in 1..=10 {
            s.append(rec(k * 500, 1, 1, 10e6)).unwrap();
            s.append(rec(k * 500, 2, 2, 4e6)).unwrap();
            s.append(rec(k * 500, 2, 3, 6e6)).unwrap();
        }
        assert_eq!(s.avg_slice_throughput(Snssai::sst_only(1), 5000, 5.0).unwrap(), 10e6);
        assert_eq!(s.avg_slice_throughput(Snssai::sst_only(2), 5000, 5.0).unwrap(), 10e6);
        assert_eq!(s.avg_slice_throughput(Snssai::sst_only(1), 20_000, 5.0).unwrap(), 0.0);
        assert_eq!(
            s.avg_slice_throughput(Snssai::sst_only(3), 5000, 5.0),
            Err(StoreError::UnknownSlice(Snssai::sst_only(3)))
        );
    }

    #[test]
    fn window_is_left_open() {
        let mut s = KpmStore::default();
        s.append(rec(1000, 1, 1, 100.0)).unwrap();
        s.append(rec(2000, 1, 1, 200.0)).unwrap();
        assert_eq!(s.avg_slice_throughput(Snssai::sst_only(1), 2000, 1.0).unwrap(), 200.0);
        assert_eq!(s.avg_slice_throughput(Snssai::sst_only(1), 2000, 1.001).unwrap(), 150.0);
    }

    #[test]
    fn queries_do_not_mutate() {
        let mut s = KpmStore::default();
        s.append(rec(1000, 1, 1, 100.0)).unwrap();
        let before = s.len();
        let a = s.avg_slice_throughput(Snssai::sst_only(1), 1000, 5.0).unwrap();
        let b = s.avg_slice_throughput(Snssai::sst_only(1), 1000, 5.0).unwrap();
        assert_eq!((a, s.len()), (b, before));
    }
}
