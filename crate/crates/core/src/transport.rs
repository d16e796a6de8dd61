//! TCP-like reliable transfer and the HTTP / FTP workloads built on it.
//!
//! Segments are acknowledged individually. Loss is learned from the network
//! (a queue drop or hop-limit discard is reported back to the sender), and
//! the retransmission is released one RTO after the segment's last
//! transmission. Nothing else (no SACK, no fast retransmit) is modeled.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcpParams {
    pub mss: u32,
    pub max_window: u32,
    pub initial_ssthresh: u32,
    pub min_rto: SimTime,
    pub initial_rto: SimTime,
}

impl Default for TcpParams {
    fn default() -> Self {
        TcpParams {
            mss: 1460,
            max_window: 64,
            initial_ssthresh: 64,
            min_rto: SimTime::from_millis(200),
            initial_rto: SimTime::from_secs(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentState {
    pub first_sent: SimTime,
    pub last_sent: SimTime,
    pub transmissions: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckOutcome {
    /// First ack for this segment. `delay` runs from the segment's first
    /// transmission; it includes any retransmission wait.
    Accepted { delay: SimTime },
    /// Segment was not outstanding.
    Duplicate,
}

/// Sender half of a connection plus the bookkeeping needed for reporting.
#[derive(Debug, Clone)]
pub struct TcpConnection {
    params: TcpParams,
    total_bytes: u64,
    segments: u32,
    next_new: u32,
    in_flight: BTreeMap<u32, SegmentState>,
    acked: u32,
    cwnd: u32,
    ssthresh: u32,
    ca_acks: u32,
    srtt: Option<SimTime>,
    rto: SimTime,
    pub retransmit_count: u64,
    pub duplicate_acks: u64,
    pub delay_samples: Vec<SimTime>,
}

impl TcpConnection {
    /// A transfer of `total_bytes`; zero still occupies one (empty) segment.
    pub fn new(params: TcpParams, total_bytes: u64) -> Self {
        assert!(params.mss > 0 && params.max_window > 0);
        let segments = total_bytes.div_ceil(u64::from(params.mss)).max(1);
        TcpConnection {
            params,
            total_bytes,
            segments: u32::try_from(segments).expect("transfer too large"),
            next_new: 0,
            in_flight: BTreeMap::new(),
            acked: 0,
            cwnd: 1,
            ssthresh: params.initial_ssthresh.max(1),
            ca_acks: 0,
            srtt: None,
            rto: params.initial_rto,
            retransmit_count: 0,
            duplicate_acks: 0,
            delay_samples: Vec::new(),
        }
    }

    pub fn params(&self) -> &TcpParams {
        &self.params
    }

    pub fn cwnd(&self) -> u32 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> u32 {
        self.ssthresh
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt
    }

    pub fn segment_count(&self) -> u32 {
        self.segments
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    pub fn in_flight(&self) -> &BTreeMap<u32, SegmentState> {
        &self.in_flight
    }

    pub fn acked_segments(&self) -> u32 {
        self.acked
    }

    pub fn is_complete(&self) -> bool {
        self.acked == self.segments
    }

    /// Payload bytes carried by segment `seq`.
    pub fn segment_len(&self, seq: u32) -> u32 {
        let mss = u64::from(self.params.mss);
        let start = u64::from(seq) * mss;
        (self.total_bytes.saturating_sub(start)).min(mss) as u32
    }

    /// Releases the next new segment if the window has room.
    pub fn poll_send(&mut self, now: SimTime) -> Option<u32> {
        if self.next_new >= self.segments || self.in_flight.len() as u32 >= self.cwnd {
            return None;
        }
        let seq = self.next_new;
        self.next_new += 1;
        self.in_flight.insert(
            seq,
            SegmentState {
                first_sent: now,
                last_sent: now,
                transmissions: 1,
            },
        );
        Some(seq)
    }

    pub fn on_ack(&mut self, seq: u32, now: SimTime) -> AckOutcome {
        let Some(st) = self.in_flight.remove(&seq) else {
            self.duplicate_acks += 1;
            return AckOutcome::Duplicate;
        };
        self.acked += 1;
        // Karn: only unambiguous samples feed the estimator
        if st.transmissions == 1 {
            self.update_rtt(now.saturating_sub(st.last_sent));
        }
        if self.cwnd < self.ssthresh {
            self.cwnd += 1;
        } else {
            self.ca_acks += 1;
            if self.ca_acks >= self.cwnd {
                self.ca_acks = 0;
                self.cwnd += 1;
            }
        }
        self.cwnd = self.cwnd.min(self.params.max_window);
        let delay = now.saturating_sub(st.first_sent);
        self.delay_samples.push(delay);
        AckOutcome::Accepted { delay }
    }

    fn update_rtt(&mut self, sample: SimTime) {
        let srtt = match self.srtt {
            None => sample,
            Some(s) => SimTime::from_nanos((s.as_nanos() * 7 + sample.as_nanos()) / 8),
        };
        self.srtt = Some(srtt);
        self.rto = srtt.mul_u64(2).max(self.params.min_rto);
    }

    /// Network reports segment `seq` (or its ack) lost. Collapses the window
    /// and returns when the retransmission should go out, or `None` when the
    /// segment is not outstanding.
    pub fn on_drop(&mut self, seq: u32, now: SimTime) -> Option<SimTime> {
        let st = self.in_flight.get(&seq)?;
        let at = now.max(st.last_sent + self.rto);
        self.ssthresh = (self.cwnd / 2).max(1);
        self.cwnd = 1;
        self.ca_acks = 0;
        self.retransmit_count += 1;
        Some(at)
    }

    /// Marks `seq` as re-sent. Returns `false` if it is no longer outstanding.
    pub fn retransmit(&mut self, seq: u32, now: SimTime) -> bool {
        match self.in_flight.get_mut(&seq) {
            Some(st) => {
                st.last_sent = now;
                st.transmissions += 1;
                true
            }
            None => false,
        }
    }
}

/// Receiver half: which segments have arrived and how many bytes the
/// application has been handed.
#[derive(Debug, Clone)]
pub struct TcpReceiver {
    received: Vec<bool>,
    count: u32,
    pub delivered_bytes: u64,
    pub duplicates: u64,
}

impl TcpReceiver {
    pub fn new(segments: u32) -> Self {
        TcpReceiver {
            received: vec![false; segments as usize],
            count: 0,
            delivered_bytes: 0,
            duplicates: 0,
        }
    }

    /// Returns `true` the first time `seq` arrives.
    pub fn on_segment(&mut self, seq: u32, bytes: u32) -> bool {
        let slot = &mut self.received[seq as usize];
        if *slot {
            self.duplicates += 1;
            return false;
        }
        *slot = true;
        self.count += 1;
        self.delivered_bytes += u64::from(bytes);
        true
    }

    pub fn is_complete(&self) -> bool {
        self.count as usize == self.received.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("page size must be at least the request size and both positive")]
    PageSize,
    #[error("file size must be positive")]
    FileSize,
    #[error("think time mean must be positive and finite")]
    ThinkTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HttpProfile {
    pub page_size: u64,
    pub request_size: u64,
    /// mean of the exponential think time, seconds
    pub think_time_mean: f64,
    /// `None` repeats until the run ends
    pub repeat_count: Option<u32>,
}

impl HttpProfile {
    pub fn heavy_browsing() -> Self {
        HttpProfile {
            page_size: 100_000,
            request_size: 350,
            think_time_mean: 5.0,
            repeat_count: None,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.request_size == 0 || self.page_size < self.request_size {
            return Err(WorkloadError::PageSize);
        }
        validate_think(self.think_time_mean)
    }
}

fn validate_think(mean: f64) -> Result<(), WorkloadError> {
    if mean.is_finite() && mean > 0.0 {
        Ok(())
    } else {
        Err(WorkloadError::ThinkTime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransferDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtpTransfer {
    pub file_size: u64,
    pub direction: TransferDirection,
    /// pause between consecutive files, seconds
    pub think_time_mean: f64,
}

impl FtpTransfer {
    /// 1 MB downloads separated by the heavy-browsing think time.
    pub fn bulk_download() -> Self {
        FtpTransfer {
            file_size: 1_000_000,
            direction: TransferDirection::Down,
            think_time_mean: HttpProfile::heavy_browsing().think_time_mean,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.file_size == 0 {
            return Err(WorkloadError::FileSize);
        }
        validate_think(self.think_time_mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Workload {
    Http(HttpProfile),
    Ftp(FtpTransfer),
}

impl Workload {
    pub fn think_time_mean(&self) -> f64 {
        match self {
            Workload::Http(h) => h.think_time_mean,
            Workload::Ftp(f) => f.think_time_mean,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        match self {
            Workload::Http(h) => h.validate(),
            Workload::Ftp(f) => f.validate(),
        }
    }
}

/// Draws an exponential think time with the given mean.
pub fn sample_think_time<R: Rng + ?Sized>(rng: &mut R, mean_secs: f64) -> SimTime {
    let exp = Exp::new(1.0 / mean_secs).expect("positive think-time mean");
    SimTime::from_secs_f64(exp.sample(rng))
}
