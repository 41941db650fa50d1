//! Per-station semantics of the TTP membership service.
//!
//! A station keeps a membership vector and the two counters `CAcc`/`CFail`
//! (here `a` and `f`). Frame CRCs are modelled as exact equality between the
//! sender's vector snapshot and the vector the receiver checks against; the
//! header and data fields play no role and are omitted.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Structural errors. These indicate a caller bug, never a protocol event.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("membership vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("station {station} is not in check phase {expected:?} (found {found:?})")]
    WrongPhase {
        station: StationId,
        expected: Phase,
        found: Phase,
    },
    #[error("station {station} cannot take part in integration from location {location:?}")]
    NotIntegrating { station: StationId, location: Location },
    #[error("no active station to copy a membership vector from")]
    NoIntegrationSource,
}

/// Position of a station in the ring; ring order is the integer order mod N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub usize);

impl StationId {
    pub fn index(self) -> usize {
        self.0
    }

    /// The station `k` positions further along a ring of `n` stations.
    pub fn offset(self, k: usize, n: usize) -> StationId {
        StationId((self.0 + k) % n)
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s_{}", self.0)
    }
}

/// One bit per station: `true` means "I currently receive this station correctly".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MembershipVector(Vec<bool>);

impl MembershipVector {
    pub fn all_ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, s: StationId) -> bool {
        self.0[s.0]
    }

    pub fn set(&mut self, s: StationId, bit: bool) {
        self.0[s.0] = bit;
    }

    /// Copy with two bits substituted, as used by the implicit-acknowledgment checks.
    pub fn with_bits(&self, first: (StationId, bool), second: (StationId, bool)) -> Self {
        let mut v = self.clone();
        v.set(first.0, first.1);
        v.set(second.0, second.1);
        v
    }

    pub fn clear(&mut self) {
        self.0.iter_mut().for_each(|b| *b = false);
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Stations whose bit is set.
    pub fn members(&self) -> impl Iterator<Item = StationId> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| StationId(i))
    }
}

impl fmt::Display for MembershipVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for MembershipVector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid membership bit {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Normal,
    /// First frame of a re-integrating station; receivers set its bit before checking.
    Integration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub sender: StationId,
    pub vector_snapshot: MembershipVector,
    pub kind: FrameKind,
}

/// How a frame arrives at one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reception {
    /// Delivered unchanged; the receiver's CRC evaluation decides.
    Intact,
    /// Corrupted by a fault for this receiver; every CRC check fails.
    Corrupted,
}

/// Frame CRC under the vector-equality model.
pub fn crc_correct(frame: &Frame, receiver_vector: &MembershipVector) -> Result<bool, ProtocolError> {
    vectors_agree(&frame.vector_snapshot, receiver_vector)
}

fn vectors_agree(a: &MembershipVector, b: &MembershipVector) -> Result<bool, ProtocolError> {
    if a.len() != b.len() {
        return Err(ProtocolError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a == b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NotSender,
    AwaitingFirstSuccessor,
    AwaitingSecondSuccessor,
    MembershipPointReached,
}

/// Implicit-acknowledgment bookkeeping of the most recent emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CheckPhase {
    pub phase: Phase,
    pub recorded_first_successor: Option<StationId>,
}

impl CheckPhase {
    pub const IDLE: CheckPhase = CheckPhase {
        phase: Phase::NotSender,
        recorded_first_successor: None,
    };

    pub fn awaiting_first() -> Self {
        Self {
            phase: Phase::AwaitingFirstSuccessor,
            recorded_first_successor: None,
        }
    }

    pub fn is_pending(&self) -> bool {
        matches!(
            self.phase,
            Phase::AwaitingFirstSuccessor | Phase::AwaitingSecondSuccessor
        )
    }
}

/// Control location. The three active locations mirror `l_in`, `l_1` and `l_0`
/// of the single-fault behavioural model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    ActivePreFault,
    ActiveAgree,
    ActiveDisagree,
    Failed,
    IntegListen,
    IntegCounting,
}

impl Location {
    pub fn is_active(self) -> bool {
        matches!(
            self,
            Location::ActivePreFault | Location::ActiveAgree | Location::ActiveDisagree
        )
    }

    pub fn is_integrating(self) -> bool {
        matches!(self, Location::IntegListen | Location::IntegCounting)
    }

    /// Short name used in tables.
    pub fn short(self) -> &'static str {
        match self {
            Location::ActivePreFault => "in",
            Location::ActiveAgree => "1",
            Location::ActiveDisagree => "0",
            Location::Failed => "F",
            Location::IntegListen => "IL",
            Location::IntegCounting => "IC",
        }
    }
}

/// Result of one implicit-acknowledgment check step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckOutcome {
    ReachedMembershipPoint,
    FirstSuccessorFaulted,
    ProceedToSecondCheck,
    LeaveActive,
    SecondSuccessorFaulted,
}

/// Clique-avoidance comparison. `Strict` is the protocol; `NonStrict` exists
/// only for mutation testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GateRule {
    #[default]
    Strict,
    NonStrict,
}

impl GateRule {
    pub fn admits(self, a: u32, f: u32) -> bool {
        match self {
            GateRule::Strict => a > f,
            GateRule::NonStrict => a >= f,
        }
    }
}

/// What happened to a station on receiving (or not receiving) a slot's frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiveOutcome {
    /// The slot owner was silent.
    Silent,
    Accepted,
    Rejected,
    /// Resolved a pending implicit-acknowledgment check.
    Checked(CheckOutcome),
    /// Station is not listening (failed).
    Ignored,
}

impl ReceiveOutcome {
    /// Whether the receiver recognised the frame as correct.
    pub fn accepted(self) -> bool {
        matches!(
            self,
            ReceiveOutcome::Accepted | ReceiveOutcome::Checked(CheckOutcome::ReachedMembershipPoint)
        )
    }
}

/// Events driving a station through re-integration.
#[derive(Debug, Clone, Copy)]
pub enum IntegrationEvent<'a> {
    /// Start listening with a copy of `source`'s vector.
    Start { source: Option<&'a StationState> },
    /// The integrating station's own slot has come.
    OwnSlot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntegrationAction {
    Started,
    /// First own slot: counters reset, nothing sent.
    CountersReset,
    /// Gate passed: the station is active again and sends this frame.
    Emits(Frame),
    /// Gate failed: back to `Failed`.
    Fails,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationState {
    pub id: StationId,
    pub location: Location,
    pub m: MembershipVector,
    pub a: u32,
    pub f: u32,
    pub check: CheckPhase,
    /// Station that was sending when the first fault struck (`s[i]`).
    pub faulty_station: Option<StationId>,
    /// Active location to resume after a successful re-integration.
    pub rejoin_location: Option<Location>,
}

impl StationState {
    /// Station in the fault-free steady state: all ones, `a` as given.
    pub fn steady(id: StationId, n: usize, a: u32) -> Self {
        Self {
            id,
            location: Location::ActivePreFault,
            m: MembershipVector::all_ones(n),
            a,
            f: 0,
            check: CheckPhase {
                phase: Phase::MembershipPointReached,
                recorded_first_successor: None,
            },
            faulty_station: None,
            rejoin_location: None,
        }
    }

    pub fn is_active(&self) -> bool {
        self.location.is_active()
    }

    /// The frame this station would send now.
    pub fn frame(&self, kind: FrameKind) -> Frame {
        let mut v = self.m.clone();
        v.set(self.id, true);
        Frame {
            sender: self.id,
            vector_snapshot: v,
            kind,
        }
    }

    /// Gate evaluation without side effects.
    pub fn gate_passes(&self, rule: GateRule) -> bool {
        rule.admits(self.a, self.f)
    }

    /// Clique-avoidance gate at the start of the station's own slot.
    ///
    /// On success the counters restart with the station counting its own
    /// frame and the implicit-acknowledgment checks begin. On failure the
    /// station leaves the active state with an all-zero vector.
    pub fn clique_gate(&mut self, rule: GateRule) -> bool {
        if self.gate_passes(rule) {
            self.a = 1;
            self.f = 0;
            self.check = CheckPhase::awaiting_first();
            true
        } else {
            self.leave();
            false
        }
    }

    /// Leave the active state.
    pub fn leave(&mut self) {
        self.location = Location::Failed;
        self.m.clear();
        self.a = 0;
        self.f = 0;
        self.check = CheckPhase::IDLE;
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), ProtocolError> {
        if self.check.phase == expected {
            Ok(())
        } else {
            Err(ProtocolError::WrongPhase {
                station: self.id,
                expected,
                found: self.check.phase,
            })
        }
    }

    /// CheckIa / CheckIb on the frame of the first successor.
    pub fn check_first_successor(
        &mut self,
        frame: &Frame,
        reception: Reception,
    ) -> Result<CheckOutcome, ProtocolError> {
        self.expect_phase(Phase::AwaitingFirstSuccessor)?;
        let succ = frame.sender;
        let (ia, ib) = match reception {
            Reception::Corrupted => (false, false),
            Reception::Intact => {
                let ia = self.m.with_bits((self.id, true), (succ, true));
                let ib = self.m.with_bits((self.id, false), (succ, true));
                (
                    vectors_agree(&frame.vector_snapshot, &ia)?,
                    vectors_agree(&frame.vector_snapshot, &ib)?,
                )
            }
        };
        if ia {
            self.m.set(succ, true);
            self.a += 1;
            self.check = CheckPhase {
                phase: Phase::MembershipPointReached,
                recorded_first_successor: None,
            };
            return Ok(CheckOutcome::ReachedMembershipPoint);
        }
        self.m.set(succ, false);
        self.f += 1;
        if ib {
            self.check = CheckPhase {
                phase: Phase::AwaitingSecondSuccessor,
                recorded_first_successor: Some(succ),
            };
            Ok(CheckOutcome::ProceedToSecondCheck)
        } else {
            Ok(CheckOutcome::FirstSuccessorFaulted)
        }
    }

    /// CheckIIa / CheckIIb on the frame of the next successor.
    pub fn check_second_successor(
        &mut self,
        frame: &Frame,
        reception: Reception,
    ) -> Result<CheckOutcome, ProtocolError> {
        self.expect_phase(Phase::AwaitingSecondSuccessor)?;
        let first = self
            .check
            .recorded_first_successor
            .expect("second check always records its first successor");
        let (iia, iib) = match reception {
            Reception::Corrupted => (false, false),
            Reception::Intact => {
                let iia = self.m.with_bits((self.id, true), (first, false));
                let iib = self.m.with_bits((self.id, false), (first, true));
                (
                    vectors_agree(&frame.vector_snapshot, &iia)?,
                    vectors_agree(&frame.vector_snapshot, &iib)?,
                )
            }
        };
        if iia {
            self.a += 1;
            self.check = CheckPhase {
                phase: Phase::MembershipPointReached,
                recorded_first_successor: None,
            };
            Ok(CheckOutcome::ReachedMembershipPoint)
        } else if iib {
            self.leave();
            Ok(CheckOutcome::LeaveActive)
        } else {
            self.m.set(frame.sender, false);
            self.f += 1;
            Ok(CheckOutcome::SecondSuccessorFaulted)
        }
    }

    /// Effect of another station's slot on this station.
    pub fn receive_step(
        &mut self,
        slot_owner: StationId,
        frame: Option<&Frame>,
        reception: Reception,
    ) -> Result<ReceiveOutcome, ProtocolError> {
        debug_assert_ne!(slot_owner, self.id);
        if !(self.is_active() || self.location.is_integrating()) {
            return Ok(ReceiveOutcome::Ignored);
        }
        let Some(frame) = frame else {
            self.m.set(slot_owner, false);
            return Ok(ReceiveOutcome::Silent);
        };
        if frame.kind == FrameKind::Integration {
            self.m.set(frame.sender, true);
        }
        if self.is_active() {
            match self.check.phase {
                Phase::AwaitingFirstSuccessor => {
                    return self
                        .check_first_successor(frame, reception)
                        .map(ReceiveOutcome::Checked)
                }
                Phase::AwaitingSecondSuccessor => {
                    return self
                        .check_second_successor(frame, reception)
                        .map(ReceiveOutcome::Checked)
                }
                Phase::NotSender | Phase::MembershipPointReached => {}
            }
        }
        let correct = reception == Reception::Intact && crc_correct(frame, &self.m)?;
        if correct {
            self.a += 1;
            Ok(ReceiveOutcome::Accepted)
        } else {
            self.f += 1;
            self.m.set(frame.sender, false);
            Ok(ReceiveOutcome::Rejected)
        }
    }

    /// Re-integration state machine.
    ///
    /// The copied vector keeps the integrator's own bit at 0 until its gate
    /// passes, matching what the other stations hold for it.
    pub fn reintegrate_step(
        &mut self,
        event: IntegrationEvent<'_>,
        rule: GateRule,
    ) -> Result<IntegrationAction, ProtocolError> {
        match (event, self.location) {
            (IntegrationEvent::Start { source }, Location::Failed) => {
                let source = source
                    .filter(|s| s.is_active())
                    .ok_or(ProtocolError::NoIntegrationSource)?;
                self.m = source.m.clone();
                self.m.set(self.id, false);
                self.a = 0;
                self.f = 0;
                self.check = CheckPhase::IDLE;
                self.rejoin_location = Some(source.location);
                self.location = Location::IntegListen;
                Ok(IntegrationAction::Started)
            }
            (IntegrationEvent::OwnSlot, Location::IntegListen) => {
                self.a = 0;
                self.f = 0;
                self.location = Location::IntegCounting;
                Ok(IntegrationAction::CountersReset)
            }
            (IntegrationEvent::OwnSlot, Location::IntegCounting) => {
                if rule.admits(self.a, self.f) {
                    self.m.set(self.id, true);
                    self.a = 1;
                    self.f = 0;
                    self.check = CheckPhase::awaiting_first();
                    self.location = self.rejoin_location.take().unwrap_or(Location::ActivePreFault);
                    Ok(IntegrationAction::Emits(self.frame(FrameKind::Integration)))
                } else {
                    self.rejoin_location = None;
                    self.leave();
                    Ok(IntegrationAction::Fails)
                }
            }
            (_, location) => Err(ProtocolError::NotIntegrating {
                station: self.id,
                location,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> MembershipVector {
        s.parse().unwrap()
    }

    fn frame(sender: usize, bits: &str) -> Frame {
        Frame {
            sender: StationId(sender),
            vector_snapshot: v(bits),
            kind: FrameKind::Normal,
        }
    }

    fn station(id: usize, bits: &str, a: u32, f: u32, phase: Phase) -> StationState {
        StationState {
            id: StationId(id),
            location: Location::ActiveAgree,
            m: v(bits),
            a,
            f,
            check: CheckPhase {
                phase,
                recorded_first_successor: None,
            },
            faulty_station: None,
            rejoin_location: None,
        }
    }

    #[test]
    fn crc_is_vector_equality() {
        assert!(crc_correct(&frame(1, "1111"), &v("1111")).unwrap());
        assert!(!crc_correct(&frame(1, "0111"), &v("1111")).unwrap());
        for i in 0..4 {
            let mut flipped = v("1111");
            flipped.set(StationId(i), false);
            assert!(!crc_correct(&frame(1, "1111"), &flipped).unwrap());
        }
    }

    #[test]
    fn crc_rejects_length_mismatch() {
        assert_eq!(
            crc_correct(&frame(1, "111"), &v("1111")),
            Err(ProtocolError::LengthMismatch { left: 3, right: 4 })
        );
    }

    #[test]
    fn first_check_ia_fails_ib_passes() {
        // s_0 checks s_1's frame right after its own frame was rejected by s_1.
        let mut s0 = station(0, "1111", 1, 0, Phase::AwaitingFirstSuccessor);
        let out = s0.check_first_successor(&frame(1, "0111"), Reception::Intact).unwrap();
        assert_eq!(out, CheckOutcome::ProceedToSecondCheck);
        assert_eq!(s0.m, v("1011"));
        assert_eq!((s0.a, s0.f), (1, 1));
        assert_eq!(s0.check.phase, Phase::AwaitingSecondSuccessor);
        assert_eq!(s0.check.recorded_first_successor, Some(StationId(1)));
    }

    #[test]
    fn first_check_passes_without_fault() {
        let mut s = station(2, "1111", 1, 0, Phase::AwaitingFirstSuccessor);
        let out = s.check_first_successor(&frame(3, "1111"), Reception::Intact).unwrap();
        assert_eq!(out, CheckOutcome::ReachedMembershipPoint);
        assert_eq!((s.a, s.f), (2, 0));
        assert_eq!(s.m, v("1111"));
    }

    #[test]
    fn first_check_both_fail_on_third_party_bit() {
        // Vectors differ on s_3 only; neither substitution can repair that.
        let mut s = station(0, "1111", 1, 0, Phase::AwaitingFirstSuccessor);
        let out = s.check_first_successor(&frame(1, "1110"), Reception::Intact).unwrap();
        assert_eq!(out, CheckOutcome::FirstSuccessorFaulted);
        assert_eq!(s.check.phase, Phase::AwaitingFirstSuccessor);
        assert_eq!(s.m, v("1011"));
        assert_eq!(s.f, 1);
    }

    #[test]
    fn corrupted_frame_fails_every_check() {
        let mut s = station(3, "1111", 1, 0, Phase::AwaitingFirstSuccessor);
        let out = s
            .check_first_successor(&frame(0, "1111"), Reception::Corrupted)
            .unwrap();
        assert_eq!(out, CheckOutcome::FirstSuccessorFaulted);
        assert_eq!(s.m, v("0111"));
    }

    #[test]
    fn second_check_iia_passes() {
        let mut s0 = station(0, "1011", 1, 1, Phase::AwaitingSecondSuccessor);
        s0.check.recorded_first_successor = Some(StationId(1));
        let out = s0.check_second_successor(&frame(2, "1011"), Reception::Intact).unwrap();
        assert_eq!(out, CheckOutcome::ReachedMembershipPoint);
        assert_eq!((s0.a, s0.f), (2, 1));
    }

    #[test]
    fn second_check_iib_passes_and_sender_leaves() {
        // Both followers rejected s_0: they hold 0111.
        let mut s0 = station(0, "1011", 1, 1, Phase::AwaitingSecondSuccessor);
        s0.check.recorded_first_successor = Some(StationId(1));
        let out = s0.check_second_successor(&frame(2, "0111"), Reception::Intact).unwrap();
        assert_eq!(out, CheckOutcome::LeaveActive);
        assert_eq!(s0.location, Location::Failed);
        assert_eq!(s0.m, MembershipVector::zeros(4));
    }

    #[test]
    fn second_check_both_fail_on_unrelated_bit() {
        let mut s0 = station(0, "1011", 1, 1, Phase::AwaitingSecondSuccessor);
        s0.check.recorded_first_successor = Some(StationId(1));
        let out = s0.check_second_successor(&frame(2, "1010"), Reception::Intact).unwrap();
        assert_eq!(out, CheckOutcome::SecondSuccessorFaulted);
        assert_eq!(s0.m, v("1001"));
        assert_eq!(s0.f, 2);
        assert_eq!(s0.check.phase, Phase::AwaitingSecondSuccessor);
    }

    #[test]
    fn checks_reject_wrong_phase() {
        let mut s = station(0, "1111", 1, 0, Phase::MembershipPointReached);
        assert!(matches!(
            s.check_first_successor(&frame(1, "1111"), Reception::Intact),
            Err(ProtocolError::WrongPhase { .. })
        ));
        assert!(matches!(
            s.check_second_successor(&frame(1, "1111"), Reception::Intact),
            Err(ProtocolError::WrongPhase { .. })
        ));
    }

    #[test]
    fn gate_is_strict() {
        let mut s3 = station(3, "0101", 2, 2, Phase::MembershipPointReached);
        assert!(!s3.clique_gate(GateRule::Strict));
        assert_eq!(s3.location, Location::Failed);
        assert_eq!(s3.m, MembershipVector::zeros(4));

        let mut fresh = station(1, "1111", 1, 0, Phase::MembershipPointReached);
        assert!(fresh.clique_gate(GateRule::Strict));
        assert_eq!((fresh.a, fresh.f), (1, 0));
        assert_eq!(fresh.check.phase, Phase::AwaitingFirstSuccessor);

        let mut s0 = station(0, "1000", 1, 2, Phase::AwaitingSecondSuccessor);
        assert!(!s0.clique_gate(GateRule::Strict));

        let tie = station(3, "0101", 2, 2, Phase::MembershipPointReached);
        assert!(tie.gate_passes(GateRule::NonStrict));
    }

    #[test]
    fn receive_rejecting_faulted_frame() {
        let mut s1 = station(1, "1111", 3, 0, Phase::MembershipPointReached);
        let out = s1
            .receive_step(StationId(0), Some(&frame(0, "1111")), Reception::Corrupted)
            .unwrap();
        assert_eq!(out, ReceiveOutcome::Rejected);
        assert_eq!(s1.m, v("0111"));
        assert_eq!((s1.a, s1.f), (3, 1));
    }

    #[test]
    fn receive_silent_slot_leaves_counters() {
        let mut s = station(0, "1011", 2, 1, Phase::MembershipPointReached);
        let out = s.receive_step(StationId(3), None, Reception::Intact).unwrap();
        assert_eq!(out, ReceiveOutcome::Silent);
        assert_eq!(s.m, v("1010"));
        assert_eq!((s.a, s.f), (2, 1));
    }

    #[test]
    fn receive_accepts_identical_vector() {
        let mut s = station(2, "1111", 2, 0, Phase::MembershipPointReached);
        let out = s
            .receive_step(StationId(0), Some(&frame(0, "1111")), Reception::Intact)
            .unwrap();
        assert!(out.accepted());
        assert_eq!(s.a, 3);
    }

    #[test]
    fn failed_station_ignores_traffic() {
        let mut s = station(2, "0000", 0, 0, Phase::NotSender);
        s.location = Location::Failed;
        let out = s
            .receive_step(StationId(0), Some(&frame(0, "1111")), Reception::Intact)
            .unwrap();
        assert_eq!(out, ReceiveOutcome::Ignored);
        assert_eq!(s.m, MembershipVector::zeros(4));
    }

    #[test]
    fn integration_frame_sets_sender_bit_first() {
        let mut s = station(0, "1101", 2, 0, Phase::MembershipPointReached);
        let f = Frame {
            sender: StationId(2),
            vector_snapshot: v("1111"),
            kind: FrameKind::Integration,
        };
        let out = s.receive_step(StationId(2), Some(&f), Reception::Intact).unwrap();
        assert_eq!(out, ReceiveOutcome::Accepted);
        assert_eq!(s.m, v("1111"));
    }

    #[test]
    fn reintegration_lifecycle() {
        let source = station(0, "1110", 2, 0, Phase::MembershipPointReached);
        let mut s3 = station(3, "0000", 0, 0, Phase::NotSender);
        s3.location = Location::Failed;
        let rule = GateRule::Strict;

        assert_eq!(
            s3.reintegrate_step(IntegrationEvent::Start { source: Some(&source) }, rule),
            Ok(IntegrationAction::Started)
        );
        assert_eq!(s3.m, v("1110"));
        assert_eq!(s3.location, Location::IntegListen);
        assert_eq!(
            s3.reintegrate_step(IntegrationEvent::OwnSlot, rule),
            Ok(IntegrationAction::CountersReset)
        );
        for sender in 0..3 {
            s3.receive_step(StationId(sender), Some(&frame(sender, "1110")), Reception::Intact)
                .unwrap();
        }
        assert_eq!((s3.a, s3.f), (3, 0));
        match s3.reintegrate_step(IntegrationEvent::OwnSlot, rule).unwrap() {
            IntegrationAction::Emits(f) => {
                assert_eq!(f.vector_snapshot, v("1111"));
                assert_eq!(f.kind, FrameKind::Integration);
            }
            other => panic!("expected emission, got {other:?}"),
        }
        assert_eq!(s3.location, Location::ActiveAgree);
    }

    #[test]
    fn reintegration_needs_active_source() {
        let mut s3 = station(3, "0000", 0, 0, Phase::NotSender);
        s3.location = Location::Failed;
        assert_eq!(
            s3.reintegrate_step(IntegrationEvent::Start { source: None }, GateRule::Strict),
            Err(ProtocolError::NoIntegrationSource)
        );
        assert_eq!(s3.location, Location::Failed);
    }

    #[test]
    fn reintegration_gate_failure() {
        let mut s = station(3, "0110", 1, 2, Phase::NotSender);
        s.location = Location::IntegCounting;
        assert_eq!(
            s.reintegrate_step(IntegrationEvent::OwnSlot, GateRule::Strict),
            Ok(IntegrationAction::Fails)
        );
        assert_eq!(s.location, Location::Failed);
    }
}
