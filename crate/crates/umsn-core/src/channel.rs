//! Acoustic link model, TDMA medium access, probabilistic packet delivery,
//! and the wire codec for intent/measurement packets.
//!
//! The link budget follows the passive sonar equation with Thorp's
//! empirical absorption formula. Delivery of a packet requires the
//! receiver SNR to clear the modem detection threshold and an independent
//! Bernoulli draw at the configured packet delivery ratio to succeed.
//!
//! # Wire format
//!
//! All multi-byte values are little-endian IEEE-754 single precision.
//!
//! ```text
//! header   1 byte   [ sender id : 4 | measurement count : 2 | flags : 2 ]
//! intent   (3+H)*4  x, y, heading, then H heading increments
//! meas * m 16 each  time, bearing, observer x, observer y
//! ```
//!
//! The byte budget of one slot is `floor(bitrate * slot_duration / 8)` and
//! applies to the intent and measurement blocks; the header byte is framing
//! overhead on top of it.

use alloc::vec::Vec;

use nalgebra::Vector2;
#[allow(unused_imports)] // f64 math methods; unused when tests link std
use num_traits::Float;
use rand::Rng;

use crate::{AgentId, MAX_AGENT_ID};

/// Size in bytes of one encoded measurement block.
pub const MEASUREMENT_BLOCK_BYTES: usize = 16;

/// Maximum number of measurement blocks in one packet.
pub const MAX_MEASUREMENTS_PER_PACKET: usize = 2;

/// Errors from the channel model and the wire codec.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    /// Frequency must be positive (kHz).
    NonPositiveFrequency,
    /// Distance must be positive (meters).
    NonPositiveDistance,
    /// Sender and receiver occupy the same position.
    CoincidentPositions,
    /// Encoded blocks would exceed the slot byte budget.
    OversizePacket {
        /// Bytes the blocks would occupy.
        required: usize,
        /// Bytes available in one slot.
        budget: usize,
    },
    /// More measurement blocks than the packet layout allows.
    TooManyMeasurements(usize),
    /// Sender id does not fit the 4-bit header field or exceeds the team.
    InvalidSender(AgentId),
    /// Byte stream length does not match the header.
    MalformedLength {
        /// Actual length received.
        got: usize,
    },
    /// A decoded real was NaN or infinite.
    NonFiniteField,
    /// Measurement count field holds the reserved value 3.
    InvalidMeasurementCount,
}

impl core::fmt::Display for ChannelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChannelError::NonPositiveFrequency => write!(f, "frequency must be positive"),
            ChannelError::NonPositiveDistance => write!(f, "distance must be positive"),
            ChannelError::CoincidentPositions => write!(f, "coincident transceiver positions"),
            ChannelError::OversizePacket { required, budget } => {
                write!(f, "packet needs {required} bytes, budget is {budget}")
            }
            ChannelError::TooManyMeasurements(n) => {
                write!(f, "{n} measurement blocks exceed the layout maximum")
            }
            ChannelError::InvalidSender(id) => write!(f, "invalid sender id {id}"),
            ChannelError::MalformedLength { got } => {
                write!(
                    f,
                    "byte stream of length {got} is inconsistent with its header"
                )
            }
            ChannelError::NonFiniteField => write!(f, "decoded field is not finite"),
            ChannelError::InvalidMeasurementCount => {
                write!(f, "measurement count field holds a reserved value")
            }
        }
    }
}

impl core::error::Error for ChannelError {}

/// Acoustic modem parameters of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModemConfig {
    /// Source level, dB re 1 uPa.
    pub source_level_db: f64,
    /// Ambient noise level, dB.
    pub noise_level_db: f64,
    /// Directivity index, dB (0 for an omnidirectional modem).
    pub directivity_db: f64,
    /// Carrier center frequency, kHz.
    pub frequency_khz: f64,
    /// Detection threshold, dB: minimum SNR for reception.
    pub detection_threshold_db: f64,
    /// Channel bitrate, bits per second.
    pub bitrate_bps: u32,
    /// Ideal SNR used to normalize Laplacian link gains, dB.
    pub ideal_snr_db: f64,
}

impl ModemConfig {
    /// Payload byte budget of one slot of the given duration.
    pub fn payload_budget(&self, slot_duration: f64) -> usize {
        (self.bitrate_bps as f64 * slot_duration / 8.0).floor() as usize
    }
}

/// Thorp's empirical absorption coefficient, dB/km, for `f` in kHz.
pub fn thorp_absorption(frequency_khz: f64) -> Result<f64, ChannelError> {
    if !(frequency_khz > 0.0) {
        return Err(ChannelError::NonPositiveFrequency);
    }
    let f2 = frequency_khz * frequency_khz;
    Ok(0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003)
}

/// Transmission loss in dB over `distance` meters at `f` kHz: spherical
/// spreading plus absorption.
pub fn transmission_loss(distance_m: f64, frequency_khz: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::NonPositiveDistance);
    }
    let alpha = thorp_absorption(frequency_khz)?;
    Ok(20.0 * distance_m.log10() + distance_m * alpha * 1e-3)
}

/// Received SNR in dB at `distance` meters.
pub fn snr(cfg: &ModemConfig, distance_m: f64) -> Result<f64, ChannelError> {
    let tl = transmission_loss(distance_m, cfg.frequency_khz)?;
    Ok(cfg.source_level_db - tl - cfg.noise_level_db + cfg.directivity_db)
}

/// TDMA schedule: one slot per agent, cycling in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmaConfig {
    /// Slot duration, seconds.
    pub slot_duration: f64,
    /// Agents in transmission order; its length is the team size.
    pub slot_order: Vec<AgentId>,
}

impl TdmaConfig {
    /// Schedule with slots in ascending agent-id order.
    pub fn ascending(agents: usize, slot_duration: f64) -> Self {
        Self {
            slot_duration,
            slot_order: (0..agents as AgentId).collect(),
        }
    }

    /// Number of slots in one round (= team size).
    pub fn slots(&self) -> usize {
        self.slot_order.len()
    }

    /// Duration of a full round of transmissions (the synchronization
    /// overhead): `n * slot_duration`.
    pub fn round_duration(&self) -> f64 {
        self.slots() as f64 * self.slot_duration
    }

    /// Index of the slot containing time `t`.
    pub fn slot_index(&self, t: f64) -> u64 {
        (t / self.slot_duration).floor() as u64
    }

    /// The agent allowed to transmit during the slot containing `t >= 0`.
    pub fn slot_owner(&self, t: f64) -> AgentId {
        let k = self.slot_index(t) as usize % self.slots();
        self.slot_order[k]
    }
}

/// Decoded contents of one acoustic broadcast: the sender's pose and
/// residual heading plan, plus up to two relayed bearing measurements.
///
/// Fields are stored in the single precision that travels on the wire, so
/// `encode` followed by `decode` reproduces the packet exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticPacket {
    /// Transmitting agent.
    pub sender: AgentId,
    /// Spare header bits, round-tripped verbatim.
    pub flags: u8,
    /// Sender pose at transmission time: x, y, heading.
    pub pose: [f32; 3],
    /// Planned heading increments over the horizon.
    pub headings: Vec<f32>,
    /// Relayed measurements: time, bearing, observer x, observer y.
    pub measurements: Vec<[f32; 4]>,
}

impl AcousticPacket {
    /// Bytes occupied by the intent block for a horizon of `h` steps.
    pub fn intent_block_bytes(h: usize) -> usize {
        (3 + h) * 4
    }

    /// Bytes the intent and measurement blocks occupy (header excluded).
    pub fn payload_bytes(&self) -> usize {
        Self::intent_block_bytes(self.headings.len())
            + self.measurements.len() * MEASUREMENT_BLOCK_BYTES
    }

    /// Encode to the wire layout, enforcing the slot byte `budget` on the
    /// intent and measurement blocks.
    pub fn encode(&self, budget: usize) -> Result<Vec<u8>, ChannelError> {
        if self.sender > MAX_AGENT_ID {
            return Err(ChannelError::InvalidSender(self.sender));
        }
        if self.measurements.len() > MAX_MEASUREMENTS_PER_PACKET {
            return Err(ChannelError::TooManyMeasurements(self.measurements.len()));
        }
        let required = self.payload_bytes();
        if required > budget {
            return Err(ChannelError::OversizePacket { required, budget });
        }

        let mut out = Vec::with_capacity(1 + required);
        out.push((self.sender << 4) | ((self.measurements.len() as u8) << 2) | (self.flags & 0b11));
        for v in self.pose {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.headings {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for block in &self.measurements {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decode a wire frame. The horizon length is inferred from the frame
    /// length; `team_size` bounds the acceptable sender ids.
    pub fn decode(bytes: &[u8], team_size: usize) -> Result<Self, ChannelError> {
        if bytes.len() < 1 + Self::intent_block_bytes(0) {
            return Err(ChannelError::MalformedLength { got: bytes.len() });
        }
        let header = bytes[0];
        let sender = header >> 4;
        let count = ((header >> 2) & 0b11) as usize;
        let flags = header & 0b11;
        if count > MAX_MEASUREMENTS_PER_PACKET {
            return Err(ChannelError::InvalidMeasurementCount);
        }
        if sender as usize >= team_size {
            return Err(ChannelError::InvalidSender(sender));
        }

        let body = bytes.len() - 1;
        let meas_bytes = count * MEASUREMENT_BLOCK_BYTES;
        if body < Self::intent_block_bytes(0) + meas_bytes {
            return Err(ChannelError::MalformedLength { got: bytes.len() });
        }
        let intent_bytes = body - meas_bytes;
        if intent_bytes % 4 != 0 {
            return Err(ChannelError::MalformedLength { got: bytes.len() });
        }
        let horizon = intent_bytes / 4 - 3;

        let mut reals = bytes[1..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let mut next = || -> Result<f32, ChannelError> {
            let v = reals.next().expect("length checked above");
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ChannelError::NonFiniteField)
            }
        };

        let pose = [next()?, next()?, next()?];
        let mut headings = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            headings.push(next()?);
        }
        let mut measurements = Vec::with_capacity(count);
        for _ in 0..count {
            measurements.push([next()?, next()?, next()?, next()?]);
        }

        Ok(Self {
            sender,
            flags,
            pose,
            headings,
            measurements,
        })
    }
}

/// Attempt delivery of `packet` from `sender_pos` to `receiver_pos`.
///
/// The packet is rejected outright if its blocks exceed the slot budget.
/// Otherwise it is delivered iff the receiver SNR clears the detection
/// threshold and an independent Bernoulli draw at `pdr` succeeds.
/// Propagation and serialization delays are folded into the slot timing,
/// so a delivered packet becomes available at the start of the next slot.
pub fn transmit<R: Rng + ?Sized>(
    packet: &AcousticPacket,
    sender_pos: Vector2<f64>,
    receiver_pos: Vector2<f64>,
    cfg: &ModemConfig,
    slot_duration: f64,
    pdr: f64,
    rng: &mut R,
) -> Result<bool, ChannelError> {
    let budget = cfg.payload_budget(slot_duration);
    let required = packet.payload_bytes();
    if required > budget {
        return Err(ChannelError::OversizePacket { required, budget });
    }
    let distance = (receiver_pos - sender_pos).norm();
    if distance == 0.0 {
        return Err(ChannelError::CoincidentPositions);
    }
    let rho = snr(cfg, distance)?;
    let lucky = rng.gen_bool(pdr);
    Ok(rho >= cfg.detection_threshold_db && lucky)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn modem() -> ModemConfig {
        ModemConfig {
            source_level_db: 186.0,
            noise_level_db: 20.0,
            directivity_db: 0.0,
            frequency_khz: 25.0,
            detection_threshold_db: 20.0,
            bitrate_bps: 120,
            ideal_snr_db: 166.0,
        }
    }

    fn packet(h: usize, m: usize) -> AcousticPacket {
        AcousticPacket {
            sender: 1,
            flags: 0,
            pose: [10.0, -3.5, 0.25],
            headings: (0..h).map(|k| 0.01 * k as f32).collect(),
            measurements: (0..m)
                .map(|k| [k as f32, 0.5, 1.0 + k as f32, -2.0])
                .collect(),
        }
    }

    #[test]
    fn thorp_at_low_frequency_tends_to_constant() {
        let a = thorp_absorption(1e-6).unwrap();
        assert!((a - 0.003).abs() < 1e-9);
    }

    #[test]
    fn thorp_reference_values() {
        assert!((thorp_absorption(10.0).unwrap() - 1.18703).abs() < 1e-4);
        assert!((thorp_absorption(25.0).unwrap() - 6.10480).abs() < 1e-4);
    }

    #[test]
    fn thorp_rejects_nonpositive() {
        assert!(thorp_absorption(0.0).is_err());
        assert!(thorp_absorption(-3.0).is_err());
    }

    #[test]
    fn thorp_strictly_increasing() {
        let mut prev = thorp_absorption(0.01).unwrap();
        for k in 1..=1000 {
            let f = 0.1 * k as f64;
            let a = thorp_absorption(f).unwrap();
            assert!(a > prev, "absorption not increasing at {f} kHz");
            prev = a;
        }
    }

    #[test]
    fn transmission_loss_reference_values() {
        let alpha = thorp_absorption(25.0).unwrap();
        assert_relative_eq!(
            transmission_loss(1.0, 25.0).unwrap(),
            alpha * 1e-3,
            epsilon = 1e-12
        );
        assert!((transmission_loss(1000.0, 25.0).unwrap() - 66.105).abs() < 0.01);
        assert!((transmission_loss(100.0, 25.0).unwrap() - 40.610).abs() < 0.01);
    }

    #[test]
    fn transmission_loss_monotone_snr_decreasing() {
        let cfg = modem();
        let mut prev_tl = transmission_loss(1.0, 25.0).unwrap();
        let mut prev_snr = snr(&cfg, 1.0).unwrap();
        for k in 1..200 {
            let d = 1.0 + 25.0 * k as f64;
            let tl = transmission_loss(d, 25.0).unwrap();
            let rho = snr(&cfg, d).unwrap();
            assert!(tl > prev_tl);
            assert!(rho < prev_snr);
            prev_tl = tl;
            prev_snr = rho;
        }
    }

    #[test]
    fn snr_reference_values() {
        let mut cfg = modem();
        assert!((snr(&cfg, 1000.0).unwrap() - 99.895).abs() < 0.01);
        cfg.noise_level_db = 40.0;
        assert!((snr(&cfg, 1000.0).unwrap() - 79.895).abs() < 0.01);
    }

    #[test]
    fn snr_zero_crossing_is_definitional() {
        // Choose SL = NL + TL(d) so the SNR at d is exactly zero.
        let d = 735.0;
        let tl = transmission_loss(d, 25.0).unwrap();
        let cfg = ModemConfig {
            source_level_db: 20.0 + tl,
            ..modem()
        };
        assert_relative_eq!(snr(&cfg, d).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn slot_owner_examples() {
        let tdma = TdmaConfig::ascending(3, 2.0);
        assert_eq!(tdma.slot_owner(0.0), 0);
        assert_eq!(tdma.slot_owner(7.0), 0); // slot index 3, 3 mod 3 = 0
        assert_eq!(tdma.slot_owner(2.0), 1);
        assert_relative_eq!(tdma.round_duration(), 6.0);
    }

    #[test]
    fn each_agent_owns_one_slot_per_round() {
        let tdma = TdmaConfig {
            slot_duration: 1.5,
            slot_order: alloc::vec![2, 0, 3, 1],
        };
        for round in 0..10 {
            let base = round as f64 * tdma.round_duration();
            let mut seen = alloc::vec![0u32; 4];
            for k in 0..4 {
                let owner = tdma.slot_owner(base + (k as f64 + 0.5) * tdma.slot_duration);
                seen[owner as usize] += 1;
            }
            assert_eq!(seen, alloc::vec![1, 1, 1, 1]);
        }
    }

    #[test]
    fn intent_block_is_28_bytes_for_h4() {
        assert_eq!(AcousticPacket::intent_block_bytes(4), 28);
        let p = packet(4, 0);
        assert_eq!(p.payload_bytes(), 28);
    }

    #[test]
    fn two_measurements_exactly_fill_the_budget() {
        let cfg = modem();
        let budget = cfg.payload_budget(4.0);
        assert_eq!(budget, 60);
        let p = packet(4, 2);
        assert_eq!(p.payload_bytes(), 60);
        assert!(p.encode(budget).is_ok());
        let p3 = AcousticPacket {
            measurements: (0..3).map(|k| [k as f32, 0.0, 0.0, 0.0]).collect(),
            ..packet(4, 0)
        };
        assert_eq!(p3.encode(budget), Err(ChannelError::TooManyMeasurements(3)));
    }

    #[test]
    fn oversize_packet_rejected_at_send() {
        let p = packet(4, 2); // 60 payload bytes
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = transmit(
            &p,
            Vector2::zeros(),
            Vector2::new(100.0, 0.0),
            &modem(),
            2.0, // budget 30 bytes
            1.0,
            &mut rng,
        );
        assert_eq!(
            err,
            Err(ChannelError::OversizePacket {
                required: 60,
                budget: 30
            })
        );
    }

    #[test]
    fn below_threshold_never_delivers() {
        let cfg = modem();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // 186 - TL - 20 < 20 requires TL > 146: beyond 200 km.
        let far = Vector2::new(3.0e5, 0.0);
        for _ in 0..100 {
            let ok = transmit(&packet(4, 0), Vector2::zeros(), far, &cfg, 4.0, 1.0, &mut rng);
            assert_eq!(ok, Ok(false));
        }
    }

    #[test]
    fn perfect_pdr_always_delivers_above_threshold() {
        let cfg = modem();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let near = Vector2::new(500.0, 0.0);
        for _ in 0..100 {
            let ok = transmit(&packet(4, 1), Vector2::zeros(), near, &cfg, 4.0, 1.0, &mut rng);
            assert_eq!(ok, Ok(true));
        }
    }

    #[test]
    fn empirical_delivery_rate_matches_pdr() {
        let cfg = modem();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let near = Vector2::new(500.0, 0.0);
        let n = 100_000;
        let mut delivered = 0u32;
        for _ in 0..n {
            if transmit(&packet(4, 0), Vector2::zeros(), near, &cfg, 4.0, 0.85, &mut rng).unwrap() {
                delivered += 1;
            }
        }
        let rate = delivered as f64 / n as f64;
        assert!((rate - 0.85).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn deliveries_are_independent_across_transmissions() {
        // Chi-square independence test on lag-1 pairs at the 1% level.
        let cfg = modem();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let near = Vector2::new(500.0, 0.0);
        let n = 50_000;
        let mut seq = Vec::with_capacity(n);
        for _ in 0..n {
            seq.push(
                transmit(&packet(4, 0), Vector2::zeros(), near, &cfg, 4.0, 0.85, &mut rng)
                    .unwrap(),
            );
        }
        let mut counts = [[0.0f64; 2]; 2];
        for w in seq.windows(2) {
            counts[w[0] as usize][w[1] as usize] += 1.0;
        }
        let total: f64 = counts.iter().flatten().sum();
        let row = [counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]];
        let col = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expected = row[i] * col[j] / total;
                chi2 += (counts[i][j] - expected).powi(2) / expected;
            }
        }
        // 1 degree of freedom, alpha = 0.01.
        assert!(chi2 < 6.635, "chi2 {chi2}");
    }

    #[test]
    fn codec_round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..1000 {
            let h = rng.gen_range(1..=6);
            let m = rng.gen_range(0..=2);
            let p = AcousticPacket {
                sender: rng.gen_range(0..10),
                flags: rng.gen_range(0..4),
                pose: [
                    rng.gen::<f32>() * 100.0,
                    rng.gen::<f32>() * 100.0,
                    rng.gen(),
                ],
                headings: (0..h).map(|_| rng.gen::<f32>() - 0.5).collect(),
                measurements: (0..m)
                    .map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()])
                    .collect(),
            };
            let bytes = p.encode(1000).unwrap();
            assert_eq!(bytes.len(), 1 + p.payload_bytes());
            let q = AcousticPacket::decode(&bytes, 10).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn decode_rejects_malformed_input() {
        let p = packet(4, 1);
        let bytes = p.encode(60).unwrap();

        // Truncated stream.
        assert!(matches!(
            AcousticPacket::decode(&bytes[..bytes.len() - 3], 4),
            Err(ChannelError::MalformedLength { .. })
        ));

        // Sender beyond the team.
        assert_eq!(
            AcousticPacket::decode(&bytes, 1),
            Err(ChannelError::InvalidSender(1))
        );

        // Reserved measurement count.
        let mut bad = bytes.clone();
        bad[0] = (1 << 4) | (3 << 2);
        assert_eq!(
            AcousticPacket::decode(&bad, 4),
            Err(ChannelError::InvalidMeasurementCount)
        );

        // Non-finite real in the pose.
        let mut nan = bytes.clone();
        nan[1..5].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(
            AcousticPacket::decode(&nan, 4),
            Err(ChannelError::NonFiniteField)
        );
    }

    #[test]
    fn header_alone_determines_block_structure() {
        let p = packet(3, 2);
        let bytes = p.encode(100).unwrap();
        let q = AcousticPacket::decode(&bytes, 4).unwrap();
        assert_eq!(q.headings.len(), 3);
        assert_eq!(q.measurements.len(), 2);
        assert_eq!(q.flags, 0);
    }
}
