//! Property tests for invariants that must hold over the whole input space.

use std::f64::consts::PI;

use nalgebra::Vector2;
use proptest::prelude::*;
use umsn_core::channel::AcousticPacket;
use umsn_core::world::{step_agent, wrap_angle, AgentState, Control};

proptest! {
    #[test]
    fn wrap_angle_lands_in_half_open_interval(a in -1e6f64..1e6) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        // Same angle modulo a full turn.
        let diff = (a - w) / (2.0 * PI);
        prop_assert!((diff - diff.round()).abs() < 1e-6);
    }

    #[test]
    fn unicycle_split_steps_compose(
        x in -100.0f64..100.0,
        y in -100.0f64..100.0,
        heading in -3.1f64..3.1,
        surge in -2.0f64..2.0,
        yaw in -0.5f64..0.5,
        dt in 0.1f64..10.0,
        frac in 0.05f64..0.95,
    ) {
        let s = AgentState::new(Vector2::new(x, y), heading, 5.0, 1.0);
        let u = Control::new(surge, yaw);
        let whole = step_agent(&s, u, dt).unwrap();
        let split = dt * frac;
        let parts = step_agent(&step_agent(&s, u, split).unwrap(), u, dt - split).unwrap();
        prop_assert!((whole.position - parts.position).norm() < 1e-9);
        prop_assert!(wrap_angle(whole.heading - parts.heading).abs() < 1e-9);
    }

    #[test]
    fn packet_codec_round_trips_and_respects_budget(
        sender in 0u8..16,
        flags in 0u8..4,
        pose in prop::array::uniform3(-1000.0f32..1000.0),
        headings in prop::collection::vec(-0.5f32..0.5, 1..8),
        measurements in prop::collection::vec(prop::array::uniform4(-500.0f32..500.0), 0..3),
    ) {
        let p = AcousticPacket { sender, flags, pose, headings, measurements };
        let budget = p.payload_bytes();
        let bytes = p.encode(budget).unwrap();
        prop_assert_eq!(bytes.len(), budget + 1);
        prop_assert!(p.encode(budget - 1).is_err());
        let q = AcousticPacket::decode(&bytes, 16).unwrap();
        prop_assert_eq!(p, q);
    }
}
