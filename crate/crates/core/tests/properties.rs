use abrsim::engine::Engine;
use abrsim::erica::{EricaParams, ZAveraging};
use abrsim::tcp::TcpReceiver;
use abrsim::vbr::{vbr_active, VbrParams, VbrSchedule};
use abrsim::{parse_scenario, BufferSize, ScenarioConfig, SimTime};
use proptest::prelude::*;

proptest! {
    #[test]
    fn engine_pops_in_time_then_insertion_order(times in prop::collection::vec(0u64..1_000, 1..200)) {
        let mut e = Engine::new();
        for (i, &t) in times.iter().enumerate() {
            e.schedule(SimTime(t), i);
        }
        let mut popped = Vec::new();
        while let Some((t, i)) = e.pop_until(SimTime::MAX) {
            popped.push((t.as_nanos(), i));
        }
        let mut expected: Vec<_> = times.iter().copied().zip(0..).collect();
        expected.sort();
        prop_assert_eq!(popped, expected);
    }

    #[test]
    fn cancelled_events_are_skipped(n in 1usize..100, mask in prop::collection::vec(any::<bool>(), 100)) {
        let mut e = Engine::new();
        let handles: Vec<_> = (0..n).map(|i| e.schedule(SimTime(i as u64 % 7), i)).collect();
        for (h, &c) in handles.iter().zip(&mask) {
            if c {
                e.cancel(*h);
            }
        }
        let mut seen = Vec::new();
        e.run_until(SimTime::MAX, |_, _, i| seen.push(i));
        seen.sort();
        let kept: Vec<_> = (0..n).filter(|&i| !mask[i]).collect();
        prop_assert_eq!(seen, kept);
    }

    #[test]
    fn receiver_delivers_full_prefix_in_any_order(order in Just((0..40u64).collect::<Vec<_>>()).prop_shuffle()) {
        let mut r = TcpReceiver::new();
        let mut last = 0;
        for &k in &order {
            let ack = r.on_segment_arrival(k * 512, 512);
            prop_assert!(ack >= last);
            last = ack;
        }
        prop_assert_eq!(r.delivered(), 40 * 512);
        prop_assert_eq!(r.held_ranges(), 0);
    }

    #[test]
    fn vbr_counting_matches_cell_times(d in 0.05f64..=1.0, p_ms in 1u64..200, t_us in 0u64..2_000_000) {
        let sched = VbrSchedule::new(VbrParams {
            duty_cycle: d,
            period: SimTime::from_millis(p_ms),
            ..VbrParams::default()
        });
        let t = SimTime::from_micros(t_us);
        let n = sched.generated_through(t);
        if n > 0 {
            prop_assert!(sched.cell_time(n - 1) <= t);
            prop_assert!(vbr_active(sched.cell_time(n - 1), sched.params()));
        }
        prop_assert!(sched.cell_time(n) > t);
        prop_assert!(sched.next_cell_time(t) >= t);
    }

    #[test]
    fn scenario_text_round_trips(
        n in 1usize..64,
        km in 1u32..2_000,
        buf in prop::option::of(1usize..200_000),
        vbr in prop::option::of((0.05f64..=1.0, 1u64..100)),
        plus in any::<bool>(),
        z in 0u8..3,
    ) {
        let mut erica = if plus { EricaParams::erica_plus() } else { EricaParams::erica() };
        erica.z_averaging = [ZAveraging::None, ZAveraging::Scheme1, ZAveraging::Scheme2][z as usize];
        let cfg = ScenarioConfig {
            n_sources: n,
            link_length_km: km as f64,
            source_buffer: buf.map_or(BufferSize::Infinite, BufferSize::Cells),
            vbr: vbr.map(|(d, p)| VbrParams { duty_cycle: d, period: SimTime::from_millis(p), ..VbrParams::default() }),
            erica,
            ..ScenarioConfig::default()
        };
        let back = parse_scenario(&cfg.to_scenario_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
