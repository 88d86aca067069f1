//! Sensor-to-actuator latency model: desired-position commands are released
//! to the PD loop a fixed number of physics ticks after they are issued.

use nalgebra::DVector;
use std::collections::VecDeque;

/// Ring buffer of pending `q_des` vectors with release ticks. Actions apply
/// in send order; an action sent at tick `t` with delay `d` first affects
/// torque at the first physics tick ≥ `t + d`.
#[derive(Debug, Clone)]
pub struct DelayLine {
    pending: VecDeque<(u64, DVector<f64>)>,
    current: DVector<f64>,
}

impl DelayLine {
    pub fn new(initial: DVector<f64>) -> DelayLine {
        DelayLine {
            pending: VecDeque::new(),
            current: initial,
        }
    }

    /// Enqueues a command issued at `tick` for release at `tick + delay_ticks`.
    pub fn push(&mut self, tick: u64, delay_ticks: u64, q_des: DVector<f64>) {
        self.pending.push_back((tick + delay_ticks, q_des));
    }

    /// Returns the command in effect at `tick`, consuming any due entries.
    pub fn active(&mut self, tick: u64) -> &DVector<f64> {
        while let Some((release, _)) = self.pending.front() {
            if *release <= tick {
                self.current = self.pending.pop_front().unwrap().1;
            } else {
                break;
            }
        }
        &self.current
    }

    pub fn reset(&mut self, initial: DVector<f64>) {
        self.pending.clear();
        self.current = initial;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn zero_delay_applies_immediately() {
        let mut line = DelayLine::new(v(0.0));
        line.push(5, 0, v(1.0));
        assert_eq!(line.active(5)[0], 1.0);
    }

    #[test]
    fn delayed_action_waits_for_release_tick() {
        let mut line = DelayLine::new(v(0.0));
        line.push(0, 10, v(1.0));
        for t in 0..10 {
            assert_eq!(line.active(t)[0], 0.0, "tick {t}");
        }
        assert_eq!(line.active(10)[0], 1.0);
    }

    #[test]
    fn schedule_matches_hand_trace_for_every_delay() {
        // control period 20 ticks, physics tick 1 ms: exhaustive over 0..=20
        for delay in 0..=20u64 {
            let mut line = DelayLine::new(v(-1.0));
            let mut expected = vec![-1.0; 100];
            for step in 0..5u64 {
                let send = step * 20;
                line.push(send, delay, v(step as f64));
                for t in (send + delay) as usize..100 {
                    expected[t] = step as f64;
                }
            }
            for t in 0..100u64 {
                assert_eq!(
                    line.active(t)[0],
                    expected[t as usize],
                    "delay {delay}, tick {t}"
                );
            }
        }
    }

    #[test]
    fn actions_apply_in_send_order() {
        let mut line = DelayLine::new(v(0.0));
        line.push(0, 3, v(1.0));
        line.push(1, 3, v(2.0));
        // skipping ticks still lands on the newest due command
        assert_eq!(line.active(4)[0], 2.0);
    }

    #[test]
    fn reset_clears_pending() {
        let mut line = DelayLine::new(v(0.0));
        line.push(0, 1, v(5.0));
        line.reset(v(9.0));
        assert_eq!(line.active(100)[0], 9.0);
    }
}
