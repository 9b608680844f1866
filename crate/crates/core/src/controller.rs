//! Per-user QoE rate controller.
//!
//! Once per epoch each user compares the packet-loss rate it saw during that
//! epoch with its loss threshold:
//!
//! * loss above threshold and rate above the minimum subjective rate: back
//!   off multiplicatively, never below the minimum;
//! * loss at or below threshold and rate below the minimum: step up
//!   additively, never above the minimum or the initial rate;
//! * anything else holds the current rate.

use crate::kernel::SimTime;
use crate::traffic::UserProfile;

pub const DEFAULT_DECREASE_FACTOR: f64 = 0.9;
/// Additive step as a fraction of the user's minimum subjective rate.
pub const DEFAULT_INCREASE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochObservation {
    pub sent: u64,
    pub lost: u64,
}

impl EpochObservation {
    pub fn new(sent: u64, lost: u64) -> Self {
        assert!(lost <= sent, "lost {lost} > sent {sent}");
        Self { sent, lost }
    }

    /// `lost / sent`, or 0 for an idle epoch.
    pub fn loss_rate(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.lost as f64 / self.sent as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub flow_id: u32,
    pub current_rate: f64,
    pub min_subjective_rate: f64,
    pub loss_threshold: f64,
    pub epoch_sent: u64,
    pub epoch_lost: u64,
    pub decrease_factor: f64,
    pub increase_step: f64,
    pub rate_ceiling: f64,
}

impl ControllerState {
    pub fn new(profile: &UserProfile, decrease_factor: f64, increase_fraction: f64) -> Self {
        assert!(
            decrease_factor > 0.0 && decrease_factor < 1.0,
            "decrease factor must lie in (0, 1)"
        );
        Self {
            flow_id: profile.user_id,
            current_rate: profile.initial_rate,
            min_subjective_rate: profile.min_subjective_rate,
            loss_threshold: profile.loss_threshold,
            epoch_sent: 0,
            epoch_lost: 0,
            decrease_factor,
            increase_step: increase_fraction * profile.min_subjective_rate,
            rate_ceiling: profile.initial_rate,
        }
    }
}

/// Rate to install after observing `obs`. Pure.
pub fn decide(state: &ControllerState, obs: &EpochObservation) -> f64 {
    let rate = state.current_rate;
    let min = state.min_subjective_rate;
    if obs.loss_rate() > state.loss_threshold {
        if rate > min {
            (rate * state.decrease_factor).max(min)
        } else {
            rate
        }
    } else if rate < min {
        (rate + state.increase_step)
            .min(min)
            .min(state.rate_ceiling)
    } else {
        rate
    }
}

/// Counters one flow accumulated since the previous epoch boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpochCounters {
    pub sent: u64,
    pub lost: u64,
}

#[derive(Debug, Clone)]
pub struct QoeController {
    states: Vec<ControllerState>,
    epochs: u64,
    last_decision: Option<SimTime>,
}

impl QoeController {
    pub fn new(profiles: &[UserProfile], decrease_factor: f64, increase_fraction: f64) -> Self {
        Self {
            states: profiles
                .iter()
                .map(|p| ControllerState::new(p, decrease_factor, increase_fraction))
                .collect(),
            epochs: 0,
            last_decision: None,
        }
    }

    pub fn states(&self) -> &[ControllerState] {
        &self.states
    }

    pub fn epochs(&self) -> u64 {
        self.epochs
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.current_rate)
    }

    /// Applies `decide` to every flow using the counters gathered over the
    /// epoch ending at `clock`, then clears them. Returns the new rates in
    /// flow order.
    pub fn on_epoch(&mut self, clock: SimTime, counters: &[EpochCounters]) -> Vec<f64> {
        assert_eq!(counters.len(), self.states.len(), "one counter per flow");
        assert!(
            self.last_decision.is_none_or(|t| clock > t),
            "epoch boundaries must advance"
        );
        self.last_decision = Some(clock);
        self.epochs += 1;
        self.states
            .iter_mut()
            .zip(counters)
            .map(|(state, c)| {
                state.epoch_sent += c.sent;
                state.epoch_lost += c.lost;
                let obs = EpochObservation::new(state.epoch_sent, state.epoch_lost);
                state.current_rate = decide(state, &obs);
                state.epoch_sent = 0;
                state.epoch_lost = 0;
                state.current_rate
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(rate: f64, min: f64, threshold: f64) -> ControllerState {
        ControllerState {
            flow_id: 1,
            current_rate: rate,
            min_subjective_rate: min,
            loss_threshold: threshold,
            epoch_sent: 0,
            epoch_lost: 0,
            decrease_factor: 0.9,
            increase_step: 0.05 * min,
            rate_ceiling: rate.max(min),
        }
    }

    fn obs(loss: f64) -> EpochObservation {
        EpochObservation::new(1000, (loss * 1000.0).round() as u64)
    }

    #[test]
    fn decrease_above_threshold() {
        let s = state(200_000.0, 150_000.0, 0.5);
        assert_eq!(decide(&s, &obs(0.6)), 180_000.0);
    }

    #[test]
    fn hold_at_minimum_under_loss() {
        let s = state(150_000.0, 150_000.0, 0.5);
        assert_eq!(decide(&s, &obs(0.9)), 150_000.0);
    }

    #[test]
    fn increase_below_minimum() {
        let mut s = state(140_000.0, 150_000.0, 0.5);
        s.increase_step = 7_500.0;
        assert_eq!(decide(&s, &obs(0.1)), 147_500.0);
    }

    #[test]
    fn loss_equal_to_threshold_is_not_greater() {
        let s = state(133_333.0, 120_000.0, 0.1);
        assert_eq!(decide(&s, &obs(0.1)), 133_333.0);
    }

    #[test]
    fn idle_epoch_reads_as_no_loss() {
        let o = EpochObservation::new(0, 0);
        assert_eq!(o.loss_rate(), 0.0);
        let s = state(100_000.0, 150_000.0, 0.0);
        assert_eq!(decide(&s, &o), 107_500.0);
    }

    #[test]
    fn decrease_clamps_at_minimum() {
        let s = state(133_333.0, 120_000.0, 0.1);
        assert_eq!(decide(&s, &obs(0.5)), 120_000.0);
    }

    #[test]
    fn on_epoch_installs_and_resets() {
        let profiles = [
            UserProfile {
                user_id: 1,
                packet_size: 200,
                initial_rate: 200_000.0,
                min_subjective_rate: 150_000.0,
                loss_threshold: 0.1,
            },
            UserProfile {
                user_id: 2,
                packet_size: 200,
                initial_rate: 200_000.0,
                min_subjective_rate: 150_000.0,
                loss_threshold: 0.1,
            },
        ];
        let mut c = QoeController::new(&profiles, 0.9, 0.05);
        let rates = c.on_epoch(
            SimTime::from_secs(1),
            &[
                EpochCounters {
                    sent: 100,
                    lost: 50,
                },
                EpochCounters { sent: 100, lost: 0 },
            ],
        );
        assert_eq!(rates, vec![180_000.0, 200_000.0]);
        assert!(c
            .states()
            .iter()
            .all(|s| s.epoch_sent == 0 && s.epoch_lost == 0));
        assert_eq!(c.epochs(), 1);
    }

    proptest! {
        #[test]
        fn sustained_loss_descends_monotonically(
            initial in 1_000.0f64..1e7,
            ratio in 0.05f64..1.0,
            factor in 0.5f64..0.99,
        ) {
            let min = initial * ratio;
            let mut s = state(initial, min, 0.1);
            s.decrease_factor = factor;
            let bound = ((min / initial).ln() / factor.ln()).ceil().max(0.0) as usize;
            let mut prev = s.current_rate;
            for _ in 0..bound {
                s.current_rate = decide(&s, &obs(1.0));
                prop_assert!(s.current_rate <= prev);
                prop_assert!(s.current_rate >= min);
                prev = s.current_rate;
            }
            prop_assert_eq!(s.current_rate, min);
        }

        #[test]
        fn rate_stays_within_bounds(
            initial in 1_000.0f64..1e6,
            min in 1_000.0f64..1e6,
            losses in prop::collection::vec(0.0f64..=1.0, 1..60),
            threshold in 0.0f64..=1.0,
        ) {
            let mut s = state(initial, min, threshold);
            s.rate_ceiling = initial;
            let lo = min.min(initial);
            for l in losses {
                s.current_rate = decide(&s, &obs(l));
                prop_assert!(s.current_rate >= lo && s.current_rate <= s.rate_ceiling);
            }
        }

        #[test]
        fn raising_threshold_never_creates_a_decrease(
            rate in 1_000.0f64..1e6,
            min in 1_000.0f64..1e6,
            loss in 0.0f64..=1.0,
            t1 in 0.0f64..=1.0,
            dt in 0.0f64..=1.0,
        ) {
            let t2 = (t1 + dt).min(1.0);
            let o = obs(loss);
            let lo = decide(&state(rate, min, t1), &o);
            let hi = decide(&state(rate, min, t2), &o);
            if lo >= rate {
                prop_assert!(hi >= rate);
            }
        }
    }
}
