use crate::sim::SimTime;

use super::MacError;

/// Which probing mechanism produced a transmission-time sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    /// Timed from an actual data frame.
    Passive,
    /// Derived from dedicated probe broadcasts.
    Active,
}

/// Smoothed transmission time W(i, j) of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkEstimate {
    pub w_ewma: SimTime,
    pub last_probe: SimTime,
    pub last_passive: Option<SimTime>,
    pub sample_count: u32,
}

impl LinkEstimate {
    pub fn is_known(&self) -> bool {
        self.sample_count > 0
    }

    pub fn w(&self) -> Option<SimTime> {
        self.is_known().then_some(self.w_ewma)
    }
}

/// One transmission-time sample: from the later of "frame entered the MAC
/// queue" (`t1`) and "previous frame left the interface" (`t2`) until the
/// acknowledgement arrives (`t3`).
pub fn measure_w(t1_enqueue: SimTime, t2_prev_exit: SimTime, t3_ack: SimTime) -> Result<SimTime, MacError> {
    let start = t1_enqueue.max(t2_prev_exit);
    t3_ack.checked_sub(start).ok_or(MacError::NegativeSample { t3: t3_ack, start })
}

/// Folds a sample into the estimate with weight `beta`; the first sample
/// initialises it. Active and passive samples are weighted alike.
pub fn update_estimate(
    est: LinkEstimate,
    sample: SimTime,
    source: SampleSource,
    beta: f64,
    now: SimTime,
) -> LinkEstimate {
    let w_ewma = if est.sample_count == 0 {
        sample
    } else {
        let w = (1.0 - beta) * est.w_ewma.as_micros() as f64 + beta * sample.as_micros() as f64;
        SimTime::from_micros(w.round() as u64)
    };
    LinkEstimate {
        w_ewma,
        last_probe: if source == SampleSource::Active { now } else { est.last_probe },
        last_passive: if source == SampleSource::Passive { Some(now) } else { est.last_passive },
        sample_count: est.sample_count.saturating_add(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn us(x: u64) -> SimTime {
        SimTime::from_micros(x)
    }

    #[test]
    fn formula_instances() {
        assert_eq!(measure_w(us(10), us(5), us(110)), Ok(us(100)));
        assert_eq!(measure_w(us(0), us(0), us(85)), Ok(us(85)));
        // previous frame still draining when this one was queued
        assert_eq!(measure_w(us(10), us(50), us(150)), Ok(us(100)));
    }

    #[test]
    fn negative_sample_is_an_error() {
        assert!(matches!(measure_w(us(10), us(50), us(40)), Err(MacError::NegativeSample { .. })));
    }

    #[test]
    fn ewma_rules() {
        let e = update_estimate(LinkEstimate::default(), us(100), SampleSource::Active, 0.1, us(0));
        assert_eq!(e.w_ewma, us(100));
        let e = update_estimate(e, us(200), SampleSource::Passive, 0.1, us(1));
        assert_eq!(e.w_ewma, us(110));
        assert_eq!(e.sample_count, 2);
        assert_eq!(e.last_passive, Some(us(1)));
        assert_eq!(e.last_probe, us(0));
    }

    #[test]
    fn constant_samples_converge() {
        let mut e = update_estimate(LinkEstimate::default(), us(10_000), SampleSource::Active, 0.1, us(0));
        for _ in 0..500 {
            e = update_estimate(e, us(300), SampleSource::Passive, 0.1, us(0));
        }
        // integer rounding can stall within a few microseconds of the target
        assert!(e.w_ewma.as_micros().abs_diff(300) <= 5, "{}", e.w_ewma);
    }
}
