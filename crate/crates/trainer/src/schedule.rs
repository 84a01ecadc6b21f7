//! Learning-rate schedule: linear warmup from zero, then cosine decay
//! from the peak down to exactly `min_lr` at the final step.

use crate::TrainConfig;

/// Learning rate at an optimizer step.
///
/// Steps past `total_steps` clamp to `min_lr`. The boundary values are
/// exact: `lr_at(warmup_steps) == peak_lr` and
/// `lr_at(total_steps) == min_lr`, with no floating-point drift.
pub fn lr_at(step: u64, cfg: &TrainConfig) -> f64 {
    if step >= cfg.total_steps {
        return cfg.min_lr;
    }
    if step < cfg.warmup_steps {
        return cfg.peak_lr * step as f64 / cfg.warmup_steps as f64;
    }
    if step == cfg.warmup_steps {
        return cfg.peak_lr;
    }
    let progress = (step - cfg.warmup_steps) as f64 / (cfg.total_steps - cfg.warmup_steps) as f64;
    cfg.min_lr + 0.5 * (cfg.peak_lr - cfg.min_lr) * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> TrainConfig {
        TrainConfig::new(9.7e-5, 150_000, 1538 * 2048, 2048)
    }

    #[test]
    fn peak_at_end_of_warmup() {
        let cfg = reference();
        assert_eq!(lr_at(cfg.warmup_steps, &cfg), 9.7e-5);
    }

    #[test]
    fn final_step_is_exactly_min_lr() {
        let cfg = reference();
        assert_eq!(lr_at(150_000, &cfg), 9.7e-6);
        assert_eq!(lr_at(150_000, &cfg), cfg.peak_lr / 10.0);
    }

    #[test]
    fn midpoint_of_decay_halves_the_band() {
        let cfg = reference();
        let mid = cfg.warmup_steps + (cfg.total_steps - cfg.warmup_steps) / 2;
        // cos(pi/2) = 0 at the midpoint (the decay span is even here).
        let expect = cfg.min_lr + 0.5 * (cfg.peak_lr - cfg.min_lr);
        assert!((lr_at(mid, &cfg) - expect).abs() < 1e-20);
    }

    #[test]
    fn warmup_is_linear_from_zero() {
        let cfg = reference();
        assert_eq!(lr_at(0, &cfg), 0.0);
        let quarter = lr_at(cfg.warmup_steps / 4, &cfg);
        assert!((quarter - cfg.peak_lr / 4.0).abs() < 1e-18);
    }

    #[test]
    fn continuous_at_the_junction_and_monotone_after() {
        let cfg = reference();
        let before = lr_at(cfg.warmup_steps - 1, &cfg);
        let at = lr_at(cfg.warmup_steps, &cfg);
        let after = lr_at(cfg.warmup_steps + 1, &cfg);
        assert!((at - before) < cfg.peak_lr / cfg.warmup_steps as f64 * 1.01);
        assert!(after <= at);
        let mut prev = at;
        for step in (cfg.warmup_steps..=cfg.total_steps).step_by(100) {
            let lr = lr_at(step, &cfg);
            assert!(lr <= prev + 1e-18, "rose at step {step}");
            prev = lr;
        }
    }

    #[test]
    fn past_the_end_clamps_to_min() {
        let cfg = reference();
        assert_eq!(lr_at(explicit_past(&cfg), &cfg), cfg.min_lr);
    }

    fn explicit_past(cfg: &TrainConfig) -> u64 {
        cfg.total_steps + 12_345
    }
}
