/// Peak learning rate of the default schedule.
pub const DEFAULT_PEAK_LR: f64 = 2e-4;

/// Default fraction of iterations spent warming up.
pub const DEFAULT_WARMUP: f64 = 0.05;

/// Number of warmup steps for `total` iterations.
pub fn warmup_steps(total: usize, warmup_frac: f64) -> usize {
    ((total as f64 * warmup_frac).round() as usize).min(total)
}

/// Linear warmup from 0 to `peak`, then cosine decay to 0 at `total`.
pub fn lr_schedule(step: usize, total: usize, peak: f64, warmup_frac: f64) -> f64 {
    if total == 0 || step >= total {
        return 0.0;
    }
    let w = warmup_steps(total, warmup_frac);
    if step <= w && w > 0 {
        return peak * step as f64 / w as f64;
    }
    let progress = (step - w) as f64 / (total - w) as f64;
    peak * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}
