//! Adam and the learning-rate schedule.

use rayon::prelude::*;

use super::train::TrainConfig;

/// First/second moment accumulators, flat like the parameters.
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub step: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> AdamState {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }
}

/// Standard bias-corrected Adam update. Elementwise, so the parallel split
/// cannot affect the result.
pub fn adam_step(
    params: &mut [f32],
    grads: &[f32],
    state: &mut AdamState,
    lr: f32,
    betas: (f32, f32),
    eps: f32,
) {
    assert_eq!(params.len(), grads.len());
    state.step += 1;
    let (b1, b2) = betas;
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);

    params
        .par_chunks_mut(16384)
        .zip(grads.par_chunks(16384))
        .zip(state.m.par_chunks_mut(16384).zip(state.v.par_chunks_mut(16384)))
        .for_each(|((p, g), (m, v))| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        });
}

/// Constant `lr_initial` through the warm phase, then exponential decay
/// reaching `lr_final` at the last iteration.
pub fn lr_schedule(iter: u32, cfg: &TrainConfig) -> f32 {
    if iter < cfg.warm_iterations {
        return cfg.lr_initial;
    }
    let t = (iter - cfg.warm_iterations) as f32
        / (cfg.iterations - cfg.warm_iterations).max(1) as f32;
    cfg.lr_initial * (cfg.lr_final / cfg.lr_initial).powf(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrainConfig {
        TrainConfig {
            iterations: 50_000,
            warm_iterations: 10_000,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_anchors() {
        let cfg = cfg();
        assert_eq!(lr_schedule(0, &cfg), 1e-2);
        assert_eq!(lr_schedule(9_999, &cfg), 1e-2);
        let last = lr_schedule(49_999, &cfg);
        assert!((last - 1e-4).abs() / 1e-4 < 0.01, "{last}");
        // Geometric midpoint of the decay phase.
        let mid = lr_schedule(10_000 + 20_000, &cfg);
        assert!((mid - 1e-3).abs() / 1e-3 < 1e-3, "{mid}");
    }

    #[test]
    fn schedule_is_non_increasing() {
        let cfg = cfg();
        let mut last = f32::INFINITY;
        for i in (0..50_000).step_by(97) {
            let lr = lr_schedule(i, &cfg);
            assert!(lr <= last);
            last = lr;
        }
    }

    #[test]
    fn zero_gradient_from_fresh_state_leaves_params_unchanged() {
        let mut p = vec![0.5f32, -0.25, 3.0];
        let before = p.clone();
        let mut state = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut state, 0.1, (0.9, 0.999), 1e-8);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        let mut p = vec![1.0f32];
        let mut state = AdamState::new(1);
        adam_step(&mut p, &[0.03], &mut state, 0.1, (0.9, 0.999), 1e-8);
        // Bias correction makes the first update ~ lr * sign(g).
        let delta = 1.0 - p[0];
        assert!(delta > 0.0999 && delta < 0.1001, "{delta}");
    }

    #[test]
    fn adam_minimizes_a_parabola()
    {
        // f(p) = p^2, grad = 2p.
        let mut p = vec![1.0f32];
        let mut state = AdamState::new(1);
        for _ in 0..100 {
            let g = 2.0 * p[0];
            adam_step(&mut p, &[g], &mut state, 0.1, (0.9, 0.999), 1e-8);
        }
        assert!(p[0].abs() < 0.5, "{}", p[0]);
    }
}
