mod common;

use common::*;
use gdconv_core::gdconv::{FreedomVariant, ParamField};
use gdconv_core::interp::InterpKind;
use gdconv_core::metrics::{interpolation_error, psnr, ssim, SsimCfg};
use gdconv_core::train::{episode_loss, loss_and_grad, synth_generate, Episode, Motion, Pattern, SynthSpec, ToyPredictor, TrainCfg};
use gdconv_core::{gdconv_forward, make_adacof, make_conventional, make_flow, Frame, FrameStack, GDConvParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs_diff(a: &Frame, b: &Frame) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn conventional_matches_direct_filtering(seed in any::<u64>(), k in prop::sample::select(vec![1usize, 3, 5])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w, t) = (rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..4));
        let frames: Vec<Frame> = (0..=t).map(|_| random_frame(&mut rng, h, w, 1)).collect();
        let kernels = random_field(&mut rng, h, w, (t + 1) * k * k, -1.0, 1.0);
        let p = make_conventional(h, w, t, k, &kernels).unwrap();
        let got = gdconv_forward(&FrameStack::new(frames.clone(), None).unwrap(), &p, &InterpKind::linear()).unwrap();
        prop_assert!(max_abs_diff(&got, &conventional_oracle(&frames, &kernels, k)) < 1e-12);
    }

    #[test]
    fn adacof_matches_direct_sampling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w, t, m) = (rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..4), rng.gen_range(1..4));
        let frames: Vec<Frame> = (0..=t).map(|_| random_frame(&mut rng, h, w, 3)).collect();
        let n = (t + 1) * m;
        let wts = random_field(&mut rng, h, w, n, -1.0, 1.0);
        let dx = random_field(&mut rng, h, w, n, -2.5, 2.5);
        let dy = random_field(&mut rng, h, w, n, -2.5, 2.5);
        let p = make_adacof(&dx, &dy, &wts, t, m).unwrap();
        let got = gdconv_forward(&FrameStack::new(frames.clone(), None).unwrap(), &p, &InterpKind::poly()).unwrap();
        prop_assert!(max_abs_diff(&got, &adacof_oracle(&frames, &wts, &dx, &dy, m)) < 1e-12);
    }

    #[test]
    fn flow_matches_backward_warping(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w, t) = (rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..4));
        let frames: Vec<Frame> = (0..=t).map(|_| random_frame(&mut rng, h, w, 1)).collect();
        let u = random_field(&mut rng, h, w, 1, -3.0, 3.0);
        let v = random_field(&mut rng, h, w, 1, -3.0, 3.0);
        let src = rng.gen_range(0..=t);
        let p = make_flow(&u, &v, src, t).unwrap();
        let kind = InterpKind::inv3d().with_epsilon(0.0);
        let got = gdconv_forward(&FrameStack::new(frames.clone(), None).unwrap(), &p, &kind).unwrap();
        prop_assert!(max_abs_diff(&got, &flow_oracle(&frames[src], &u, &v)) < 1e-12);
    }

    #[test]
    fn ie_scales_with_the_difference(seed in any::<u64>(), s in 0.1f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_frame(&mut rng, 5, 4, 1);
        let d: Vec<f64> = (0..20).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let shifted = |k: f64| Frame::new(5, 4, 1, a.data().iter().zip(&d).map(|(x, e)| x + k * e).collect()).unwrap();
        let base = interpolation_error(&a, &shifted(1.0)).unwrap();
        prop_assert!((interpolation_error(&a, &shifted(s)).unwrap() - s * base).abs() < 1e-9);
    }
}

#[test]
fn metrics_match_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for c in [1, 3] {
        let a = random_frame(&mut rng, 32, 32, c);
        let b = random_frame(&mut rng, 32, 32, c);
        let cfg = SsimCfg::default();
        let want = ssim_oracle(&a, &b, cfg.window, cfg.sigma, cfg.k1, cfg.k2, cfg.dynamic_range);
        assert!((ssim(&a, &b, &cfg).unwrap() - want).abs() < 1e-9);
        let mse = mse_oracle(&a, &b);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), 10.0 * (1.0 / mse).log10());
        assert!((interpolation_error(&a, &b).unwrap() - 255.0 * mse.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn identity_params_reproduce_the_first_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let stack = FrameStack::new(vec![random_frame(&mut rng, 6, 5, 3), random_frame(&mut rng, 6, 5, 3)], None).unwrap();
    let p = GDConvParams::init(6, 5, 1, 1).unwrap();
    let out = gdconv_forward(&stack, &p, &InterpKind::poly()).unwrap();
    assert_eq!(psnr(&out, &stack.frames()[0], 1.0).unwrap(), 99.0);
}

#[test]
fn predictor_pipeline_gradient_on_8x8() {
    let spec = SynthSpec {
        height: 8,
        width: 8,
        motion: Motion::ConstantVelocity { vx: 0.6, vy: -0.4 },
        pattern: Pattern::Checker,
        frame_times: vec![0.0, 1.0, 2.0, 3.0],
        target_time: 1.5,
        seed: 4,
    };
    let cfg = TrainCfg {
        hidden: 6,
        n_points: 3,
        variant: FreedomVariant::Full,
        kind: InterpKind::poly(),
        ..TrainCfg::default()
    };
    let episode = Episode::new(synth_generate(&spec).unwrap(), 1.5, &cfg).unwrap();
    let mut pred = ToyPredictor::new(cfg.predictor_cfg(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Move the output layer off zero so every head is exercised.
    let len = pred.params().len();
    for v in &mut pred.params_mut()[len / 2..] {
        *v = rng.gen_range(-0.05..0.05);
    }
    let (loss, grad) = loss_and_grad(&pred, &episode, &cfg).unwrap();
    assert_eq!(loss, episode_loss(&pred, &episode, &cfg).unwrap());
    let h = 1e-6;
    for _ in 0..30 {
        let k = rng.gen_range(0..len);
        let at = |s: f64| {
            let mut q = pred.clone();
            q.params_mut()[k] = s;
            episode_loss(&q, &episode, &cfg).unwrap()
        };
        let x = pred.params()[k];
        let num = (at(x + h) - at(x - h)) / (2.0 * h);
        assert!((grad[k] - num).abs() <= 1e-3 * grad[k].abs().max(num.abs()).max(1e-3), "param {k}: {} vs {num}", grad[k]);
    }
    // Zero-initialized predictors start from the initial parameters whatever the input.
    let zero = ToyPredictor::zeros(cfg.predictor_cfg()).unwrap();
    let p = zero.predictor_forward(&episode.generation).unwrap();
    assert_eq!(p.field(ParamField::Z).data().iter().copied().fold(0.0, f64::max), 0.0);
}
