use num_complex::Complex64;
use proptest::prelude::*;
use sfdma_core::abg_power::{
    abg_eval, outage_sim, power_control, rayleigh_trace, AbgParams, FadingTrace, FixedPower, Policy,
};
use sfdma_core::channel::{
    apply_channel_with_noise, demap_bpsk, equalize_zf, modulate_bpsk, normalize_power, ChannelRealization,
    ComplexBlock, PowerAllocation,
};
use sfdma_core::io::{load_image, save_image};
use sfdma_core::nncore::{SeededRng, Tensor};
use sfdma_core::par::Exec;
use sfdma_core::recon::{quantize_uniform, ImageTensor};

fn abg_params() -> impl Strategy<Value = AbgParams> {
    (50.0..100.0f64, 0.1..20.0f64, 0.05..0.95f64, 0.3..3.0f64)
        .prop_map(|(alpha, beta, span, tau)| AbgParams::new(alpha, beta, span * alpha, tau))
}

proptest! {
    #[test]
    fn abg_is_monotone_and_bounded(p in abg_params(), a in 0.0..1e3f64, b in 0.0..1e3f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        let (fl, fh) = (abg_eval(&p, lo).unwrap(), abg_eval(&p, hi).unwrap());
        prop_assert!(fl <= fh);
        prop_assert!(fl >= p.floor() - 1e-9 && fh <= p.alpha + 1e-9);
    }

    #[test]
    fn power_control_meets_target(p in abg_params(), q in 0.02..0.98f64, g in 0.01..10.0f64, i in 0.0..5.0f64, s2 in 0.001..2.0f64) {
        let eta = p.floor() + q * p.gamma;
        let power = power_control(&p, eta, g, &[(1.0, i)], s2).unwrap();
        prop_assert!(power > 0.0);
        prop_assert!((abg_eval(&p, power * g / (i + s2)).unwrap() - eta).abs() < 1e-8);
    }

    #[test]
    fn power_control_rejects_unreachable_targets(p in abg_params(), over in 0.0..10.0f64) {
        prop_assert!(power_control(&p, p.alpha + over, 1.0, &[], 1.0).is_err());
        prop_assert!(power_control(&p, p.floor() - over, 1.0, &[], 1.0).is_err());
    }

    #[test]
    fn bpsk_round_trip(bits in prop::collection::vec(prop::bool::ANY, 1..64)) {
        let b: Vec<f64> = bits.iter().map(|&x| if x { 1.0 } else { -1.0 }).collect();
        let x = modulate_bpsk(&b).unwrap();
        prop_assert!((x.energy() - b.len() as f64).abs() < 1e-12);
        prop_assert_eq!(demap_bpsk(&x), b);
    }

    #[test]
    fn normalization_gives_unit_power(v in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..32)) {
        let m = ComplexBlock(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect());
        prop_assume!(m.energy() > 1e-6);
        let n = normalize_power(&m).unwrap();
        prop_assert!((n.energy() - m.len() as f64).abs() < 1e-9 * m.len() as f64);
    }

    /// With no interference and no noise, zero-forcing returns the scaled
    /// transmitted block exactly.
    #[test]
    fn zero_forcing_inverts_own_link(seed in 0u64..1000, d in 1usize..16, p in 0.1..4.0f64) {
        let mut rng = SeededRng::new(seed);
        let bits: Vec<f64> = (0..d).map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 }).collect();
        let x = modulate_bpsk(&bits).unwrap();
        let g = ComplexBlock((0..d).map(|_| rng.complex_normal(1.0) + Complex64::new(0.1, 0.0)).collect());
        let ch = ChannelRealization::new(1, d, vec![g.clone()], vec![0.0]).unwrap();
        let pw = PowerAllocation::new(vec![p]).unwrap();
        let y = apply_channel_with_noise(std::slice::from_ref(&x), &ch, &pw, &[ComplexBlock::zeros(d)]).unwrap();
        let eq = equalize_zf(&y[0], &g).unwrap();
        for (e, s) in eq.0.iter().zip(&x.0) {
            prop_assert!((e - s * p.sqrt()).norm() < 1e-9);
        }
    }

    #[test]
    fn quantizer_levels_are_cell_centres(v in prop::collection::vec(-10.0..10.0f64, 1..20), b in 1usize..6, r in 0.5..4.0f64) {
        let a = Tensor::new(vec![1, v.len()], v.clone()).unwrap();
        let q = quantize_uniform(&a, b, r).unwrap();
        let delta = 2.0 * r / (1u32 << b) as f64;
        prop_assert_eq!(q.bits.cols(), v.len() * b);
        prop_assert!(q.bits.data().iter().all(|&x| x == 1.0 || x == -1.0));
        for (&x, &l) in v.iter().zip(q.levels.data()) {
            prop_assert!(l.abs() < r);
            prop_assert!((x.clamp(-r, r) - l).abs() <= delta / 2.0 + 1e-12);
            let cell = (l + r) / delta - 0.5;
            prop_assert!((cell - cell.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn eight_bit_images_round_trip(h in 1usize..9, w in 1usize..9, rgb in prop::bool::ANY, seed in 0u64..1000) {
        let c = if rgb { 3 } else { 1 };
        let mut rng = SeededRng::new(seed);
        let data: Vec<f64> = (0..h * w * c).map(|_| (rng.uniform() * 255.0).round() / 255.0).collect();
        let img = ImageTensor::new(h, w, c, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pnm");
        save_image(&path, &img).unwrap();
        prop_assert_eq!(load_image(&path).unwrap(), img);
    }
}

#[test]
fn parallel_and_sequential_outage_agree() {
    let p = AbgParams::new(91.95, 10.50, 81.90, 1.329);
    let rng = SeededRng::new(4);
    let seq = rayleigh_trace(20_000, 16, &[0.1, 0.05], 0.1, &rng, Exec::Sequential).unwrap();
    let par = rayleigh_trace(20_000, 16, &[0.1, 0.05], 0.1, &rng, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
    for policy in [
        Policy::Fixed(FixedPower::Percentile(0.9)),
        Policy::Adaptive { budget: None },
        Policy::Adaptive { budget: Some(0.5) },
    ] {
        let a = outage_sim(&p, 88.0, &seq, policy, Exec::Sequential).unwrap();
        let b = outage_sim(&p, 88.0, &seq, policy, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn trace_rejects_mismatched_columns() {
    assert!(FadingTrace::new(vec![1.0, 2.0], vec![0.0], vec![0.1, 0.1]).is_err());
    assert!(FadingTrace::new(vec![-1.0], vec![0.0], vec![0.1]).is_err());
}
