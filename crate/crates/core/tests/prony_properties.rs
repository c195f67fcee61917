use std::f64::consts::PI;

use eprony_core::{
    error_index, fit_prony, generate_designed, instantaneous_fa_frequency, normalize_shape,
    prony::reconstruct_complex, Complex, DesignedSignalSpec, Interval, Signal,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Truth {
    dc: Option<(f64, f64)>,
    pairs: Vec<(f64, f64, f64, f64)>,
}

impl Truth {
    fn order(&self) -> usize {
        self.dc.is_some() as usize + 2 * self.pairs.len()
    }

    fn sample(&self, n: usize, dt: f64, scale: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                let mut v = self.dc.map_or(0.0, |(a, b)| b * (a * t).exp());
                for &(a, f, b, th) in &self.pairs {
                    v += 2.0 * b * (a * t).exp() * (2.0 * PI * f * t + th).cos();
                }
                scale * v
            })
            .collect()
    }
}

fn truth() -> impl Strategy<Value = Truth> {
    let pair = (-1.0..0.1f64, 0.2..5.0f64, 0.2..2.0f64, -PI..PI);
    (
        proptest::option::of((-1.0..0.1f64, 0.2..2.0f64)),
        proptest::collection::vec(pair, 1..=3),
    )
        .prop_filter("frequencies must be separated", |(_, pairs)| {
            pairs
                .iter()
                .enumerate()
                .all(|(i, a)| pairs[..i].iter().all(|b| (a.1 - b.1).abs() > 0.3))
        })
        .prop_map(|(dc, pairs)| Truth { dc, pairs })
}

fn signal(samples: Vec<f64>, dt: f64) -> Signal {
    Signal::single("y", 0.0, dt, samples).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_signals_are_recovered(t in truth()) {
        let dt = 0.01;
        let s = signal(t.sample(2000, dt, 1.0), dt);
        let set = fit_prony(&s, "y", Interval::new(0.0, 19.99), t.order()).unwrap();
        for &(a, f, b, _) in &t.pairs {
            let lambda = Complex::new(a, 2.0 * PI * f);
            let m = set.modes().iter().find(|m| (m.eigenvalue - lambda).norm() < 1e-6).unwrap();
            prop_assert!((m.eigenvalue - lambda).norm() < 1e-8);
            prop_assert!((m.contribution.norm() - b).abs() < 1e-8);
        }
    }

    #[test]
    fn shifting_the_window_keeps_anchored_contributions(t in truth()) {
        let dt = 0.01;
        let s = signal(t.sample(2000, dt, 1.0), dt);
        let a = fit_prony(&s, "y", Interval::new(0.0, 12.0), t.order()).unwrap();
        let b = fit_prony(&s, "y", Interval::new(5.0, 17.0), t.order()).unwrap();
        for m in a.modes() {
            let other = b.modes().iter().find(|o| (o.eigenvalue - m.eigenvalue).norm() < 1e-6).unwrap();
            prop_assert!((other.contribution - m.contribution).norm() < 1e-6 * m.contribution.norm().max(1.0));
        }
    }

    #[test]
    fn scaling_the_signal_scales_contributions(t in truth(), c in 0.1..10.0f64) {
        let dt = 0.01;
        let base = fit_prony(&signal(t.sample(1500, dt, 1.0), dt), "y", Interval::new(0.0, 14.99), t.order()).unwrap();
        let scaled = fit_prony(&signal(t.sample(1500, dt, c), dt), "y", Interval::new(0.0, 14.99), t.order()).unwrap();
        for m in base.modes() {
            let other = scaled.modes().iter().find(|o| (o.eigenvalue - m.eigenvalue).norm() < 1e-6).unwrap();
            prop_assert!((other.contribution - m.contribution * c).norm() < 1e-7 * c.max(1.0));
        }
    }

    #[test]
    fn reconstruction_is_real(t in truth()) {
        let dt = 0.01;
        let s = signal(t.sample(1000, dt, 1.0), dt);
        let set = fit_prony(&s, "y", Interval::new(0.0, 9.99), t.order()).unwrap();
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        for z in reconstruct_complex(&set, &times) {
            prop_assert!(z.im.abs() < 1e-12 * z.norm().max(1.0));
        }
    }

    #[test]
    fn error_index_is_jointly_scale_invariant(
        r in proptest::collection::vec(-5.0..5.0f64, 3..50),
        noise in proptest::collection::vec(-1.0..1.0f64, 50),
        c in 0.01..100.0f64,
    ) {
        prop_assume!(r.iter().any(|v| v.abs() > 1e-3));
        let cand: Vec<f64> = r.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let e = error_index(&cand, &r, 0.01).unwrap();
        let rs: Vec<f64> = r.iter().map(|v| v * c).collect();
        let cs: Vec<f64> = cand.iter().map(|v| v * c).collect();
        let es = error_index(&cs, &rs, 0.01).unwrap();
        prop_assert!((e - es).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn shape_normalization_is_idempotent(
        parts in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 1..6),
    ) {
        let column: Vec<Complex> = parts.iter().map(|&(a, b)| Complex::new(a, b)).collect();
        prop_assume!(column.iter().any(|z| z.norm() > 1e-6));
        let names: Vec<String> = (0..column.len()).map(|i| format!("g{i}")).collect();
        let once = normalize_shape(&names, &column, Complex::new(-0.1, 3.0), None).unwrap();
        let twice = normalize_shape(&names, &once.phasors, Complex::new(-0.1, 3.0), None).unwrap();
        for (a, b) in once.phasors.iter().zip(&twice.phasors) {
            prop_assert!((a - b).norm() < 1e-14);
        }
    }
}

#[test]
fn drifting_frequency_falls_with_amplitude() {
    let spec = DesignedSignalSpec::benchmark();
    let mut last = f64::INFINITY;
    for k in 0..=100 {
        let f = instantaneous_fa_frequency(&spec, k as f64 / 100.0).unwrap();
        assert!(f <= last);
        last = f;
    }
    assert!((instantaneous_fa_frequency(&spec, 1.0).unwrap() - 1.430).abs() < 1e-12);
    assert!((instantaneous_fa_frequency(&spec, 0.0).unwrap() - 1.670).abs() < 1e-12);
}

#[test]
fn steady_designed_signal_is_recovered_exactly() {
    let spec = DesignedSignalSpec::benchmark_steady();
    let s = generate_designed(&spec, 25.0, 0.01).unwrap();
    let set = fit_prony(&s, "x", Interval::new(2.0, 25.0), 7).unwrap();
    let mut freqs: Vec<f64> = set.modes().iter().map(|m| m.frequency()).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    assert_eq!(freqs.len(), 4);
    for m in set.modes() {
        assert!((m.contribution.norm() - 0.5).abs() < 1e-8);
    }
}
