use dispersive_rom::driver::DtPolicy;
use dispersive_rom::eb::*;

/// Sub-cell crest position from a parabola through the three largest samples.
fn crest(x: &[f64], eta: &[f64]) -> (f64, f64) {
    let i = eta.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let (a, b, c) = (eta[i - 1], eta[i], eta[i + 1]);
    let denom = a - 2.0 * b + c;
    let off = 0.5 * (a - c) / denom;
    let dx = x[1] - x[0];
    (x[i] + off * dx, b - 0.25 * (a - c) * off)
}

#[test]
fn flat_bottom_solitary_wave_keeps_shape_and_speed() {
    let ov = EbOverrides { bar_height: Some(0.0), x_center: Some(-10.0), ..Default::default() };
    let (config, s0) = eb_benchmark(EbBenchmark::SolitaryBar, &ov).unwrap();
    let c = solitary_celerity(config.a0, config.h0, config.g).unwrap();
    let problem = build_eb_problem(config).unwrap();
    let x = problem.grid().nodes();
    let t_end = 10.0 / c;
    let (out, _) = run_eb_fom(&problem, &s0, t_end, &[t_end], DtPolicy::Adaptive, |_, _, _| Ok(())).unwrap();
    let (x1, a1) = crest(&x, &out.state.eta);
    let speed = (x1 + 10.0) / t_end;
    assert!((a1 - 0.2).abs() / 0.2 <= 0.02, "amplitude {a1}");
    assert!((speed - c).abs() / c <= 0.01, "speed {speed} vs {c}");
    // short horizon: crest within one cell of the analytic position
    let t = 0.5;
    let (out, _) = run_eb_fom(&problem, &s0, t, &[t], DtPolicy::Adaptive, |_, _, _| Ok(())).unwrap();
    let (xc, _) = crest(&x, &out.state.eta);
    assert!((xc - (-10.0 + c * t)).abs() < problem.grid().dx, "{xc}");
}

#[test]
fn monochromatic_bar_generates_waves_and_stays_bounded() {
    let ov = EbOverrides { nh: Some(700), t_end: Some(10.0), ..Default::default() };
    let (config, s0) = eb_benchmark(EbBenchmark::MonochromaticBar, &ov).unwrap();
    let problem = build_eb_problem(config).unwrap();
    let probe = problem.grid().nearest_node(13.0);
    let mut peak: f64 = 0.0;
    let samples: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1).collect();
    run_eb_fom(&problem, &s0, 10.0, &samples, DtPolicy::Adaptive, |_, _, s| {
        peak = peak.max(s.eta[probe].abs());
        assert!(s.eta.iter().all(|e| e.abs() < 0.2));
        Ok(())
    })
    .unwrap();
    assert!(peak > 0.01 && peak < 0.06, "{peak}");
}
