// Scratch experiment driver used during development. Not part of the library.
use gcs_core::channels::{AwgnConfig, ChannelConfig};
use gcs_core::ckf::CkfHyperparams;
use gcs_core::metrics::ReceiverKind;
use gcs_core::trainer::{
    evaluate, evaluate_constellation, train, OptimizerConfig, TrainConfig, DESK_PROTOCOL,
};
use gcs_core::Constellation;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("time");
    match mode {
        "time" => time_step(),
        "awgn" => awgn_sweep(&args[2..]),
        "nlpn" => nlpn_sweep(&args[2..]),
        "bps" => bps_sweep(&args[2..]),
        _ => eprintln!("unknown mode {mode}"),
    }
}

fn nlpn_sweep(args: &[String]) {
    let pin: f64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let max_iter: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(400);
    let m = 16usize;
    let channel = ChannelConfig::Nlpn(gcs_core::channels::NlpnConfig::standard_fiber(pin));
    let qam = Constellation::square_qam(m).unwrap();
    let qam_stats = evaluate_constellation(&qam, &channel, DESK_PROTOCOL, 777).unwrap();
    println!("QAM-16 @ {pin} dBm: mean {:.4}", qam_stats.mean);

    for q in [1e-4, 1e-5, 1e-6] {
        for r in [1e-2, 1e-3] {
            let mut cfg = TrainConfig::ckf(m, CkfHyperparams { q, r }, channel.clone(), 42);
            cfg.max_iterations = max_iter;
            let t0 = Instant::now();
            match train(&cfg) {
                Ok(report) => {
                    let stats = evaluate(
                        &report.final_weights,
                        &channel,
                        DESK_PROTOCOL,
                        ReceiverKind::Gaussian,
                        777,
                    )
                    .unwrap();
                    println!(
                        "CKF q={q:.0e} r={r:.0e}: {} iters in {:.1}s, loss_end {:.4}, gaussian mean {:.4} (QAM {:.4}, gain {:+.4})",
                        report.iterations_run,
                        t0.elapsed().as_secs_f64(),
                        report.loss_trace.last().unwrap(),
                        stats.mean,
                        qam_stats.mean,
                        stats.mean - qam_stats.mean,
                    );
                }
                Err(e) => println!("CKF q={q:.0e} r={r:.0e}: FAILED {e}"),
            }
        }
    }
}

fn bps_sweep(args: &[String]) {
    let snr: f64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(15.0);
    let max_iter: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(400);
    let window: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(40);
    let m = 16usize;
    let channel = ChannelConfig::PhaseNoiseBps(gcs_core::channels::PhaseNoiseBpsConfig {
        snr_db: snr,
        linewidth_hz: 100e3,
        symbol_rate_baud: 32e9,
        num_test_phases: 36,
        window_size: window,
    });
    let qam = Constellation::square_qam(m).unwrap();
    let qam_stats = evaluate_constellation(&qam, &channel, DESK_PROTOCOL, 777).unwrap();
    println!(
        "QAM-16 @ {snr} dB W={window}: mean {:.4} p25 {:.4} max {:.4}",
        qam_stats.mean, qam_stats.p25, qam_stats.max
    );

    for q in [1e-4, 1e-5, 1e-6] {
        for r in [1e-2, 1e-3] {
            let mut cfg = TrainConfig::ckf(m, CkfHyperparams { q, r }, channel.clone(), 42);
            cfg.max_iterations = max_iter;
            let t0 = Instant::now();
            match train(&cfg) {
                Ok(report) => {
                    let stats = evaluate(
                        &report.final_weights,
                        &channel,
                        DESK_PROTOCOL,
                        ReceiverKind::Gaussian,
                        777,
                    )
                    .unwrap();
                    println!(
                        "CKF q={q:.0e} r={r:.0e}: {} iters in {:.1}s, loss {:.4}, mean {:.4} p25 {:.4} (QAM mean {:.4} p25 {:.4})",
                        report.iterations_run,
                        t0.elapsed().as_secs_f64(),
                        report.loss_trace.last().unwrap(),
                        stats.mean,
                        stats.p25,
                        qam_stats.mean,
                        qam_stats.p25,
                    );
                }
                Err(e) => println!("CKF q={q:.0e} r={r:.0e}: FAILED {e}"),
            }
        }
    }
}

fn time_step() {
    let channel = ChannelConfig::Awgn(AwgnConfig { snr_db: 10.0 });
    for m in [4usize, 16] {
        let mut cfg = TrainConfig::ckf(
            m,
            CkfHyperparams { q: 1e-3, r: 1e-2 },
            channel.clone(),
            1,
        );
        cfg.max_iterations = 50;
        cfg.convergence.consecutive_hits = usize::MAX;
        let t0 = Instant::now();
        let report = train(&cfg).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        println!(
            "M={m} B={} : {} iters in {:.2}s ({:.3}s/iter), loss {:.4} -> {:.4}",
            cfg.batch_size,
            report.iterations_run,
            dt,
            dt / report.iterations_run as f64,
            report.loss_trace[0],
            report.loss_trace.last().unwrap()
        );
    }
}

fn awgn_sweep(args: &[String]) {
    let snr: f64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(10.0);
    let max_iter: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(400);
    let m = 16usize;
    let channel = ChannelConfig::Awgn(AwgnConfig { snr_db: snr });
    let qam = Constellation::square_qam(m).unwrap();
    let qam_stats = evaluate_constellation(&qam, &channel, DESK_PROTOCOL, 777).unwrap();
    println!("QAM-16 @ {snr} dB: mean {:.4}", qam_stats.mean);

    // BP baseline
    let mut bp_cfg = TrainConfig::backprop(
        m,
        gcs_core::nn::AdamConfig::with_learning_rate(1e-3),
        channel.clone(),
        42,
    );
    bp_cfg.max_iterations = 8000;
    let t0 = Instant::now();
    let bp = train(&bp_cfg).unwrap();
    let bp_stats = evaluate(
        &bp.final_weights,
        &channel,
        DESK_PROTOCOL,
        ReceiverKind::Gaussian,
        777,
    )
    .unwrap();
    println!(
        "BP: {} iters in {:.1}s, val {:.4}, gaussian mean {:.4}",
        bp.iterations_run,
        t0.elapsed().as_secs_f64(),
        bp.mi_validation,
        bp_stats.mean
    );

    for q in [1e-4, 1e-5, 1e-6] {
        for r in [1e-2, 1e-3, 1e-4] {
            let mut cfg = TrainConfig::ckf(m, CkfHyperparams { q, r }, channel.clone(), 42);
            cfg.max_iterations = max_iter;
            let t0 = Instant::now();
            match train(&cfg) {
                Ok(report) => {
                    let stats = evaluate(
                        &report.final_weights,
                        &channel,
                        DESK_PROTOCOL,
                        ReceiverKind::Gaussian,
                        777,
                    )
                    .unwrap();
                    println!(
                        "CKF q={q:.0e} r={r:.0e}: {} iters in {:.1}s, loss_end {:.4}, val {:.4}, gaussian mean {:.4} (vs BP {:.4})",
                        report.iterations_run,
                        t0.elapsed().as_secs_f64(),
                        report.loss_trace.last().unwrap(),
                        report.mi_validation,
                        stats.mean,
                        bp_stats.mean,
                    );
                }
                Err(e) => println!("CKF q={q:.0e} r={r:.0e}: FAILED {e}"),
            }
            let _ = OptimizerConfig::Ckf(CkfHyperparams { q, r });
        }
    }
}
