//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (bypassing output capture) before asserting.

use flashsim::channel::{build_state_model, CellState, ChannelParams, StateModel, WriteVoltages};
use flashsim::harness::{
    csv_document, run_calibration, run_sweep, Calibration, CalibrationConfig, CampaignConfig, PointReport,
};
use flashsim::ldpc::{estimate_dmin, CodeConfig, LdpcCode, ParityCheck};
use flashsim::readopt::{
    calibrate_weights, design_read, entropy, optimize_theta, solve_read_voltages, theta_costs, CostWeights,
    ReadConfig, ReadScheme,
};
use flashsim::writeopt::{
    design_write, fixed_default, optimize_write, WriteObjective, WriteScheme, WriteSearchConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::Write;
use std::sync::OnceLock;

fn report(id: u32, pass: bool, detail: &str) {
    let line = format!("criterion {id:>2}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn default_code() -> &'static LdpcCode {
    static CODE: OnceLock<LdpcCode> = OnceLock::new();
    CODE.get_or_init(|| LdpcCode::peg_construct(&CodeConfig::default()).expect("default code builds"))
}

fn calibration() -> &'static Calibration {
    static CAL: OnceLock<Calibration> = OnceLock::new();
    CAL.get_or_init(|| {
        run_calibration(&CampaignConfig::default(), default_code(), &CalibrationConfig::default())
            .expect("calibration runs")
    })
}

/// Proposed write voltages and the resulting model.
fn proposed_model(pe: f64, t: f64, d_min: usize) -> StateModel {
    let params = ChannelParams::default().at(pe, t);
    let w = optimize_write(&params, d_min, &WriteSearchConfig::default()).unwrap().voltages;
    build_state_model(&params, w).unwrap()
}

/// `b - a` in units of the combined counting error.
fn sigma_gap(a: &PointReport, b: &PointReport) -> f64 {
    (b.ber_total() - a.ber_total()) / a.ber_std_err().hypot(b.ber_std_err())
}

#[test]
fn c01_closed_form_rber_matches_monte_carlo() {
    const CELLS: usize = 1_000_000;
    // Equal-thirds write voltages: at low wear the erased state reaches past
    // t2, so crossings beyond the neighboring state are exercised too.
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for pe in [0.0, 6000.0, 18000.0] {
        for t in [0.0, 15000.0] {
            let params = ChannelParams::default().at(pe, t);
            let model = build_state_model(&params, fixed_default(&params)).unwrap();
            let th = model.hard_thresholds().unwrap();
            let closed = model.rber(&th);
            let normals: Vec<Normal<f64>> = (0..4).map(|i| Normal::new(model.mu[i], model.sigma[i]).unwrap()).collect();
            let (mut err_msb, mut err_lsb) = (0u64, 0u64);
            for _ in 0..CELLS {
                let s = CellState::ALL[rng.random_range(0..4)];
                let v = normals[s.index()].sample(&mut rng);
                let read = CellState::ALL[th.t.iter().filter(|&&x| v > x).count()];
                err_msb += (read.msb() != s.msb()) as u64;
                err_lsb += (read.lsb() != s.lsb()) as u64;
            }
            for (p, errs) in [(closed.msb, err_msb), (closed.lsb, err_lsb)] {
                let emp = errs as f64 / CELLS as f64;
                let sd = (p * (1.0 - p) / CELLS as f64).sqrt();
                let z = if sd > 0.0 {
                    (emp - p).abs() / sd
                } else if emp == p {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z);
            }
            details.push(format!(
                "pe={pe} t={t}: msb {:.3e}/{:.3e} lsb {:.3e}/{:.3e}",
                closed.msb,
                err_msb as f64 / CELLS as f64,
                closed.lsb,
                err_lsb as f64 / CELLS as f64
            ));
        }
    }
    let pass = worst <= 3.0;
    report(1, pass, &format!("max |MC - closed| = {worst:.2} sd over 6 points x 2 pages"));
    assert!(pass, "{details:?}");
}

#[test]
fn c02_write_optimizers_match_grid_search() {
    let params = ChannelParams::default().at(6000.0, 15000.0);
    let d_min = default_code().d_min_est();
    let cfg = WriteSearchConfig::default();
    let m = 200;
    let step = (params.v_max - params.v_min) / (m - 1) as f64;
    let cases = [
        (WriteScheme::Proposed, WriteObjective::Cost { d_min }),
        (WriteScheme::MinRber, WriteObjective::TotalRber),
        (WriteScheme::Mrd, WriteObjective::WorstPage),
        (WriteScheme::Mcc, WriteObjective::NegCapacity),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (scheme, obj) in cases {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..m {
            for j in i + 1..m {
                let (v1, v2) = (params.v_min + step * i as f64, params.v_min + step * j as f64);
                let f = obj.eval(&params, WriteVoltages::new(v1, v2));
                if f < best.0 {
                    best = (f, v1, v2);
                }
            }
        }
        let design = design_write(scheme, &params, d_min, &cfg, None).unwrap();
        let w = design.voltages;
        let f = obj.eval(&params, w);
        let ok = (w.v1 - best.1).abs() <= 0.01 && (w.v2 - best.2).abs() <= 0.01 && f <= best.0 + 0.01 * best.0.abs();
        pass &= ok;
        detail.push(format!(
            "{scheme} ({:.4},{:.4}) f={:.6e} vs grid ({:.4},{:.4}) f={:.6e}",
            w.v1, w.v2, f, best.1, best.2, best.0
        ));
    }
    report(2, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn c03_entropy_roots_match_dense_scan() {
    let model = proposed_model(6000.0, 15000.0, default_code().d_min_est());
    let th = model.hard_thresholds().unwrap().t;
    let lo = model.mu[0] - 6.0 * model.sigma[0];
    let hi = model.mu[3] + 6.0 * model.sigma[3];
    let step = 1e-5;
    let grid: Vec<f64> = (0..=((hi - lo) / step) as usize).map(|i| lo + step * i as f64).collect();
    let h: Vec<f64> = grid.iter().map(|&v| entropy(&model, v)).collect();
    let (mut max_resid, mut max_dev): (f64, f64) = (0.0, 0.0);
    for theta in [0.2, 0.35, 0.55, 0.8] {
        let reads = solve_read_voltages(&model, theta).unwrap();
        let crossings: Vec<f64> = (1..grid.len())
            .filter(|&i| (h[i - 1] - theta).signum() != (h[i] - theta).signum())
            .map(|i| {
                let (a, b) = (h[i - 1] - theta, h[i] - theta);
                grid[i - 1] + step * a / (a - b)
            })
            .collect();
        for (k, &t) in th.iter().enumerate() {
            let below = crossings.iter().copied().filter(|&c| c < t).fold(f64::NEG_INFINITY, f64::max);
            let above = crossings.iter().copied().filter(|&c| c > t).fold(f64::INFINITY, f64::min);
            for (r, oracle) in [(reads.r[2 * k], below), (reads.r[2 * k + 1], above)] {
                max_dev = max_dev.max((r - oracle).abs());
                max_resid = max_resid.max((entropy(&model, r) - theta).abs());
            }
        }
    }
    let pass = max_resid <= 1e-9 && max_dev <= 1e-4;
    report(3, pass, &format!("max |H(R)-theta| = {max_resid:.1e}, max |R - scan| = {max_dev:.1e} V"));
    assert!(pass);
}

#[test]
fn c04_weight_regression_recovers_planted_slopes() {
    let model = proposed_model(6000.0, 15000.0, 4);
    let thetas: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64).collect();
    let (cost_pe, cost_llr): (Vec<f64>, Vec<f64>) = thetas.iter().map(|&t| theta_costs(&model, t, 4).unwrap()).unzip();
    let mut pass = true;
    let mut detail = Vec::new();
    for (c1, c2, icpt) in [(3.0, 0.0, 0.0), (1.0, 2.0, 0.1), (1.0, 1.0, 0.0)] {
        let ber: Vec<f64> = cost_pe.iter().zip(&cost_llr).map(|(p, l)| c1 * p + c2 * l + icpt).collect();
        let w = calibrate_weights(&thetas, &ber, &cost_pe, &cost_llr).unwrap();
        let ok = (w.c1 - c1).abs() <= 1e-9 && (w.c2 - c2).abs() <= 1e-9;
        pass &= ok;
        detail.push(format!("({c1},{c2}) -> ({:.3e},{:.3e}) err ({:.1e},{:.1e})", w.c1, w.c2, w.c1 - c1, w.c2 - c2));
    }
    // A single noise draw passes or fails by luck, so recovery is judged
    // over many independent draws.
    let noise = Normal::new(0.0, 1e-8f64.sqrt()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let draws = 1000;
    let mut recovered = 0;
    let (mut sum1, mut sum2) = (0.0, 0.0);
    for _ in 0..draws {
        let ber: Vec<f64> = cost_pe.iter().zip(&cost_llr).map(|(p, l)| p + l + noise.sample(&mut rng)).collect();
        let w = calibrate_weights(&thetas, &ber, &cost_pe, &cost_llr).unwrap();
        recovered += ((w.c1 - 1.0).abs() <= 0.1 && (w.c2 - 1.0).abs() <= 0.1) as usize;
        sum1 += (w.c1 - 1.0).powi(2);
        sum2 += (w.c2 - 1.0).powi(2);
    }
    let rate = recovered as f64 / draws as f64;
    pass &= rate >= 0.95;
    detail.push(format!(
        "noisy (1,1): {:.1}% of {draws} draws within 10%, rms slope error ({:.2},{:.2})",
        100.0 * rate,
        (sum1 / draws as f64).sqrt(),
        (sum2 / draws as f64).sqrt()
    ));
    report(4, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn c05_theta_star_lies_in_the_expected_band() {
    let cal = calibration();
    let model = proposed_model(6000.0, 15000.0, cal.d_min);
    let opt = optimize_theta(&model, cal.d_min, &cal.weights, (0.05, 0.95), 1e-3).unwrap();
    let cfg = ReadConfig::default();
    let fixed = design_read(ReadScheme::EntropyFixed, &model, cal.d_min, &cfg).unwrap();
    let pass = (0.45..=0.65).contains(&opt.theta) && cfg.theta_fixed == 0.35 && fixed.theta == Some(0.35);
    report(
        5,
        pass,
        &format!(
            "theta* = {:.4} with c1={:.4e} c2={:.4e} d_min={}; entropy baseline theta = {}",
            opt.theta, cal.weights.c1, cal.weights.c2, cal.d_min, cfg.theta_fixed
        ),
    );
    assert!(pass);
}

fn campaign(pe: f64, t: f64, write: WriteScheme, read: ReadScheme, weights: CostWeights) -> PointReport {
    let cfg = CampaignConfig {
        pe_list: vec![pe],
        t_list: vec![t],
        write_scheme: write,
        read_scheme: read,
        frames: 20_000,
        min_events: 0,
        read: ReadConfig {
            weights,
            ..ReadConfig::default()
        },
        ..CampaignConfig::default()
    };
    run_sweep(&cfg, default_code(), None, |_| Ok(())).unwrap().remove(0)
}

#[test]
fn c06_write_scheme_ordering() {
    // Every write scheme is read with MMI voltages for its own state model.
    let (pe, t) = (7000.0, 20000.0);
    let order = [WriteScheme::Proposed, WriteScheme::Mrd, WriteScheme::MinRber, WriteScheme::Fixed];
    let reports: Vec<PointReport> =
        order.iter().map(|&w| campaign(pe, t, w, ReadScheme::Mmi, CostWeights::default())).collect();
    let fixed_ber = reports[3].ber_total();
    let gaps: Vec<f64> = reports.windows(2).map(|w| sigma_gap(&w[0], &w[1])).collect();
    let pass = (1e-2..=1e-1).contains(&fixed_ber) && gaps.iter().all(|&g| g > 2.0);
    let bers: Vec<String> = reports
        .iter()
        .map(|r| format!("{}={:.3e}", r.write_scheme, r.ber_total()))
        .collect();
    report(
        6,
        pass,
        &format!("pe={pe} t={t}: {}; gaps in sd {:.1?}", bers.join(" "), gaps),
    );
    assert!(pass);
}

#[test]
fn c07_read_scheme_ordering() {
    let w = calibration().weights;
    let (pe, t) = (6000.0, 15000.0);
    let r = |s| campaign(pe, t, WriteScheme::Proposed, s, w);
    let (prop, mmi, uni, ent) = (r(ReadScheme::Proposed), r(ReadScheme::Mmi), r(ReadScheme::Uniform), r(ReadScheme::EntropyFixed));
    let gaps = [sigma_gap(&prop, &mmi), sigma_gap(&mmi, &uni), sigma_gap(&prop, &ent)];
    let pass = gaps.iter().all(|&g| g > 2.0);
    report(
        7,
        pass,
        &format!(
            "pe={pe} t={t}: proposed(theta={:.3})={:.3e} mmi={:.3e} uniform={:.3e} entropy-fixed={:.3e}; gaps in sd {:.1?}",
            prop.theta.unwrap_or(f64::NAN),
            prop.ber_total(),
            mmi.ber_total(),
            uni.ber_total(),
            ent.ber_total(),
            gaps
        ),
    );
    assert!(pass);
}

/// All vectors `x` with `H x = 0`, by brute force over `2^n`.
fn brute_force_codewords(h: &ParityCheck) -> Vec<u32> {
    let n = h.num_cols();
    let masks: Vec<u32> = h.rows().iter().map(|r| r.iter().fold(0u32, |m, &c| m | (1 << c))).collect();
    (0..1u32 << n).filter(|x| masks.iter().all(|m| (x & m).count_ones() % 2 == 0)).collect()
}

#[test]
fn c08_bp_is_exact_on_trees_and_beats_uncoded() {
    // Checks chained through single shared variables, plus pendant checks:
    // the Tanner graph has no cycle.
    let rows: Vec<Vec<usize>> = vec![
        vec![0, 1, 2, 3],
        vec![3, 4, 5],
        vec![5, 6, 7, 8],
        vec![8, 9, 10],
        vec![1, 11],
        vec![6, 12, 13],
    ];
    let h = ParityCheck::from_rows(16, &rows);
    assert_eq!(h.girth(), None);
    let words = brute_force_codewords(&h);
    assert!(words.len() <= 1 << 12);
    let code = LdpcCode::from_parity_check(h, Some(1), 0, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (mut max_err, mut disagreements): (f64, usize) = (0.0, 0);
    for _ in 0..1000 {
        let llr: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut p = [[0.0f64; 2]; 16];
        for &x in &words {
            let w: f64 = (0..16).filter(|i| x >> i & 1 == 1).map(|i| -llr[i]).sum::<f64>().exp();
            for (i, pi) in p.iter_mut().enumerate() {
                pi[(x >> i & 1) as usize] += w;
            }
        }
        let post = code.decoder().marginals(&llr, 12);
        for i in 0..16 {
            let exact = (p[i][0] / p[i][1]).ln();
            max_err = max_err.max((post[i] - exact).abs() / exact.abs().max(1.0));
            disagreements += ((post[i] < 0.0) != (exact < 0.0)) as usize;
        }
    }
    let map_ok = max_err <= 1e-9 && disagreements == 0;

    let code = default_code();
    let p: f64 = 0.002;
    let l = ((1.0 - p) / p).ln();
    let frames = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(809);
    let mut frame_errors = 0;
    for _ in 0..frames {
        let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = code.encode(&msg);
        let llr: Vec<f64> = cw
            .iter()
            .map(|&b| {
                let rx = b ^ (rng.random::<f64>() < p) as u8;
                if rx == 0 { l } else { -l }
            })
            .collect();
        let out = code.bp_decode(&llr, 50);
        frame_errors += (out.bits != cw) as usize;
    }
    let fer = frame_errors as f64 / frames as f64;
    let uncoded = 1.0 - (1.0 - p).powi(code.k() as i32);
    let pass = map_ok && fer < uncoded;
    report(
        8,
        pass,
        &format!("tree MAP max rel err {max_err:.1e}, {disagreements} sign flips; BSC(0.002) FER {fer:.2e} vs uncoded {uncoded:.3}"),
    );
    assert!(pass);
}

#[test]
fn c09_dmin_estimator_is_exact_on_small_codes() {
    let hamming = ParityCheck::from_rows(7, &[vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]);
    let d_ham = estimate_dmin(&hamming, 100, 1).unwrap().weight;

    // Random 12 x 20 matrix of full rank, so k = 8.
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let h = loop {
        let rows: Vec<Vec<usize>> = (0..12)
            .map(|_| (0..20).filter(|_| rng.random_bool(0.3)).collect())
            .collect();
        let h = ParityCheck::from_rows(20, &rows);
        if brute_force_codewords(&h).len() == 1 << 8 {
            break h;
        }
    };
    let exact = brute_force_codewords(&h).into_iter().filter(|&x| x != 0).map(u32::count_ones).min().unwrap() as usize;
    let est = estimate_dmin(&h, 100, 1).unwrap().weight;
    let pass = d_ham == 3 && est == exact;
    report(9, pass, &format!("Hamming(7,4) -> {d_ham}; random (20,8) -> {est}, enumeration {exact}"));
    assert!(pass);
}

#[test]
fn c10_sweeps_are_reproducible() {
    let cfg = CampaignConfig {
        pe_list: vec![6000.0, 9000.0],
        t_list: vec![10000.0],
        write_scheme: WriteScheme::Proposed,
        read_scheme: ReadScheme::Mmi,
        frames: 400,
        min_events: 50,
        ..CampaignConfig::default()
    };
    let code = default_code();
    let first = csv_document(&run_sweep(&cfg, code, None, |_| Ok(())).unwrap());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let second = pool.install(|| csv_document(&run_sweep(&cfg, code, None, |_| Ok(())).unwrap()));
    let pass = first == second;
    report(10, pass, &format!("{} bytes, identical across runs and thread counts: {pass}", first.len()));
    assert!(pass);
}
