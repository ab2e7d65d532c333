//! Acceptance gate. One PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//! Run: cargo test --release --test acceptance

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvshape::experiment::{
    calibrate_loss, run, ExperimentConfig, ExperimentReport, LossSetting, Scenario,
};
use cvshape::gaussian::{GaussianState, LossModel, LossStage, Quadrature, SymplecticTransform};
use cvshape::graph::{
    bloch_messiah, build_canonical, canonical_symplectic, compile_network, nullifiers_of,
    preset_paper_network, ClusterGraph, Node, Sign,
};
use cvshape::measure::{
    homodyne, remove_node, run_trajectory, shorten_wire, Outcomes, Readout, ShapingProtocol,
    TrajectoryPlan, DEFAULT_GAIN,
};

const ERASURE_TOL: f64 = 1e-10;
const PRESERVATION_TOL: f64 = 1e-10;
const PRESERVATION_BUDGET_S: f64 = 5.0;
const SHORTEN_VALUE: f64 = 0.158_114;
const SHORTEN_TOL: f64 = 1e-6;
const SHORTEN_MC_TRIALS: usize = 100_000;
const SHORTEN_MC_SIGMAS: f64 = 3.0;
const PUBLISHED_TOL: f64 = 0.08;
/// Absorbs rounding where a simulated value lands exactly on the tolerance edge.
const FP_SLACK: f64 = 1e-9;
const SHORTEN_DB_TARGET: f64 = -3.0;
const SHORTEN_DB_TOL: f64 = 1.0;
const LOSSLESS_RESIDUAL_DB: f64 = -5.0;
const LOSSLESS_RESIDUAL_TOL: f64 = 0.01;
const CALIBRATED_RESIDUAL_DB: f64 = -1.5;
const CALIBRATED_RESIDUAL_TOL: f64 = 0.5;
const IDEAL_DB: f64 = 60.0;
const IDEAL_BOUND: f64 = 1e-4;
const PHYSICALITY_FLOOR: f64 = -1e-9;
const RECOMPOSITION_TOL: f64 = 1e-8;
const GOLDEN_TOL: f64 = 1e-9;
const COMPILED_STATE_TOL: f64 = 1e-8;
const MC_TRIALS: usize = 1_000_000;
const MC_SIGMAS: f64 = 5.0;

/// States produced by criteria 1–6, checked together by criterion 7.
#[derive(Default)]
struct Ledger {
    count: usize,
    worst: f64,
    worst_label: String,
}

impl Ledger {
    fn record(&mut self, label: &str, s: &GaussianState) {
        let e = s.min_uncertainty_eigenvalue();
        if self.count == 0 || e < self.worst {
            self.worst = e;
            self.worst_label = label.to_string();
        }
        self.count += 1;
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_single_mode(rng: &mut ChaCha8Rng) -> GaussianState {
    let db = rng.random_range(0.0..15.0);
    let q = if rng.random_bool(0.5) { Quadrature::X } else { Quadrature::P };
    let theta = rng.random_range(0.0..std::f64::consts::PI);
    let thermal = rng.random_range(1.0..2.0);
    let s = GaussianState::squeezed_vacuum(db, q).unwrap();
    let s = GaussianState::from_moments(s.mean().clone(), s.cov() * thermal).unwrap();
    s.apply(&SymplecticTransform::phase_shift(1, 0, theta).unwrap())
        .unwrap()
        .displace(0, Quadrature::X, rng.random_range(-2.0..2.0))
        .unwrap()
        .displace(0, Quadrature::P, rng.random_range(-2.0..2.0))
        .unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng) -> ClusterGraph {
    let n = rng.random_range(2..=8);
    let base: Node = rng.random_range(0..20);
    let mut g = ClusterGraph::new((0..n).map(|k| base + 3 * k)).unwrap();
    let nodes = g.nodes().to_vec();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.45) {
                let s = if rng.random_bool(0.7) { Sign::Plus } else { Sign::Minus };
                g.add_edge(nodes[i], nodes[j], s).unwrap();
            }
        }
    }
    g
}

fn erasure_identity(ledger: &mut Ledger) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE7A5E);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = rng.random_range(2..=4);
        let modes: Vec<GaussianState> = (0..n).map(|_| random_single_mode(&mut rng)).collect();
        let input = GaussianState::product(&modes).unwrap();
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let coupled = input.apply(&SymplecticTransform::qnd(n, i, j, 1.0).unwrap()).unwrap();
        let m = rng.random_range(-3.0..3.0);
        let (rest, out) = homodyne(&coupled, j, 0.0, Readout::Value(m)).unwrap();
        let ki = if i < j { i } else { i - 1 };
        let fixed = rest.displace(ki, Quadrature::P, DEFAULT_GAIN * out.value).unwrap();
        ledger.record(&format!("erasure #{k}"), &coupled);
        ledger.record(&format!("erasure #{k} restored"), &fixed);
        let got = fixed.marginal(&[ki]).unwrap();
        let want = input.marginal(&[i]).unwrap();
        worst = worst.max(got.max_abs_diff(&want));
    }
    verdict(worst <= ERASURE_TOL, format!("max deviation {worst:.2e} over 200 inputs (tol {ERASURE_TOL:.0e})"))
}

fn nullifier_preservation(ledger: &mut Ledger) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9E5E);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for k in 0..100 {
        let g = random_graph(&mut rng);
        let db: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..15.0)).collect();
        let state = build_canonical(&g, &db).unwrap();
        let target = g.nodes()[rng.random_range(0..g.len())];
        let before: Vec<(Node, f64)> =
            nullifiers_of(&g).iter().map(|n| (n.anchor, n.variance(&state, &g).unwrap())).collect();
        let r = remove_node(&state, &g, target, DEFAULT_GAIN).unwrap();
        ledger.record(&format!("random graph #{k}"), &state);
        ledger.record(&format!("random graph #{k} shaped"), &r.ensemble);
        for n in nullifiers_of(&r.graph) {
            let after = n.variance(&r.ensemble, &r.graph).unwrap();
            let prior = before.iter().find(|(a, _)| *a == n.anchor).unwrap().1;
            worst = worst.max((after - prior).abs());
            compared += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= PRESERVATION_TOL && secs < PRESERVATION_BUDGET_S,
        format!("max |Δvar| {worst:.2e} over {compared} nullifiers, {secs:.2} s (tol {PRESERVATION_TOL:.0e}, budget {PRESERVATION_BUDGET_S} s)"),
    )
}

fn shortening_value(ledger: &mut Ledger) -> Outcome {
    let g = ClusterGraph::wire4();
    let state = build_canonical(&g, &[5.0; 4]).unwrap();
    let protocol = ShapingProtocol::shorten_wire(&g, 2, 3, DEFAULT_GAIN).unwrap();
    let r = protocol.execute(&state, Outcomes::MarginalMean).unwrap();
    ledger.record("shorten canonical", &state);
    ledger.record("shorten canonical shaped", &r.ensemble);
    let nulls = nullifiers_of(&r.graph);
    let analytic: Vec<f64> = nulls.iter().map(|n| n.variance(&r.ensemble, &r.graph).unwrap()).collect();
    let analytic_ok = analytic.iter().all(|v| (v - SHORTEN_VALUE).abs() <= SHORTEN_TOL);
    let plan = TrajectoryPlan { state, protocol, detection: vec![1.0; 2], nullifiers: nulls };
    let stats = run_trajectory(&plan, SHORTEN_MC_TRIALS, 2013).unwrap();
    let zs: Vec<f64> = stats.nullifiers.iter().map(|n| n.z_score().unwrap()).collect();
    let mc_ok = zs.iter().all(|z| z.abs() <= SHORTEN_MC_SIGMAS);
    let forms: Vec<String> = stats
        .nullifiers
        .iter()
        .map(|n| format!("{} = {:.7} (MC {:.5} ± {:.5})", n.form, n.analytic_var, n.sample_var.unwrap(), n.stderr.unwrap()))
        .collect();
    verdict(
        analytic_ok && mc_ok,
        format!("{}; z = {:.2?} (tol {SHORTEN_TOL:.0e}, {SHORTEN_MC_SIGMAS}σ at {SHORTEN_MC_TRIALS} trials)", forms.join(", "), zs),
    )
}

fn calibrated(scenario: Scenario) -> ExperimentReport {
    run(&ExperimentConfig { scenario, ..Default::default() }).unwrap()
}

fn published_reproduction() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for scenario in [Scenario::RemoveEdge, Scenario::RemoveInner, Scenario::ShortenWire] {
        let r = calibrated(scenario);
        ok &= r.final_report.all_pass();
        for p in r.published.iter().filter(|p| p.stage == "final" && !p.quantity.starts_with("squeezed")) {
            let within = p.difference.abs() <= PUBLISHED_TOL + FP_SLACK;
            ok &= within;
            parts.push(format!(
                "{} {}: {:.3} vs {:.2}{}",
                scenario,
                p.quantity,
                p.simulated,
                p.published,
                if within { "" } else { " [out]" }
            ));
        }
        if scenario == Scenario::ShortenWire {
            for c in &r.final_report.nullifiers {
                let within = (c.db - SHORTEN_DB_TARGET).abs() <= SHORTEN_DB_TOL;
                ok &= within;
                parts.push(format!("{} {:.2} dB vs {SHORTEN_DB_TARGET} ± {SHORTEN_DB_TOL} dB", c.form, c.db));
            }
        }
    }
    verdict(ok, format!("{} (tol ±{PUBLISHED_TOL})", parts.join("; ")))
}

/// Alternative single-parameter calibration, reported but not gating.
fn published_alternative() -> String {
    let wire = ClusterGraph::wire4();
    let lossless = preset_paper_network(5.0).unwrap().prepare().unwrap();
    let largest = nullifiers_of(&wire)
        .iter()
        .map(|n| (n.variance(&lossless, &wire).unwrap(), n.term_count()))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let cal = calibrate_loss(0.25, largest.0, largest.1).unwrap();
    let mut out = format!("eta = {:.4} from the {}-term form:", cal.eta, largest.1);
    for scenario in [Scenario::RemoveEdge, Scenario::RemoveInner, Scenario::ShortenWire] {
        let cfg = ExperimentConfig {
            scenario,
            loss: LossSetting::Explicit,
            loss_model: LossModel::uniform(LossStage::Detection, cal.eta).unwrap(),
            ..Default::default()
        };
        let r = run(&cfg).unwrap();
        for p in r.published.iter().filter(|p| p.stage == "final" && !p.quantity.starts_with("squeezed")) {
            out.push_str(&format!(" {}={:.3}/{:.2}", p.quantity, p.simulated, p.published));
        }
    }
    out
}

fn residual_squeezing(ledger: &mut Ledger) -> Outcome {
    let g = ClusterGraph::wire4();
    let state = build_canonical(&g, &[5.0; 4]).unwrap();
    let r = remove_node(&state, &g, 3, DEFAULT_GAIN).unwrap();
    ledger.record("remove-inner canonical shaped", &r.ensemble);
    let k = r.graph.index_of(4).unwrap();
    let lossless = cvshape::verify::residual_squeezing_db(&r.ensemble, k).unwrap().0;
    let cal = calibrated(Scenario::RemoveInner);
    let with_loss = cal.residual_squeezing.iter().find(|s| s.node == 4).unwrap().squeezed_db;
    let ok = (lossless - LOSSLESS_RESIDUAL_DB).abs() <= LOSSLESS_RESIDUAL_TOL
        && (with_loss - CALIBRATED_RESIDUAL_DB).abs() <= CALIBRATED_RESIDUAL_TOL;
    verdict(
        ok,
        format!(
            "lossless {lossless:.3} dB (want {LOSSLESS_RESIDUAL_DB} ± {LOSSLESS_RESIDUAL_TOL}), calibrated {with_loss:.3} dB (want {CALIBRATED_RESIDUAL_DB} ± {CALIBRATED_RESIDUAL_TOL})"
        ),
    )
}

fn ideal_limit(ledger: &mut Ledger) -> Outcome {
    let g = ClusterGraph::wire4();
    let mut worst: f64 = 0.0;
    let states = [
        ("canonical", build_canonical(&g, &[IDEAL_DB; 4]).unwrap()),
        ("preset", preset_paper_network(IDEAL_DB).unwrap().prepare().unwrap()),
    ];
    for (label, state) in &states {
        ledger.record(&format!("{label} 60 dB"), state);
        for n in nullifiers_of(&g) {
            worst = worst.max(n.variance(state, &g).unwrap());
        }
        let shaped = [
            remove_node(state, &g, 4, DEFAULT_GAIN).unwrap(),
            remove_node(state, &g, 3, DEFAULT_GAIN).unwrap(),
            shorten_wire(state, &g, 2, 3, DEFAULT_GAIN).unwrap(),
        ];
        for r in &shaped {
            ledger.record(&format!("{label} 60 dB shaped"), &r.ensemble);
            for n in nullifiers_of(&r.graph) {
                worst = worst.max(n.variance(&r.ensemble, &r.graph).unwrap());
            }
        }
    }
    verdict(worst < IDEAL_BOUND, format!("largest nullifier variance {worst:.2e} (bound {IDEAL_BOUND:.0e})"))
}

fn physicality(ledger: &mut Ledger) -> Outcome {
    let g = ClusterGraph::wire4();
    let lossless = preset_paper_network(5.0).unwrap().prepare().unwrap();
    for scenario in [Scenario::RemoveEdge, Scenario::RemoveInner, Scenario::ShortenWire] {
        let eta = calibrated(scenario).calibration.unwrap().eta;
        let detection = LossModel::uniform(LossStage::Detection, eta).unwrap();
        let initial = detection.apply_stage(&lossless, LossStage::Detection, g.nodes()).unwrap();
        ledger.record(&format!("{scenario} calibrated initial"), &initial);
        let protocol = match scenario {
            Scenario::RemoveEdge => ShapingProtocol::remove_node(&g, 4, DEFAULT_GAIN),
            Scenario::RemoveInner => ShapingProtocol::remove_node(&g, 3, DEFAULT_GAIN),
            _ => ShapingProtocol::shorten_wire(&g, 2, 3, DEFAULT_GAIN),
        }
        .unwrap();
        let shaped = protocol.ensemble(&lossless).unwrap();
        let out = protocol.output_graph().unwrap();
        let shaped = detection.apply_stage(&shaped, LossStage::Detection, out.nodes()).unwrap();
        ledger.record(&format!("{scenario} calibrated final"), &shaped);
    }
    verdict(
        ledger.worst >= PHYSICALITY_FLOOR,
        format!("{} states, smallest eigenvalue {:.2e} ({})", ledger.count, ledger.worst, ledger.worst_label),
    )
}

fn bloch_messiah_compiler() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB10C);
    let mut recomposition: f64 = 0.0;
    let mut state_gap: f64 = 0.0;
    for _ in 0..100 {
        let g = random_graph(&mut rng);
        let db: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..15.0)).collect();
        let s = canonical_symplectic(&g, &db).unwrap();
        recomposition = recomposition.max(bloch_messiah(&s).unwrap().recomposition_error(&s));
        let compiled = compile_network(&g, &db).unwrap().prepare().unwrap();
        state_gap = state_gap.max(compiled.max_abs_diff(&build_canonical(&g, &db).unwrap()));
    }
    let cz = SymplecticTransform::qnd(2, 0, 1, 1.0).unwrap();
    let mut factors = bloch_messiah(&cz).unwrap().squeeze_factors;
    factors.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let golden = [phi, phi, 1.0 / phi, 1.0 / phi];
    let golden_gap = factors.iter().zip(golden).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    verdict(
        recomposition < RECOMPOSITION_TOL && golden_gap < GOLDEN_TOL && state_gap < COMPILED_STATE_TOL,
        format!("recomposition {recomposition:.2e}, golden ratio gap {golden_gap:.2e}, compiled vs canonical {state_gap:.2e}"),
    )
}

fn monte_carlo_agreement() -> Outcome {
    let cfg = ExperimentConfig { scenario: Scenario::ShortenWire, trials: MC_TRIALS, seed: 7, ..Default::default() };
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    let mc = a.monte_carlo.as_ref().unwrap();
    let z = mc.covariance.max_z_score().unwrap();
    let same = a.monte_carlo == b.monte_carlo;
    verdict(z <= MC_SIGMAS && same, format!("max entrywise z {z:.2} at {MC_TRIALS} trials (tol {MC_SIGMAS}σ), rerun identical: {same}"))
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let results = vec![
        ("erasure identity", erasure_identity(&mut ledger)),
        ("nullifier preservation under removal", nullifier_preservation(&mut ledger)),
        ("wire shortening lossless value", shortening_value(&mut ledger)),
        ("published-number reproduction (calibrated)", published_reproduction()),
        ("residual squeezing", residual_squeezing(&mut ledger)),
        ("ideal limit at 60 dB", ideal_limit(&mut ledger)),
        ("physicality", physicality(&mut ledger)),
        ("Bloch-Messiah compiler", bloch_messiah_compiler()),
        ("Monte Carlo vs analytic covariance", monte_carlo_agreement()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("INFO criterion 4 alternative calibration: {}", published_alternative());
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
