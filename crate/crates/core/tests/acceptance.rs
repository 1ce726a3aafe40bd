//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! with details on the indented lines below it.
//!
//! Criteria 2 and 8 check the implementation itself and always fail the
//! run. The others reproduce empirical findings; their misses are reported
//! but only fail the run when `ACCEPTANCE_STRICT` is set.

use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use purity_core::alignment::{align, greedy_align};
use purity_core::cbm::Bottleneck;
use purity_core::data::{gen_correlated_concepts, gen_impure_reps, gen_pure_reps, gen_spurious_tabular, gen_tabular_toy, RepresentationSet};
use purity_core::experiments::{
    bottleneck_correlation, capacity, identity_ois, intervention, probe_robustness, spurious, table1, Table1Config,
    CAPACITIES,
};
use purity_core::niche::{nis, niche_impurity_masked, NicheConfig};
use purity_core::numeric::{auc_roc, loss_and_grad, trapezoid, Loss, Mlp, MlpSpec, OutputActivation};
use purity_core::purity::{ois, ProbeConfig};
use purity_core::rng::rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    passed: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.passed &= ok;
        self.details.push(format!("{} {what}", if ok { "ok  " } else { "MISS" }));
    }
}

fn run(id: u32, name: &str, budget_secs: u64, body: impl FnOnce(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut out = Outcome::new();
    body(&mut out);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    out.check(elapsed <= budget, format!("runtime {:.1} s (budget {budget_secs} s)", elapsed.as_secs_f64()));
    println!("{} criterion {id}: {name}", if out.passed { "PASS" } else { "FAIL" });
    for d in &out.details {
        println!("    {d}");
    }
    out.passed
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn table1_reproduction(out: &mut Outcome) {
    let t = table1(&SEEDS, &Table1Config::default()).expect("table 1 runs");
    let m = |k: &str| t.means[k];
    let p = |k: &str| t.p_values[k];
    out.check((0.02..=0.10).contains(&m("ois_pure")), format!("mean OIS(pure) {:.4} in [0.02, 0.10]", m("ois_pure")));
    out.check((0.15..=0.32).contains(&m("ois_impure")), format!("mean OIS(impure) {:.4} in [0.15, 0.32]", m("ois_impure")));
    out.check((0.58..=0.74).contains(&m("nis_pure")), format!("mean NIS(pure) {:.4} in [0.58, 0.74]", m("nis_pure")));
    out.check(
        m("nis_impure") > m("nis_pure"),
        format!("mean NIS(impure) {:.4} > NIS(pure) {:.4}", m("nis_impure"), m("nis_pure")),
    );
    out.check(p("ois") < 0.05, format!("Welch p(OIS) {:.3e} < 0.05", p("ois")));
    out.check(p("nis") < 0.05, format!("Welch p(NIS) {:.3e} < 0.05", p("nis")));
    out.check(p("mig") > 0.05, format!("Welch p(MIG) {:.3} > 0.05", p("mig")));
    out.check(p("sap") > 0.05, format!("Welch p(SAP) {:.3} > 0.05", p("sap")));
    for r in &t.rows {
        out.details.push(format!(
            "     seed {} {:<6} OIS {:.4} NIS {:.4} MIG {:.4} SAP {:.4}",
            r.seed, r.condition, r.ois, r.nis, r.mig, r.sap
        ));
    }
}

fn identity_zero(out: &mut Outcome) {
    let values = identity_ois(&SEEDS, &Table1Config::default()).expect("identity OIS runs");
    for (seed, v) in SEEDS.iter().zip(&values) {
        out.check(*v <= 0.02, format!("seed {seed}: identity OIS {v:.4} <= 0.02"));
    }
}

fn bottleneck_fig(out: &mut Outcome) {
    let rows = bottleneck_correlation(&SEEDS).expect("CBMs train");
    let by = |b: Bottleneck| rows.iter().filter(move |r| r.bottleneck == b);
    let task = |b| mean(&by(b).map(|r| r.task_accuracy).collect::<Vec<_>>());
    let concept = |b| mean(&by(b).map(|r| r.concept_accuracy).collect::<Vec<_>>());
    let task_gap = 100.0 * (task(Bottleneck::Sigmoid) - task(Bottleneck::Logits)).abs();
    let concept_gap = 100.0 * (concept(Bottleneck::Sigmoid) - concept(Bottleneck::Logits)).abs();
    out.check(task_gap <= 2.0, format!("task accuracy gap {task_gap:.2} points <= 2"));
    out.check(concept_gap <= 2.0, format!("concept accuracy gap {concept_gap:.2} points <= 2"));
    let mut larger = 0;
    for pair in rows.chunks(2) {
        let (s, l) = (&pair[0], &pair[1]);
        assert_eq!((s.bottleneck, l.bottleneck), (Bottleneck::Sigmoid, Bottleneck::Logits));
        larger += usize::from(l.max_inter_concept_corr > s.max_inter_concept_corr);
        out.details.push(format!(
            "     seed {}: sigmoid acc {:.3}/{:.3} max|r| {:.3}; logits acc {:.3}/{:.3} max|r| {:.3}",
            s.seed, s.task_accuracy, s.concept_accuracy, s.max_inter_concept_corr, l.task_accuracy, l.concept_accuracy,
            l.max_inter_concept_corr
        ));
    }
    out.check(larger >= 4, format!("logits max inter-concept |pearson| larger on {larger}/5 seeds (need >= 4)"));
}

fn capacity_fig(out: &mut Outcome) {
    let r = capacity(&SEEDS, &CAPACITIES).expect("capacity sweep runs");
    out.check(
        r.encoder_spearman <= -0.8,
        format!("Spearman(capacity, seed-mean encoder OIS) {:.3} <= -0.8", r.encoder_spearman),
    );
    out.check(
        r.encoder_range > r.predictor_range,
        format!("encoder OIS range {:.4} > predictor OIS range {:.4}", r.encoder_range, r.predictor_range),
    );
    out.details.push(format!("     capacities {:?}", r.capacities));
    out.details.push(format!("     encoder OIS   {:.4?}", r.encoder_mean_ois));
    out.details.push(format!("     predictor OIS {:.4?}", r.predictor_mean_ois));
}

fn intervention_fig(out: &mut Outcome) {
    let r = intervention(&SEEDS).expect("intervention experiment runs");
    for pair in ["bottleneck", "capacity"] {
        let outcomes: Vec<_> = r.pairs.iter().filter(|p| p.pair == pair).collect();
        let hits = outcomes.iter().filter(|p| p.degrader_more_impure).count();
        out.check(
            hits >= 4,
            format!("{pair} pair: degrading model has higher OIS and NIS on {hits}/5 seeds (need >= 4)"),
        );
    }
    let sigmoid: Vec<f64> = r.records.iter().filter(|m| m.model == "sigmoid").map(|m| m.gain).collect();
    let gain = mean(&sigmoid);
    out.check(gain >= 0.0, format!("sigmoid curve final - initial (seed mean) {gain:+.4} >= 0"));
    for m in &r.records {
        out.details.push(format!(
            "     seed {} {:<11} curve {:.3?} OIS {:.4} NIS {:.4}",
            m.seed, m.model, m.accuracy_curve, m.ois, m.nis
        ));
    }
}

fn spurious_fig(out: &mut Outcome) {
    let rows = spurious(&SEEDS).expect("spurious experiment runs");
    let (mut impurer, mut worse, mut close) = (0, 0, 0);
    let mut lines = Vec::new();
    for pair in rows.chunks(2) {
        let (c, s) = (&pair[0], &pair[1]);
        impurer += usize::from(s.ois > c.ois && s.nis > c.nis);
        worse += usize::from(100.0 * (c.task_accuracy - s.task_accuracy) >= 3.0);
        close += usize::from(100.0 * (c.concept_auc - s.concept_auc).abs() <= 3.0);
        lines.push(format!(
            "     seed {}: clean acc {:.3} AUC {:.3} OIS {:.4} NIS {:.4}; corrupted acc {:.3} AUC {:.3} OIS {:.4} NIS {:.4}",
            c.seed, c.task_accuracy, c.concept_auc, c.ois, c.nis, s.task_accuracy, s.concept_auc, s.ois, s.nis
        ));
    }
    out.check(impurer >= 4, format!("corrupted model has higher OIS and NIS on {impurer}/5 seeds (need >= 4)"));
    out.check(worse >= 4, format!("corrupted clean-test task accuracy >= 3 points lower on {worse}/5 seeds (need >= 4)"));
    out.check(close >= 4, format!("clean-test concept AUC within 3 points on {close}/5 seeds (need >= 4)"));
    out.details.extend(lines);
}

fn probe_robust(out: &mut Outcome) {
    let r = probe_robustness(&SEEDS, &Table1Config::default()).expect("robustness sweep runs");
    out.check(r.ois_spread < 0.05, format!("OIS spread over psi hidden {{32,64,128}}: {:.4} < 0.05", r.ois_spread));
    out.check(
        r.nis_spread < 0.05,
        format!("NIS spread over f hidden {{[16,16],[20,20],[64,64]}}: {:.4} < 0.05", r.nis_spread),
    );
    for (k, v) in &r.means {
        out.details.push(format!("     {k}: {v:.4}"));
    }
}

fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn max_fd_error(spec: &MlpSpec, loss: Loss, seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, m) = (4, *spec.layer_sizes.last().unwrap());
    let x = Array2::from_shape_fn((b, spec.layer_sizes[0]), |_| r.random_range(-1.0..1.0));
    let y = match spec.output {
        OutputActivation::Softmax => Array2::from_shape_fn((b, m), |(i, j)| f64::from(u8::from(i % m == j))),
        _ => Array2::from_shape_fn((b, m), |_| f64::from(u8::from(r.random::<bool>()))),
    };
    let mut net = Mlp::new(spec, seed).unwrap();
    let loss_at = |net: &Mlp| {
        let logits = net.logits(x.view());
        loss_and_grad(loss, spec.output, &logits, y.view()).unwrap().0
    };
    let trace = net.forward_cached(x.view());
    let (_, grad) = loss_and_grad(loss, spec.output, &trace.logits, y.view()).unwrap();
    let (grads, _) = net.backward(&trace, &grad);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for l in 0..grads.layers.len() {
        let (rows, cols) = grads.layers[l].weights.dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = net.layers()[l].weights[[i, j]];
                net.layers_mut()[l].weights[[i, j]] = orig + eps;
                let up = loss_at(&net);
                net.layers_mut()[l].weights[[i, j]] = orig - eps;
                let down = loss_at(&net);
                net.layers_mut()[l].weights[[i, j]] = orig;
                let fd = (up - down) / (2.0 * eps);
                let an = grads.layers[l].weights[[i, j]];
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
            }
        }
    }
    worst
}

fn properties(out: &mut Outcome) {
    let mut r = rng(2024);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = r.random_range(2..40);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8u8))).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
        labels[0] = true;
        labels[1] = false;
        if auc_roc(&scores, &labels).unwrap() != brute_force_auc(&scores, &labels) {
            mismatches += 1;
        }
    }
    out.check(mismatches == 0, format!("AUC equals brute-force pairwise oracle on 1000 instances ({mismatches} mismatches)"));

    let cases = [
        (MlpSpec::new(3, &[5, 4], 1, OutputActivation::Sigmoid), Loss::BinaryCrossEntropy),
        (MlpSpec::new(3, &[6], 4, OutputActivation::Softmax), Loss::CategoricalCrossEntropy),
        (MlpSpec::new(2, &[5], 2, OutputActivation::Identity), Loss::MeanSquaredError),
    ];
    let worst = cases
        .iter()
        .enumerate()
        .map(|(i, (spec, loss))| max_fd_error(spec, *loss, i as u64 + 1))
        .fold(0.0, f64::max);
    out.check(worst < 1e-4, format!("MLP gradients vs finite differences: max relative error {worst:.2e} < 1e-4"));

    let mut exact = true;
    for _ in 0..200 {
        let (a, b) = (r.random_range(-5.0..5.0), r.random_range(-5.0..5.0));
        let mut xs: Vec<f64> = (0..r.random_range(2..12)).map(|_| r.random_range(-3.0..3.0)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if xs.len() < 2 {
            continue;
        }
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let exact_value = a * (hi * hi - lo * lo) / 2.0 + b * (hi - lo);
        exact &= (trapezoid(&xs, &ys).unwrap() - exact_value).abs() <= 1e-9 * (1.0 + exact_value.abs());
    }
    out.check(exact, "trapezoid exact on 200 random linear functions".into());

    let mut recovered = true;
    for trial in 0..100 {
        let k = 2 + trial % 5;
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut r);
        let mut m = Array2::from_shape_fn((k, k), |_| r.random_range(0.5..0.7));
        for (j, &i) in perm.iter().enumerate() {
            m[[j, i]] = r.random_range(0.8..1.0);
        }
        recovered &= greedy_align(m.view()).unwrap().mapping == perm;
    }
    let data = gen_correlated_concepts(600, 4, 0.25, 8).unwrap();
    let pure = gen_pure_reps(&data, 8).unwrap();
    let planted = [3usize, 1, 0, 2];
    let shuffled = RepresentationSet::new(pure.values().select(Axis(1), &planted), false).unwrap();
    let (_, map) = align(&shuffled, &data, &ProbeConfig::default(), 8).unwrap();
    recovered &= map.mapping == vec![2, 1, 3, 0];
    out.check(recovered, "greedy alignment recovers planted permutations (100 matrices + shuffled pure reps)".into());

    let (train, test): (Vec<usize>, Vec<usize>) = ((0..480).collect(), (480..600).collect());
    let ni = niche_impurity_masked(&pure, &data, 0, &[0, 1, 2, 3], &ProbeConfig::niche_classifier(), (&train, &test), 1);
    out.check(matches!(ni, Ok(Some(v)) if v == 0.5), format!("NI = 0.5 on empty complement ({ni:?})"));

    let small = gen_correlated_concepts(400, 3, 0.25, 5).unwrap();
    let same_data = small.concepts() == gen_correlated_concepts(400, 3, 0.25, 5).unwrap().concepts();
    let pure_a = gen_pure_reps(&small, 5).unwrap();
    let impure_a = gen_impure_reps(&small, 5).unwrap();
    let same_reps = pure_a.values() == gen_pure_reps(&small, 5).unwrap().values()
        && impure_a.values() == gen_impure_reps(&small, 5).unwrap().values();
    let toy = gen_tabular_toy(0.5, 300, 5).unwrap();
    let same_toy = toy.features() == gen_tabular_toy(0.5, 300, 5).unwrap().features();
    let same_spurious = gen_spurious_tabular(&toy, 0.75, 5).unwrap().features()
        == gen_spurious_tabular(&toy, 0.75, 5).unwrap().features();
    let cfg = NicheConfig {
        beta_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        ..NicheConfig::default()
    };
    let o1 = ois(&impure_a, &small, &ProbeConfig::default(), 5).unwrap();
    let o2 = ois(&impure_a, &small, &ProbeConfig::default(), 5).unwrap();
    let n1 = nis(&impure_a, &small, &cfg, 5).unwrap();
    let n2 = nis(&impure_a, &small, &cfg, 5).unwrap();
    let deterministic = same_data
        && same_reps
        && same_toy
        && same_spurious
        && o1.to_bits() == o2.to_bits()
        && n1.nis.to_bits() == n2.nis.to_bits()
        && n1.per_beta_ni == n2.per_beta_ni;
    out.check(deterministic, "generators and metrics bit-deterministic under fixed seeds".into());
}

fn main() {
    let results = [
        (run(1, "pure vs impure soft representations", 15 * 60, table1_reproduction), false),
        (run(2, "identity representations score OIS <= 0.02", 30, identity_zero), true),
        (run(3, "sigmoid vs logits bottleneck: equal accuracy, different inter-concept correlation", 10 * 60, bottleneck_fig), false),
        (run(4, "capacity ablation: encoder capacity drives OIS", 20 * 60, capacity_fig), false),
        (run(5, "intervention degradation tracks impurity", 20 * 60, intervention_fig), false),
        (run(6, "spurious feature detection", 15 * 60, spurious_fig), false),
        (run(7, "probe architecture robustness", 20 * 60, probe_robust), false),
        (run(8, "property suites", 5 * 60, properties), true),
    ];
    let passed = results.iter().filter(|(p, _)| *p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    if results.iter().any(|&(p, required)| !p && (required || strict)) {
        std::process::exit(1);
    }
}
