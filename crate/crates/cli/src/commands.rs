// SPDX-License-Identifier: Apache-2.0

//! Subcommand bodies. Every output file starts with a `#` line carrying the
//! seed and the full parameter set.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use puf_gkm::attacks::{
    attack_vs_reconfiguration, collect_crps, es_attack, lr_attack, Attack, AttackResult, EsParams, LrParams,
    MipufAt,
};
use puf_gkm::bits::{Bits, Challenge};
use puf_gkm::costmodel::compare::REFERENCE_RATIO;
use puf_gkm::costmodel::{
    compare_schemes, energy_of, message_counts, message_lengths, optimal_subgroup_count, storage_overhead,
    GroupOp, ParamFile, SystemParams,
};
use puf_gkm::mipuf::{inter_config_variation, intra_config_variation, ChallengePolicy, VariationReport};
use puf_gkm::netsim::{run_scenario, sub_seed, Scenario};
use puf_gkm::protocol::message::wire_sizes;
use puf_gkm::protocol::{sample_complexity_bound, RekeyBoundParams};
use puf_gkm::puf_core::{calibrate_noise, NoiseCalibration};
use puf_gkm::{Arbiter, Geometry, Mipuf64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Common;

/// Single-PUF bit-error rate used when `--noise` is absent.
pub const DEFAULT_NOISE: f64 = 0.029;

pub enum Status {
    Ok,
    AssertionFailed,
}

fn geometry_text(g: &Geometry) -> String {
    format!("{}:{}:{}", g.nodes, g.m, g.n_stages)
}

fn header(command: &str, seed: u64, params: &[(&str, String)]) -> String {
    let mut s = format!("# puf-gkm {command} seed={seed}");
    for (k, v) in params {
        let _ = write!(s, " {k}={v}");
    }
    s.push('\n');
    s
}

fn write_out(dir: &Path, name: &str, header: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, format!("{header}{body}")).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn calibrated_sigma(seed: u64, g: &Geometry, ber: f64) -> Result<f64> {
    let cal = NoiseCalibration::new(g.n_stages, 1.0, sub_seed(seed, "calibration", 0));
    Ok(calibrate_noise(ber, &cal)?)
}

fn histogram_csv(columns: &[(&str, &VariationReport)]) -> String {
    let mut s = String::from("distance");
    for (name, _) in columns {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    let width = columns.iter().map(|(_, r)| r.histogram.len()).max().unwrap_or(0);
    for d in 0..width {
        let _ = write!(s, "{d}");
        for (_, r) in columns {
            let _ = write!(s, ",{}", r.histogram.get(d).copied().unwrap_or(0));
        }
        s.push('\n');
    }
    s
}

/// Fraction of comparisons with any bit wrong.
fn word_error(r: &VariationReport) -> f64 {
    1.0 - r.histogram[0] as f64 / r.comparisons.max(1) as f64
}

pub fn eval_puf(c: &Common, configs: usize, challenges: usize, intra_challenges: usize, repeats: usize) -> Result<Status> {
    let g = c.geometry();
    g.validate()?;
    let ber = c.noise.unwrap_or(DEFAULT_NOISE);
    let sigma = calibrated_sigma(c.seed, &g, ber)?;
    let mut puf = Mipuf64::sample(g, sub_seed(c.seed, "device", 0), sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(c.seed, "eval", 0));
    let inter = inter_config_variation(&puf, configs, challenges, &mut rng)?;
    let gamma = puf.random_seed(&mut rng);
    puf.reconfigure(gamma, ChallengePolicy::Keep, &Challenge::new(Bits::zeros(g.n_stages)))?;
    let raw = intra_config_variation(&puf, false, intra_challenges, repeats, &mut rng)?;
    let corrected = intra_config_variation(&puf, true, intra_challenges, repeats, &mut rng)?;
    let head = header(
        "eval-puf",
        c.seed,
        &[
            ("geometry", geometry_text(&g)),
            ("noise", ber.to_string()),
            ("sigma", format!("{sigma:.6}")),
            ("configs", configs.to_string()),
            ("challenges", challenges.to_string()),
            ("intra_challenges", intra_challenges.to_string()),
            ("repeats", repeats.to_string()),
        ],
    );
    let summary = format!(
        "inter_mean={:.6}\nintra_uncorrected={:.6}\nintra_corrected={:.6}\ncorrected_word_error={:.6}\n",
        inter.mean,
        raw.mean,
        corrected.mean,
        word_error(&corrected)
    );
    write_out(&c.out, "eval_puf_summary.txt", &head, &summary)?;
    write_out(&c.out, "inter_histogram.csv", &head, &histogram_csv(&[("count", &inter)]))?;
    write_out(
        &c.out,
        "intra_histogram.csv",
        &head,
        &histogram_csv(&[("uncorrected", &raw), ("corrected", &corrected)]),
    )?;
    print!("{head}{summary}");
    Ok(Status::Ok)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackChoice {
    Lr,
    Es,
    Both,
}

impl FromStr for AttackChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lr" => Ok(AttackChoice::Lr),
            "es" => Ok(AttackChoice::Es),
            "both" => Ok(AttackChoice::Both),
            _ => Err(format!("expected lr, es or both, got {s:?}")),
        }
    }
}

pub struct AttackOptions {
    pub crps: usize,
    pub bit: usize,
    pub choice: AttackChoice,
    pub phases: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub generations: usize,
}

pub fn attack(c: &Common, o: &AttackOptions) -> Result<Status> {
    let g = c.geometry();
    g.validate()?;
    let runs = c.runs.unwrap_or(5);
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    if o.bit >= g.m {
        bail!("--bit {} outside a {}-bit response", o.bit, g.m);
    }
    let lr = LrParams {
        learning_rate: o.learning_rate,
        epochs: o.epochs,
        ..LrParams::default()
    };
    let es = EsParams {
        generations: o.generations,
        ..EsParams::default()
    };
    es.validate()?;
    let arbiter = Arbiter::sample(sub_seed(c.seed, "arbiter", 0), g.n_stages, 1.0, 0.0)?;
    let mipuf = Mipuf64::sample(g, sub_seed(c.seed, "device", 0), 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(c.seed, "crps", 0));
    let gamma = mipuf.random_seed(&mut rng);
    let arbiter_data = collect_crps(&arbiter, o.crps, &mut rng)?;
    let mipuf_data = collect_crps(&MipufAt::new(&mipuf, &gamma)?, o.crps, &mut rng)?;
    let random_data = mipuf_data.with_random_labels(&mut rng);
    let mipuf_name = format!("mipuf-{}", g.nodes);
    let train_seed = sub_seed(c.seed, "train", 0);

    let mut results: Vec<AttackResult> = Vec::new();
    let pick = |want: AttackChoice| o.choice == want || o.choice == AttackChoice::Both;
    if pick(AttackChoice::Lr) {
        results.push(lr_attack::<f64>(&arbiter_data, "arbiter", 0, runs, &lr, train_seed)?);
        results.push(lr_attack::<f64>(&mipuf_data, &mipuf_name, o.bit, runs, &lr, train_seed)?);
        results.push(lr_attack::<f64>(&random_data, "random-labels", o.bit, runs, &lr, train_seed)?);
    }
    if pick(AttackChoice::Es) {
        results.push(es_attack::<f64>(&arbiter_data, "arbiter", 0, runs, &es, train_seed)?);
        results.push(es_attack::<f64>(&mipuf_data, &mipuf_name, o.bit, runs, &es, train_seed)?);
    }

    let head = header(
        "attack",
        c.seed,
        &[
            ("geometry", geometry_text(&g)),
            ("crps", o.crps.to_string()),
            ("bit", o.bit.to_string()),
            ("runs", runs.to_string()),
            ("learning_rate", lr.learning_rate.to_string()),
            ("epochs", lr.epochs.to_string()),
            ("l2", lr.l2.to_string()),
            ("es_mu", es.mu.to_string()),
            ("es_lambda", es.lambda.to_string()),
            ("es_generations", es.generations.to_string()),
            ("es_sigma0", es.sigma0.to_string()),
            ("es_fitness_rows", es.fitness_rows.to_string()),
            ("phases", o.phases.to_string()),
        ],
    );
    let mut csv = String::from(AttackResult::csv_header());
    for r in &results {
        csv.push_str(&r.csv_rows());
    }
    write_out(&c.out, "attack.csv", &head, &csv)?;

    let mut summary = String::new();
    for r in &results {
        let _ = writeln!(summary, "best {} {} {:.6}", r.attack, r.architecture, r.best);
    }
    for name in ["LR", "ES"] {
        let best = |arch: &str| results.iter().find(|r| r.attack == name && r.architecture == arch).map(|r| r.best);
        if let (Some(a), Some(m)) = (best("arbiter"), best(&mipuf_name)) {
            let _ = writeln!(summary, "separation {name} {:.6}", a - m);
        }
    }

    if o.phases >= 2 {
        let attack = if pick(AttackChoice::Lr) { Attack::Lr(lr) } else { Attack::Es(es) };
        let mut rc = String::from("attack,reconfigure,phase,holdout,stale\n");
        for reconfigure in [true, false] {
            let series = attack_vs_reconfiguration::<f64>(
                &mipuf,
                &attack,
                o.bit,
                o.crps,
                o.phases,
                reconfigure,
                sub_seed(c.seed, "reconfiguration", reconfigure as u64),
            )?;
            for p in &series {
                let _ = writeln!(rc, "{},{reconfigure},{},{:.6},{:.6}", attack.name(), p.phase, p.holdout, p.stale);
                let _ = writeln!(
                    summary,
                    "reconfiguration {} reconfigure={reconfigure} phase={} holdout={:.6} stale={:.6}",
                    attack.name(),
                    p.phase,
                    p.holdout,
                    p.stale
                );
            }
        }
        write_out(&c.out, "reconfiguration.csv", &head, &rc)?;
    }
    print!("{head}{summary}");
    Ok(Status::Ok)
}

pub fn simulate(c: &Common) -> Result<Status> {
    let path = c.scenario.as_ref().context("simulate needs --scenario <path>")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut sc: Scenario = text.parse().with_context(|| path.display().to_string())?;
    if let Some(g) = c.geometry {
        sc.settings.geometry = g;
    }
    if let Some(n) = c.noise {
        sc.settings.noise_ber = n;
    }
    sc.settings.validate()?;
    let energy = load_params(c)?.energy()?;
    let out = run_scenario(&sc, c.seed).with_context(|| path.display().to_string())?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    let s = &sc.settings;
    let head = header(
        "simulate",
        c.seed,
        &[
            ("scenario", path.display().to_string()),
            ("geometry", geometry_text(&s.geometry)),
            ("noise", s.noise_ber.to_string()),
            ("id_bits", s.id_bits.to_string()),
            ("subgroups", s.subgroups.to_string()),
            ("timeout_us", s.timeout_us.to_string()),
            ("latency_us", s.latency_us.to_string()),
            ("cipher", if s.cipher == puf_gkm::protocol::CipherMode::Identity { "identity" } else { "aes" }.to_string()),
            ("reliable_join", s.reliable_join.to_string()),
            ("max_attempts", s.max_attempts.to_string()),
            ("delta", s.bound_delta.to_string()),
            ("epsilon", s.bound_epsilon.to_string()),
        ],
    );
    let mut report = String::new();
    for a in &out.assertions {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(report, "{verdict} line {} {}: {}", a.line, a.name, a.detail);
    }
    let mut failed = !out.passed();
    for a in &out.attacks {
        if a.rejected() {
            let _ = writeln!(report, "attack rejected: {} (line {})", a.kind, a.line);
        } else {
            failed = true;
            let _ = writeln!(report, "attack NOT rejected: {} (line {})", a.kind, a.line);
        }
    }
    let _ = writeln!(
        report,
        "messages={} bits={} members={:?}",
        out.ledger.messages_sent(),
        out.ledger.bits_sent(),
        out.final_members
    );
    write_out(&c.out, &format!("{stem}.transcript.tsv"), &head, &out.transcript.to_tsv())?;
    write_out(&c.out, &format!("{stem}.ledger.csv"), &head, &out.ledger.to_csv(stem, &energy))?;
    write_out(&c.out, &format!("{stem}.assertions.txt"), &head, &report)?;
    print!("{head}{report}");
    Ok(if failed { Status::AssertionFailed } else { Status::Ok })
}

fn load_params(c: &Common) -> Result<ParamFile> {
    match &c.params {
        None => Ok(ParamFile::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(text.parse().with_context(|| p.display().to_string())?)
        }
    }
}

pub fn cost(c: &Common) -> Result<Status> {
    let pf = load_params(c)?;
    let p = pf.system(SystemParams::default())?;
    let energy = pf.energy()?;
    let (leap, ecpkc) = (pf.leap()?, pf.ecpkc()?);
    let sweep = pf.sweep()?;
    let sizes = wire_sizes(&p);
    let cmp = compare_schemes(&sweep, &p, &energy, &sizes, leap, ecpkc)?;

    let mut params: Vec<(&str, String)> = pf.entries().map(|(k, v)| (k, v.to_string())).collect();
    for (k, v) in [("a", p.a), ("b", p.b), ("c", p.c), ("l", p.l), ("N", p.n), ("M", p.m)] {
        if !params.iter().any(|(pk, _)| *pk == k) {
            params.push((k, v.to_string()));
        }
    }
    params.extend([
        ("E_P", format!("{:e}", energy.e_p)),
        ("E_H", format!("{:e}", energy.e_h)),
        ("E_R", format!("{:e}", energy.e_r)),
        ("E_X", format!("{:e}", energy.e_x)),
        ("E_A", format!("{:e}", energy.e_a)),
        ("e_tx", format!("{:e}", energy.e_tx)),
        ("e_rx", format!("{:e}", energy.e_rx)),
        ("leap", format!("{:e}/{:e}", leap.alpha, leap.beta)),
        ("ecpkc", format!("{:e}/{:e}", ecpkc.alpha, ecpkc.beta)),
    ]);
    params.sort_by(|a, b| a.0.cmp(b.0));
    params.dedup_by(|a, b| a.0 == b.0);
    let head = header("cost", c.seed, &params);

    write_out(&c.out, "cost_comparison.csv", &head, &cmp.to_csv())?;

    let lengths = message_lengths(&p);
    let mut formulas = String::from(
        "N,M,M_opt,len_k,len_u,len_join,len_leave,wire_k,wire_u,wire_join,wire_leave,\
         count_distribution,count_distribution_replies,count_join,count_leave,storage_control,storage_node\n",
    );
    for &n in &sweep {
        let q = p.with_group(n, p.m.min(n).max(1));
        let m_opt = if n >= 2 { optimal_subgroup_count(n)?.best } else { 1 };
        let dist = message_counts(GroupOp::Distribution, &q);
        let (sc, sn) = storage_overhead(&q);
        let _ = writeln!(
            formulas,
            "{n},{},{m_opt},{},{},{},{},{},{},{},{},{},{},{},{},{sc},{sn}",
            q.m,
            lengths.key_delivery,
            lengths.crp_update,
            lengths.join,
            lengths.leave,
            sizes.key_delivery,
            sizes.crp_update,
            sizes.join,
            sizes.leave,
            dist.counted,
            dist.with_replies,
            message_counts(GroupOp::Join, &q).counted,
            message_counts(GroupOp::Leave, &q).counted,
        );
    }
    write_out(&c.out, "cost_formulas.csv", &head, &formulas)?;

    let mut terms = String::from("op,actor,term,count,joules\n");
    for op in GroupOp::ALL {
        let report = energy_of(op, &p, &energy, &sizes)?;
        for (actor, term, count, joules) in report.term_rows(&energy) {
            let _ = writeln!(terms, "{},{actor},{term},{count},{joules:e}", op.name());
        }
        let _ = writeln!(terms, "{},control,total,,{:e}", op.name(), report.control_joules);
        let _ = writeln!(terms, "{},global,total,,{:e}", op.name(), report.global_joules);
    }
    write_out(&c.out, "energy_terms.csv", &head, &terms)?;

    let below = cmp.rows.iter().all(|r| r.ours < r.ecpkc);
    let leap_dominates = cmp.rows.iter().filter(|r| r.n >= 50).all(|r| r.leap > r.ours && r.leap > r.ecpkc);
    let summary = format!(
        "mean_ratio_ours_over_ecpkc={:.6}\nreference_ratio={REFERENCE_RATIO}\nr2_leap_quadratic={:.6}\n\
         r2_ecpkc_linear={:.6}\nr2_ours_linear={:.6}\nours_below_ecpkc_everywhere={below}\n\
         leap_dominates_from_50={leap_dominates}\n",
        cmp.mean_ratio, cmp.r2_leap, cmp.r2_ecpkc, cmp.r2_ours
    );
    write_out(&c.out, "cost_summary.txt", &head, &summary)?;
    print!("{head}{summary}");
    Ok(Status::Ok)
}

pub fn rekey_bound(
    c: &Common,
    m: Option<u64>,
    n: Option<u64>,
    k: Option<u64>,
    delta: f64,
    epsilon: f64,
) -> Result<Status> {
    let d = RekeyBoundParams::for_geometry(&c.geometry(), delta, epsilon);
    let p = RekeyBoundParams {
        m_nodes: m.unwrap_or(d.m_nodes),
        n_pufs: n.unwrap_or(d.n_pufs),
        k_vc: k.unwrap_or(d.k_vc),
        ..d
    };
    let bound = sample_complexity_bound(&p)?;
    let head = header(
        "rekey-bound",
        c.seed,
        &[
            ("m", p.m_nodes.to_string()),
            ("n", p.n_pufs.to_string()),
            ("k", p.k_vc.to_string()),
            ("delta", delta.to_string()),
            ("epsilon", epsilon.to_string()),
        ],
    );
    println!("{head}bound={bound}");
    Ok(Status::Ok)
}
