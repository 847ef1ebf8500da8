//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Criteria 8 to 10 share two `wtisent replay` runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::str::FromStr;
use std::time::{Duration, Instant};

use chrono::{Duration as Days, NaiveDate};
use dashu_float::DBig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wtisent::eval::{auroc, read_metric_summaries, spearman_ic};
use wtisent::extraction::{ModelId, SentimentAdapter, SentimentVector, StubAdapter, WarningCounter, RELEVANCE_FLOOR};
use wtisent::features::{assemble_feature_matrix, build_weekly_table, FeatureMatrix, FeatureSetId, WeeklyAggregate};
use wtisent::gbdt::{fit, fit_with_trace, BoostedEnsemble, TrainConfig, TreeNode};
use wtisent::ingestion::{
    make_labels, weekly_close_series, weekly_log_returns, Article, CorpusWindow, NewsClient, NewsClientConfig,
    PriceBar, WeekKey,
};
use wtisent::report::{build_features, generate, write_synthetic_inputs, SyntheticSpec};
use wtisent::shap::{brute_force_shapley, tree_shap};
use wtisent::tpe::{optimize, ParamKind, ParamSpec, SearchSpace, TpeConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_secs {
        Ok(())
    } else {
        Err(format!("{what} took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64()))
    }
}

// 1 -------------------------------------------------------------------------

fn returns_and_labels() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = NaiveDate::from_ymd_opt(2020, 12, 21).unwrap();
    // 60 weekday bars across a year boundary, with a few holidays skipped
    let mut texts = Vec::new();
    let mut bars = Vec::new();
    let mut day = start;
    let mut level = 50.0f64;
    while bars.len() < 60 {
        let weekday = day.format("%u").to_string().parse::<u32>().unwrap();
        if weekday <= 5 && !rng.gen_bool(0.08) {
            level *= 1.0 + rng.gen_range(-0.04..0.04);
            let text = format!("{:.4}", level);
            bars.push(PriceBar {
                trade_date: day,
                close: text.parse().unwrap(),
            });
            texts.push((day, text));
        }
        day += Days::days(1);
    }
    let closes = weekly_close_series(&bars).map_err(|e| e.to_string())?;
    let returns = weekly_log_returns(&closes).map_err(|e| e.to_string())?;
    let labels = make_labels(&returns);

    // oracle: last bar of each Monday-anchored block, ln of the exact decimal ratio
    let mut weekly: Vec<&str> = Vec::new();
    let mut last_block = None;
    for (d, text) in &texts {
        let block = (*d - start).num_days().div_euclid(7);
        if last_block == Some(block) {
            *weekly.last_mut().unwrap() = text;
        } else {
            weekly.push(text);
            last_block = Some(block);
        }
    }
    ensure!(weekly.len() == closes.len(), "{} weekly closes, oracle {}", closes.len(), weekly.len());
    let exact = |s: &str| DBig::from_str(s).unwrap().with_precision(60).value();
    let oracle: Vec<f64> = weekly
        .windows(2)
        .map(|p| (exact(p[1]) / exact(p[0])).ln().to_f64().value())
        .collect();
    ensure!(returns.len() == oracle.len(), "return count {}", returns.len());
    let worst = returns
        .entries
        .iter()
        .zip(&oracle)
        .map(|((_, r), o)| (r - o).abs())
        .fold(0.0, f64::max);
    ensure!(worst <= 1e-12, "max return error {worst:e}");
    ensure!(labels.len() == returns.len() - 1, "label count {}", labels.len());
    for (i, (w, y)) in labels.entries.iter().enumerate() {
        ensure!(*w == returns.entries[i].0, "label week mismatch at {i}");
        ensure!(*y == (oracle[i + 1] > 0.0), "label {i} disagrees with next return");
    }
    within(t0.elapsed(), 1.0, "criterion")?;
    Ok(format!("{} returns, max error {worst:.1e}", returns.len()))
}

// 2 -------------------------------------------------------------------------

fn stub_vectors(articles: &[Article]) -> Vec<SentimentVector> {
    let warn = WarningCounter::default();
    let mut out = Vec::new();
    for m in ModelId::ALL {
        let stub = StubAdapter::new(m, 3);
        out.extend(articles.iter().map(|a| stub.score(a, &warn).expect("stub scores")));
    }
    out
}

fn bits(row: &[Option<f64>]) -> Vec<Option<u64>> {
    row.iter().map(|c| c.map(f64::to_bits)).collect()
}

fn no_look_ahead() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticSpec {
        n_weeks: 100,
        seed: 2,
        ..Default::default()
    };
    let data = generate(&spec).map_err(|e| e.to_string())?;
    let cache = dir.path().join("corpus");
    write_synthetic_inputs(&data, &cache, &dir.path().join("prices.csv")).map_err(|e| e.to_string())?;
    let client = NewsClient::new(
        NewsClientConfig {
            base_url: "http://127.0.0.1:9".into(),
            cache_dir: cache,
            ..Default::default()
        },
        CorpusWindow {
            start: spec.start,
            end: spec.end(),
        },
    )
    .map_err(|e| e.to_string())?;
    let articles = client.fetch_corpus().map_err(|e| e.to_string())?;
    let returns =
        weekly_log_returns(&weekly_close_series(&data.bars).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let first = WeekKey::of_date(spec.start);
    let last = WeekKey::of_date(spec.end());
    let (base, _) = build_features(&articles, &stub_vectors(&articles), &returns, first, last).map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let weeks = first.range_inclusive(last);
    let mut checked_rows = 0;
    for _ in 0..20 {
        let t = weeks[rng.gen_range(0..weeks.len())];
        let mutated: Vec<Article> = articles
            .iter()
            .map(|a| {
                let mut a = a.clone();
                if a.published_at > t.end() {
                    a.title = format!("Revised: {}", a.title.to_uppercase());
                    a.body = "Crude will plunge as the glut may slide further. Bearish outlook.".into();
                }
                a
            })
            .collect();
        let (m, _) =
            build_features(&mutated, &stub_vectors(&mutated), &returns, first, last).map_err(|e| e.to_string())?;
        let mut differs_later = false;
        for (i, w) in m.weeks.iter().enumerate() {
            if *w <= t {
                ensure!(bits(&m.rows[i]) == bits(&base.rows[i]), "t={t}: row {w} changed");
                checked_rows += 1;
            } else if bits(&m.rows[i]) != bits(&base.rows[i]) {
                differs_later = true;
            }
        }
        // the mutation must be visible after t, or the check proves nothing
        ensure!(differs_later || t >= *m.weeks.last().unwrap(), "t={t}: mutation had no effect");
    }
    within(t0.elapsed(), 10.0, "criterion")?;
    Ok(format!("{} articles, 20 cut-offs, {checked_rows} rows compared", articles.len()))
}

// 3 -------------------------------------------------------------------------

fn random_vector(rng: &mut ChaCha8Rng, id: String, model: ModelId, fixed_relevance: Option<f64>) -> SentimentVector {
    let mut v = SentimentVector::empty(id, model);
    match model {
        ModelId::LlmA | ModelId::LlmB => {
            let r = fixed_relevance.unwrap_or_else(|| rng.gen_range(0.0..1.0));
            v.relevance = Some(r);
            if r >= RELEVANCE_FLOOR {
                v.polarity = Some(rng.gen_range(-1.0..=1.0));
                v.intensity = Some(rng.gen_range(0.0..=1.0));
                v.uncertainty = Some(rng.gen_range(0.0..=1.0));
                v.forwardness = Some(rng.gen_range(0.0..=1.0));
            }
        }
        ModelId::Classifier => {
            v.polarity = Some(rng.gen_range(-1.0..=1.0));
            v.intensity = Some(rng.gen_range(0.0..=1.0));
        }
        ModelId::Vendor => v.polarity = Some(rng.gen_range(-1.0..=1.0)),
    }
    v
}

fn brute_mean(xs: &[Option<f64>], ws: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xs.len() {
        if let Some(x) = xs[i] {
            num += ws[i] * x;
            den += ws[i];
        }
    }
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

fn brute_std(xs: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = xs.iter().flatten().copied().collect();
    if v.is_empty() {
        return None;
    }
    if v.len() == 1 {
        return Some(0.0);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (v.len() - 1) as f64).sqrt())
}

fn agree(a: Option<f64>, b: Option<f64>, what: &str, week: WeekKey) -> Result<f64, String> {
    match (a, b) {
        (None, None) => Ok(0.0),
        (Some(x), Some(y)) if (x - y).abs() <= 1e-12 => Ok((x - y).abs()),
        _ => Err(format!("{week} {what}: got {a:?}, oracle {b:?}")),
    }
}

fn aggregation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let weeks = WeekKey::new(2015, 1).unwrap().range_inclusive(WeekKey::new(2024, 30).unwrap());
    let weeks = &weeks[..500];
    let mut vectors = Vec::new();
    let mut article_weeks = HashMap::new();
    let mut by_week: BTreeMap<(ModelId, WeekKey), Vec<SentimentVector>> = BTreeMap::new();
    for &w in weeks {
        let n = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..9) };
        for k in 0..n {
            let id = format!("{w}-{k}");
            article_weeks.insert(id.clone(), w);
            for m in ModelId::ALL {
                let v = random_vector(&mut rng, id.clone(), m, None);
                by_week.entry((m, w)).or_default().push(v.clone());
                vectors.push(v);
            }
        }
    }
    let table = build_weekly_table(&vectors, &article_weeks, weeks).map_err(|e| e.to_string())?;

    let mut worst: f64 = 0.0;
    for m in ModelId::ALL {
        let rows = &table[&m];
        let mut prev: Option<&WeeklyAggregate> = None;
        for (agg, &w) in rows.iter().zip(weeks) {
            let empty = Vec::new();
            let vs = by_week.get(&(m, w)).unwrap_or(&empty);
            ensure!(agg.article_count == vs.len(), "{w} {m}: count {}", agg.article_count);
            let ws: Vec<f64> = vs.iter().map(|v| if m.is_chat() { v.relevance.unwrap() } else { 1.0 }).collect();
            let col = |f: fn(&SentimentVector) -> Option<f64>| vs.iter().map(f).collect::<Vec<_>>();
            let p = brute_mean(&col(|v| v.polarity), &ws);
            let u = brute_mean(&col(|v| v.uncertainty), &ws);
            let f = brute_mean(&col(|v| v.forwardness), &ws);
            worst = worst.max(agree(agg.polarity_mean, p, "polarity mean", w)?);
            worst = worst.max(agree(agg.intensity_mean, brute_mean(&col(|v| v.intensity), &ws), "intensity mean", w)?);
            worst = worst.max(agree(agg.uncertainty_mean, u, "uncertainty mean", w)?);
            worst = worst.max(agree(agg.forwardness_mean, f, "forwardness mean", w)?);
            worst = worst.max(agree(agg.polarity_std, brute_std(&col(|v| v.polarity)), "polarity std", w)?);
            worst = worst.max(agree(agg.uncertainty_std, brute_std(&col(|v| v.uncertainty)), "uncertainty std", w)?);
            let rel = col(|v| v.relevance);
            worst = worst.max(agree(agg.relevance_mean, brute_mean(&rel, &vec![1.0; rel.len()]), "relevance mean", w)?);

            let diff = |cur: Option<f64>, old: Option<f64>| match (cur, old) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            };
            let (mp, mu, mf) = match (vs.is_empty(), prev) {
                (false, Some(q)) => (
                    diff(p, q.polarity_mean),
                    diff(u, q.uncertainty_mean),
                    diff(f, q.forwardness_mean),
                ),
                _ => (None, None, None),
            };
            worst = worst.max(agree(agg.polarity_momentum, mp, "polarity momentum", w)?);
            worst = worst.max(agree(agg.uncertainty_momentum, mu, "uncertainty momentum", w)?);
            worst = worst.max(agree(agg.forwardness_momentum, mf, "forwardness momentum", w)?);
            if !vs.is_empty() {
                prev = Some(agg);
            }
        }
    }

    // equal relevance weights reduce to the plain mean
    let mut eq_vectors = Vec::new();
    let mut eq_weeks = HashMap::new();
    for k in 0..40 {
        let id = format!("eq{k}");
        eq_weeks.insert(id.clone(), weeks[0]);
        eq_vectors.push(random_vector(&mut rng, id, ModelId::LlmA, Some(0.37)));
    }
    let eq = build_weekly_table(&eq_vectors, &eq_weeks, &weeks[..1]).map_err(|e| e.to_string())?;
    let plain = eq_vectors.iter().map(|v| v.polarity.unwrap()).sum::<f64>() / 40.0;
    let got = eq[&ModelId::LlmA][0].polarity_mean.unwrap();
    ensure!((got - plain).abs() <= 1e-12, "equal weights: {got} vs plain mean {plain}");
    Ok(format!("500 weeks x 4 models, max error {worst:.1e}"))
}

// 4 -------------------------------------------------------------------------

const REFERENCE_COLUMNS: [&str; 31] = [
    "gpt_article_count",
    "gpt_relevance_mean",
    "gpt_polarity_mean",
    "gpt_intensity_mean",
    "gpt_uncertainty_mean",
    "gpt_forwardness_mean",
    "gpt_polarity_std",
    "gpt_uncertainty_std",
    "gpt_polarity_momentum",
    "gpt_uncertainty_momentum",
    "gpt_forwardness_momentum",
    "llama_article_count",
    "llama_relevance_mean",
    "llama_polarity_mean",
    "llama_intensity_mean",
    "llama_uncertainty_mean",
    "llama_forwardness_mean",
    "llama_polarity_std",
    "llama_uncertainty_std",
    "llama_polarity_momentum",
    "llama_uncertainty_momentum",
    "llama_forwardness_momentum",
    "finbert_article_count",
    "finbert_polarity_mean",
    "finbert_polarity_std",
    "finbert_intensity_mean",
    "finbert_polarity_momentum",
    "av_article_count",
    "av_polarity_mean",
    "av_polarity_std",
    "av_polarity_momentum",
];

fn schema_fidelity() -> Outcome {
    let weeks = WeekKey::new(2021, 1).unwrap().range_inclusive(WeekKey::new(2021, 6).unwrap());
    let table = build_weekly_table(&[], &HashMap::new(), &weeks).map_err(|e| e.to_string())?;
    let prefixes: [(FeatureSetId, &[&str], usize); 6] = [
        (FeatureSetId::AvBaseline, &["av_"], 4),
        (FeatureSetId::Tradition, &["av_", "finbert_"], 9),
        (FeatureSetId::Gpt, &["gpt_"], 11),
        (FeatureSetId::Llama, &["llama_"], 11),
        (FeatureSetId::Llm, &["gpt_", "llama_"], 22),
        (FeatureSetId::GptFinbert, &["gpt_", "finbert_"], 16),
    ];
    let mut counts = Vec::new();
    for (set, groups, n) in prefixes {
        let m = assemble_feature_matrix(&table, set, &weeks).map_err(|e| e.to_string())?;
        let expected: Vec<&str> = groups
            .iter()
            .flat_map(|g| REFERENCE_COLUMNS.iter().copied().filter(move |c| c.starts_with(g)))
            .collect();
        ensure!(m.columns.len() == n, "{set}: {} columns, expected {n}", m.columns.len());
        ensure!(m.columns == expected, "{set}: names {:?}", m.columns);
        ensure!(m.rows.iter().all(|r| r.len() == n), "{set}: ragged rows");
        counts.push(n.to_string());
    }
    Ok(format!("column counts {{{}}}", counts.join(", ")))
}

// 5 -------------------------------------------------------------------------

fn midranks(xs: &[f64]) -> Vec<f64> {
    // rank = 1 + #smaller + (#equal - 1) / 2
    xs.iter()
        .map(|&x| {
            let smaller = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_auc, mut worst_ic, mut worst_closed, mut worst_comp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut instances = 0;
    while instances < 1000 {
        let n = rng.gen_range(2..=200);
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let pos = labels.iter().filter(|&&y| y).count();
        if pos == 0 || pos == n {
            continue;
        }
        instances += 1;
        let grid = rng.gen_range(2..30);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..grid) as f64 / grid as f64).collect();
        let (mut good, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        good += 1.0;
                    } else if scores[i] == scores[j] {
                        good += 0.5;
                    }
                }
            }
        }
        let a = auroc(&labels, &scores).map_err(|e| e.to_string())?;
        worst_auc = worst_auc.max((a - good / pairs).abs());

        if n >= 3 {
            let realized: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..5) as f64 / 100.0).collect();
            let (ra, rb) = (midranks(&scores), midranks(&realized));
            let varies = |r: &[f64]| r.iter().any(|x| *x != r[0]);
            if varies(&ra) && varies(&rb) {
                let ic = spearman_ic(&scores, &realized).map_err(|e| e.to_string())?;
                worst_ic = worst_ic.max((ic - pearson_oracle(&ra, &rb)).abs());
            }

            // tie-free: distinct values in both vectors
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let p: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 + rng.gen_range(0.0..0.1)).collect();
            let r: Vec<f64> = perm.iter().map(|&k| k as f64 - 0.25).collect();
            let ic = spearman_ic(&p, &r).map_err(|e| e.to_string())?;
            let d2: f64 = midranks(&p).iter().zip(midranks(&r)).map(|(x, y)| (x - y).powi(2)).sum();
            let nf = n as f64;
            let closed = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
            worst_closed = worst_closed.max((ic - closed).abs());

            let neg: Vec<f64> = p.iter().map(|x| -x).collect();
            let sum = auroc(&labels, &p).map_err(|e| e.to_string())? + auroc(&labels, &neg).map_err(|e| e.to_string())?;
            worst_comp = worst_comp.max((sum - 1.0).abs());
        }
    }
    ensure!(worst_auc <= 1e-12, "auroc error {worst_auc:e}");
    ensure!(worst_ic <= 1e-12, "spearman error {worst_ic:e}");
    ensure!(worst_closed <= 1e-12, "closed-form error {worst_closed:e}");
    ensure!(worst_comp <= 1e-12, "complement error {worst_comp:e}");
    Ok(format!(
        "1000 instances; max errors auroc {worst_auc:.1e}, ic {worst_ic:.1e}, closed form {worst_closed:.1e}, complement {worst_comp:.1e}"
    ))
}

// 6 -------------------------------------------------------------------------

type Rows = Vec<Vec<Option<f64>>>;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn train_accuracy(m: &BoostedEnsemble<f64>, rows: &Rows, y: &[f64]) -> f64 {
    let p = m.predict_proba(rows).unwrap();
    p.iter().zip(y).filter(|(p, y)| (**p > 0.5) == (**y == 1.0)).count() as f64 / y.len() as f64
}

fn learner_sanity() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    let rows: Rows = (0..200).map(|_| vec![Some(rng.gen::<f64>())]).collect();
    let y: Vec<f64> = rows.iter().map(|r| if r[0].unwrap() > 0.5 { 1.0 } else { 0.0 }).collect();
    let cfg = TrainConfig {
        num_trees: 50,
        max_depth: 2,
        min_samples_leaf: 1,
        max_bins: 256,
        ..Default::default()
    };
    let m = fit(&rows, &y, &names(1), &cfg).map_err(|e| e.to_string())?;
    let labels: Vec<bool> = y.iter().map(|&v| v == 1.0).collect();
    let auc = auroc(&labels, &m.predict_proba(&rows).unwrap()).map_err(|e| e.to_string())?;
    ensure!(auc == 1.0, "separable task: training auroc {auc}");

    let xor: Rows = (0..1000)
        .map(|_| vec![Some(rng.gen_range(-1.0..1.0)), Some(rng.gen_range(-1.0..1.0))])
        .collect();
    let yx: Vec<f64> = xor
        .iter()
        .map(|r| if (r[0].unwrap() > 0.0) ^ (r[1].unwrap() > 0.0) { 1.0 } else { 0.0 })
        .collect();
    let xcfg = |depth| TrainConfig {
        num_trees: 100,
        max_depth: depth,
        min_samples_leaf: 20,
        learning_rate: 0.3,
        ..Default::default()
    };
    let deep = train_accuracy(&fit(&xor, &yx, &names(2), &xcfg(2)).map_err(|e| e.to_string())?, &xor, &yx);
    let shallow = train_accuracy(&fit(&xor, &yx, &names(2), &xcfg(1)).map_err(|e| e.to_string())?, &xor, &yx);
    ensure!(deep >= 0.95, "xor depth 2 accuracy {deep}");
    ensure!(shallow <= 0.6, "xor depth 1 accuracy {shallow}");

    let mut noisy = yx.clone();
    for v in noisy.iter_mut().step_by(7) {
        *v = 1.0 - *v;
    }
    let mut rounds = 0;
    for lr in [0.05, 0.3, 1.0, 3.0] {
        let cfg = TrainConfig {
            num_trees: 60,
            max_depth: 4,
            min_samples_leaf: 2,
            learning_rate: lr,
            l2_lambda: 1e-3,
            ..Default::default()
        };
        let (_, trace) = fit_with_trace(&xor, &noisy, &names(2), &cfg).map_err(|e| e.to_string())?;
        for w in trace.losses.windows(2) {
            ensure!(w[1] <= w[0] + 1e-9, "lr {lr}: loss rose {} -> {}", w[0], w[1]);
            rounds += 1;
        }
    }

    let cfg = TrainConfig {
        num_trees: 40,
        feature_fraction: 0.5,
        seed: 99,
        ..Default::default()
    };
    let a = fit(&xor, &yx, &names(2), &cfg).map_err(|e| e.to_string())?.to_json().map_err(|e| e.to_string())?;
    let b = fit(&xor, &yx, &names(2), &cfg).map_err(|e| e.to_string())?.to_json().map_err(|e| e.to_string())?;
    ensure!(a == b, "refit under a fixed seed differs");
    within(t0.elapsed(), 30.0, "criterion")?;
    Ok(format!(
        "separable auroc {auc}, xor accuracy {deep:.3} (depth 2) / {shallow:.3} (depth 1), {rounds} monotone rounds"
    ))
}

// 7 -------------------------------------------------------------------------

fn tpe_efficacy() -> Outcome {
    let t0 = Instant::now();
    let space = SearchSpace::new(vec![ParamSpec::new("x", ParamKind::Uniform, 0.0, 1.0)]).map_err(|e| e.to_string())?;
    let f = |x: f64| -(x - 0.3) * (x - 0.3);
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[9] + v[10])
    };
    let (mut hits, mut tpe_best, mut rand_best) = (0, Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let study = optimize(|p| f(p["x"]), &space, 50, &TpeConfig::default(), &mut rng, false).map_err(|e| e.to_string())?;
        let best = study.best_trial();
        hits += usize::from((best.params["x"] - 0.3).abs() <= 0.05);
        tpe_best.push(best.objective);
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        rand_best.push((0..50).map(|_| f(r.gen_range(0.0..=1.0))).fold(f64::NEG_INFINITY, f64::max));
    }
    let (mt, mr) = (median(tpe_best), median(rand_best));
    ensure!(hits >= 18, "only {hits}/20 seeds within 0.05");
    ensure!(mt >= mr, "median best {mt:e} below random search {mr:e}");
    within(t0.elapsed(), 10.0, "criterion")?;
    Ok(format!("{hits}/20 seeds within 0.05; median best {mt:.2e} vs random {mr:.2e}"))
}

// 8 -------------------------------------------------------------------------

fn random_tree(rng: &mut ChaCha8Rng, depth: usize, width: usize) -> TreeNode<f64> {
    if depth == 0 || rng.gen_bool(0.2) {
        return TreeNode::Leaf {
            value: rng.gen_range(-2.0..2.0),
        };
    }
    TreeNode::Split {
        feature_index: rng.gen_range(0..width),
        threshold: rng.gen_range(-1.0..1.0),
        missing_goes_left: rng.gen_bool(0.5),
        left: Box::new(random_tree(rng, depth - 1, width)),
        right: Box::new(random_tree(rng, depth - 1, width)),
    }
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Rows {
    (0..n)
        .map(|_| (0..width).map(|_| (!rng.gen_bool(0.1)).then(|| rng.gen_range(-1.5..1.5))).collect())
        .collect()
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn replay_local_accuracy(run: &Path) -> Result<(usize, f64), String> {
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run.join("explain/summary.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let features = FeatureMatrix::<f64>::read_csv(&run.join("features/weekly_features.csv")).map_err(|e| e.to_string())?;
    let (mut rows, mut worst) = (0, 0.0f64);
    for entry in summary.as_array().ok_or("summary is not a list")? {
        let set = entry["set"].as_str().ok_or("set name")?;
        let base = entry["base_value"].as_f64().ok_or("base value")?;
        let model_text = std::fs::read_to_string(run.join(format!("eval/models/{set}.json"))).map_err(|e| e.to_string())?;
        let model = BoostedEnsemble::<f64>::from_json(&model_text).map_err(|e| e.to_string())?;
        let m = features.select(&model.feature_names).map_err(|e| e.to_string())?;
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for rec in read_csv_rows(&run.join(format!("explain/{set}_shap.csv")))? {
            let v: f64 = rec[2].parse().map_err(|_| format!("bad shap value {}", rec[2]))?;
            *sums.entry(rec[0].clone()).or_insert(0.0) += v;
        }
        ensure!(!sums.is_empty(), "{set}: no explained rows");
        for (week, phi) in &sums {
            let i = m.weeks.iter().position(|w| w.to_string() == *week).ok_or(format!("{set}: no row {week}"))?;
            let margin = model.predict_margin(&m.rows[i]).map_err(|e| e.to_string())?;
            worst = worst.max((base + phi - margin).abs());
            rows += 1;
        }
        let reported = entry["max_local_accuracy_error"].as_f64().ok_or("reported error")?;
        ensure!(reported <= 1e-8, "{set}: reported local accuracy error {reported:e}");
    }
    Ok((rows, worst))
}

fn shap_exactness(replay: &Replays) -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut dummies) = (0.0f64, 0);
    for _ in 0..50 {
        let width = rng.gen_range(1..=12);
        let n_trees = rng.gen_range(1..=5);
        let e = BoostedEnsemble {
            base_score: rng.gen_range(-1.0..1.0),
            learning_rate: rng.gen_range(0.05..1.0),
            trees: (0..n_trees).map(|_| random_tree(&mut rng, 3, width)).collect(),
            feature_names: names(width),
        };
        let bg = random_rows(&mut rng, 8, width);
        let xs = random_rows(&mut rng, 3, width);
        let shap = tree_shap(&e, &xs, &bg).map_err(|e| e.to_string())?;
        let used: Vec<usize> = e.trees.iter().flat_map(|t| t.features()).collect();
        for (x, phi) in xs.iter().zip(&shap.values) {
            let oracle = brute_force_shapley(|r: &[Option<f64>]| e.predict_margin(r).unwrap(), x, &bg, width)
                .map_err(|e| e.to_string())?;
            for (j, (a, b)) in phi.iter().zip(&oracle).enumerate() {
                worst = worst.max((a - b).abs());
                if !used.contains(&j) {
                    ensure!(*a == 0.0, "dummy feature {j} got {a:e}");
                    dummies += 1;
                }
            }
        }
    }
    ensure!(worst <= 1e-8, "max deviation from brute force {worst:e}");
    let elapsed = t0.elapsed();
    let (rows, local) = replay_local_accuracy(&replay.first)?;
    ensure!(local <= 1e-8, "replay local accuracy error {local:e}");
    within(elapsed, 60.0, "random-ensemble check")?;
    Ok(format!(
        "50 ensembles, max error {worst:.1e}; {dummies} dummy attributions exactly 0; {rows} replay rows, local error {local:.1e}"
    ))
}

// 9 -------------------------------------------------------------------------

fn replay_quality(replay: &Replays) -> Outcome {
    let run = &replay.first;
    let metrics = read_metric_summaries(&run.join("eval/metrics.csv")).map_err(|e| e.to_string())?;
    let get = |set: &str| {
        metrics
            .get(&(set.to_string(), "auroc".to_string()))
            .and_then(|v| v.0)
            .ok_or(format!("no mean auroc for {set}"))
    };
    let informative = get("gpt")?;
    let noise = get("av_baseline")?;
    ensure!(informative >= 0.65, "gpt mean auroc {informative:.4} < 0.65");
    ensure!((0.40..=0.60).contains(&noise), "av_baseline mean auroc {noise:.4} outside [0.40, 0.60]");
    let importance = read_csv_rows(&run.join("explain/gpt_shap_summary.csv"))?;
    let top: Vec<&str> = importance.iter().take(3).map(|r| r[0].as_str()).collect();
    ensure!(
        top.iter().any(|f| f.starts_with("gpt_polarity")),
        "no polarity feature in the top 3: {top:?}"
    );
    within(replay.first_elapsed, 300.0, "replay")?;
    Ok(format!(
        "gpt auroc {informative:.4}, av_baseline auroc {noise:.4}, top 3 {top:?}, replay {:.0}s",
        replay.first_elapsed.as_secs_f64()
    ))
}

// 10 ------------------------------------------------------------------------

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(replay: &Replays) -> Outcome {
    let (a, b) = (tree_bytes(&replay.first), tree_bytes(&replay.second));
    ensure!(
        a.keys().eq(b.keys()),
        "file sets differ: {} vs {} files",
        a.len(),
        b.len()
    );
    for (k, v) in &a {
        ensure!(*v == b[k], "{} differs", k.display());
    }
    let svgs = a.keys().filter(|k| k.extension().is_some_and(|e| e == "svg")).count();
    ensure!(svgs > 0, "no SVGs in the run directory");
    Ok(format!("{} files byte-identical, {svgs} SVGs", a.len()))
}

// ---------------------------------------------------------------------------

struct Replays {
    _root: tempfile::TempDir,
    first: PathBuf,
    second: PathBuf,
    first_elapsed: Duration,
}

fn run_replays() -> Result<Replays, String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    let mut first_elapsed = Duration::ZERO;
    for name in ["first", "second"] {
        let dir = root.path().join(name);
        let t0 = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_wtisent"))
            .args(["replay", "--seed", "7", "--out"])
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("replay failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        if dirs.is_empty() {
            first_elapsed = t0.elapsed();
        }
        dirs.push(dir);
    }
    let second = dirs.pop().unwrap();
    let first = dirs.pop().unwrap();
    Ok(Replays {
        _root: root,
        first,
        second,
        first_elapsed,
    })
}

fn report(n: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = t0.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("criterion {n:>2} PASS  {title} ({secs:.2}s): {detail}"),
        Err(why) => println!("criterion {n:>2} FAIL  {title} ({secs:.2}s): {why}"),
    }
    result.is_ok()
}

fn main() -> ExitCode {
    // `cargo test -- --list` and similar harness probes
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut ok = true;
    ok &= report(1, "return/label correctness", returns_and_labels);
    ok &= report(2, "no look-ahead", no_look_ahead);
    ok &= report(3, "aggregation oracle", aggregation_oracle);
    ok &= report(4, "schema fidelity", schema_fidelity);
    ok &= report(5, "metric oracles", metric_oracles);
    ok &= report(6, "learner sanity", learner_sanity);
    ok &= report(7, "TPE efficacy", tpe_efficacy);
    let replays = run_replays();
    let shared = &replays;
    let with_replays = |f: fn(&Replays) -> Outcome| {
        move || match shared {
            Ok(r) => f(r),
            Err(e) => Err(e.clone()),
        }
    };
    ok &= report(8, "SHAP exactness", with_replays(shap_exactness));
    ok &= report(9, "end-to-end synthetic replay", with_replays(replay_quality));
    ok &= report(10, "determinism", with_replays(determinism));
    if ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
