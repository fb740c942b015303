use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use gme_core::learn::{evaluate, fit, load_model, save_model, FnnConfig, FnnModel, LabeledDataset};
use gme_core::measure::{load_devices, sample_device_set, save_devices, DeviceSet, Layout};
use gme_core::pipeline::{
    alpha_beta_csv, audit_dataset, bisep_search, build_dataset, graph_experiment, kcorr_experiment,
    robustness_experiment, sample_states, scan_alpha_beta, scan_csv, scan_werner, to_json_rounded, verify_certificate,
    BisepBudget, DatasetKind, ExperimentId, ExperimentSpec, FeatureMap, GraphParams, WernerFamily,
};
use gme_core::rng::derive_seed;
use gme_core::states::{qutrit_family, NoiseConvention};
use serde_json::{json, Value};

use crate::manifest::{beside, RunManifest};
use crate::{
    AlphaBeta, BisepSearch, Case, CliError, CliResult, Command, Convention, Eval, Failure, GenDataset, GenDevices,
    Graph, Kcorr, Robustness, Scan, Train, VerifyManifest,
};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::GenDevices(a) => gen_devices(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Scan(a) => scan(a),
        Command::AlphaBeta(a) => alpha_beta(a),
        Command::Graph(a) => graph(a),
        Command::Kcorr(a) => kcorr(a),
        Command::Robustness(a) => robustness(a),
        Command::BisepSearch(a) => bisep(a),
        Command::VerifyManifest(a) => verify_manifest(a),
    }
}

fn spec(id: ExperimentId, params: Value, root_seed: u64) -> CliResult<ExperimentSpec> {
    let map: BTreeMap<String, Value> = serde_json::from_value(params).expect("object literal");
    ExperimentSpec::new(id, map, root_seed).map_err(|e| CliError::new(Failure::Usage, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn devices(path: &Path) -> CliResult<DeviceSet<f64>> {
    if !path.exists() {
        return Err(CliError::new(Failure::Other, format!("device file {} does not exist", path.display())));
    }
    Ok(load_devices(path).with_context(|| format!("loading devices from {}", path.display()))?)
}

fn model(path: &Path) -> CliResult<FnnModel<f32>> {
    Ok(load_model(path).with_context(|| format!("loading model from {}", path.display()))?)
}

fn dataset(path: &Path) -> CliResult<LabeledDataset> {
    Ok(LabeledDataset::load(path).with_context(|| format!("loading dataset from {}", path.display()))?)
}

/// Full-correlation map, or the k-correlation map whose width the model
/// takes.
fn feature_map<'a>(devices: &'a DeviceSet<f64>, m: &FnnModel<f32>) -> CliResult<FeatureMap<'a>> {
    let full = FeatureMap::full(devices);
    let outcomes: usize = devices.dims().iter().product();
    let width = m.input_dim();
    if width == full.len() || !width.is_multiple_of(outcomes) {
        return Ok(full);
    }
    Ok(FeatureMap { devices, layout: Layout::Kcorr { k: width / outcomes } })
}

fn fingerprint_mismatch(what: &str, expected: &str, found: &str) -> CliError {
    CliError::new(Failure::Fingerprint, format!("{what}: device fingerprint {found}, expected {expected}"))
}

/// A model trained on recorded devices may only see features from them.
fn check_model_devices(m: &FnnModel<f32>, fm: &FeatureMap) -> CliResult<()> {
    match &m.device_fingerprint {
        Some(fp) if *fp != fm.fingerprint() => Err(fingerprint_mismatch("model", fp, &fm.fingerprint())),
        Some(_) => Ok(()),
        None => Err(CliError::new(Failure::Fingerprint, "model records no device fingerprint")),
    }
}

fn gen_devices(a: GenDevices) -> CliResult<()> {
    let t = Instant::now();
    let spec = spec(ExperimentId::GenDevices, json!({"dims": a.dims, "m": a.m}), a.seed)?;
    if a.dims.iter().any(|&d| d < 2) {
        return Err(CliError::new(Failure::Usage, "every local dimension must be at least 2"));
    }
    let ds = sample_device_set::<f64>(&a.dims, a.m, a.seed)?;
    save_devices(&ds, &a.out)?;
    let mut m = RunManifest::new("gen-devices", spec, t.elapsed().as_secs_f64());
    m.add("devices", &a.out)?;
    m.write(&beside(&a.out))?;
    println!("devices {}", a.out.display());
    println!("fingerprint {:016x}", ds.fingerprint());
    println!("feature_len {}", ds.full_feature_len());
    Ok(())
}

fn dataset_kind(case: Case, parties: usize) -> CliResult<DatasetKind> {
    Ok(match case {
        Case::ThreeQubit => DatasetKind::Train3q,
        Case::FourQubit => DatasetKind::Train4q,
        Case::ThreeQudit => DatasetKind::Train3qudit,
        Case::FivePartite => DatasetKind::Train5part,
        Case::RandomTest => match parties {
            3 => DatasetKind::Test3q,
            4 => DatasetKind::Test4q,
            5 => DatasetKind::Test5part,
            p => return Err(CliError::new(Failure::Usage, format!("--parties {p}: expected 3, 4 or 5"))),
        },
    })
}

fn spec_id(kind: DatasetKind) -> ExperimentId {
    match kind {
        DatasetKind::Train3q => ExperimentId::Train3q,
        DatasetKind::Train4q => ExperimentId::Train4q,
        DatasetKind::Train3qudit => ExperimentId::Train3qudit,
        DatasetKind::Train5part => ExperimentId::Train5part,
        DatasetKind::Test3q | DatasetKind::Test4q | DatasetKind::Test5part => ExperimentId::RandomTest,
    }
}

fn gen_dataset(a: GenDataset) -> CliResult<()> {
    let t = Instant::now();
    let kind = dataset_kind(a.case, a.parties)?;
    let ds = devices(&a.devices)?;
    let fm = FeatureMap::full(&ds);
    let mut params = json!({"scale": a.scale, "device_fingerprint": fm.fingerprint()});
    if kind == DatasetKind::Test3q || kind == DatasetKind::Test4q || kind == DatasetKind::Test5part {
        params["parties"] = json!(a.parties);
    }
    let spec = spec(spec_id(kind), params, a.seed)?;
    if !(0.0..=1.0).contains(&a.audit) {
        return Err(CliError::new(Failure::Usage, format!("--audit {} outside [0, 1]", a.audit)));
    }
    if ds.m() != kind.devices_per_party() {
        return Err(CliError::new(
            Failure::Usage,
            format!("{kind:?} uses {} devices per party, file has {}", kind.devices_per_party(), ds.m()),
        ));
    }
    let data = build_dataset(kind, a.seed, a.scale, &fm)?;
    if data.meta.device_fingerprint != fm.fingerprint() {
        return Err(fingerprint_mismatch("dataset", &fm.fingerprint(), &data.meta.device_fingerprint));
    }
    if a.audit > 0.0 {
        let report = audit_dataset(kind, &data, &fm, a.audit, derive_seed(a.seed, 0xa0d1))?;
        println!(
            "audit {} rows: {} labels and {} feature rows agree",
            report.checked, report.label_agreements, report.feature_agreements
        );
        if !report.passed() {
            return Err(CliError::new(Failure::Validation, "dataset audit disagreed with the stored rows"));
        }
    }
    data.save(&a.out)?;
    let mut m = RunManifest::new("gen-dataset", spec, t.elapsed().as_secs_f64());
    m.add("dataset", &a.out)?;
    m.add("features", &LabeledDataset::features_path(&a.out))?;
    m.write(&beside(&a.out))?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &data.meta.sources {
        *counts.entry(s.as_str()).or_default() += 1;
    }
    println!("dataset {} rows, dim {}", data.len(), data.dim());
    for (source, n) in counts {
        println!("  {source}: {n}");
    }
    println!("positives {} negatives {}", data.positives(), data.len() - data.positives());
    Ok(())
}

/// Preset network for a dataset's shape.
fn preset(data: &LabeledDataset, seed: u64) -> CliResult<FnnConfig> {
    let dims = &data.meta.dims;
    let n = dims.len();
    let d = dims.first().copied().unwrap_or(0);
    if n >= 10 {
        return Ok(FnnConfig::graph(data.dim(), seed));
    }
    FnnConfig::preset(n, d, data.dim(), seed).map_err(|e| CliError::new(Failure::Usage, format!("{e}; pass --config")))
}

fn train(a: Train) -> CliResult<()> {
    let t = Instant::now();
    let data = dataset(&a.dataset)?;
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut cfg: FnnConfig = serde_json::from_str(&text).map_err(|e| CliError::new(Failure::Usage, e))?;
            cfg.seed = a.seed;
            cfg
        }
        None => preset(&data, a.seed)?,
    };
    if let Some(e) = a.max_epochs {
        cfg.max_epochs = e;
    }
    if cfg.input_dim != data.dim() {
        return Err(CliError::new(
            Failure::Usage,
            format!("config input_dim {} but dataset rows have {}", cfg.input_dim, data.dim()),
        ));
    }
    let dataset_fp = crate::manifest::file_hash(&a.dataset)?;
    let mut params = json!({"dataset_fingerprint": dataset_fp});
    if let Some(p) = &a.config {
        params["config"] = json!(p.display().to_string());
    }
    let spec = spec(ExperimentId::Train, params, a.seed)?;
    let (model, report) = fit::<f32>(&cfg, &data)?;
    save_model(&model, &a.out)?;
    let report_path = PathBuf::from(format!("{}.training.json", a.out.display()));
    write_text(&report_path, &to_json_rounded(&report)?)?;
    let mut m = RunManifest::new("train", spec, t.elapsed().as_secs_f64());
    m.add("model", &a.out)?;
    m.add("training_report", &report_path)?;
    m.write(&beside(&a.out))?;
    let last = report.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs (best {}), final train loss {:.6}, validation accuracy {}",
        report.epochs.len(),
        report.best_epoch,
        last.train_loss,
        last.val_accuracy.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
    );
    println!("model {}", a.out.display());
    Ok(())
}

fn eval(a: Eval) -> CliResult<()> {
    let t = Instant::now();
    let m = model(&a.model)?;
    let data = dataset(&a.dataset)?;
    match &m.device_fingerprint {
        Some(fp) if *fp != data.meta.device_fingerprint => {
            return Err(fingerprint_mismatch("dataset", fp, &data.meta.device_fingerprint))
        }
        Some(_) => {}
        None => return Err(CliError::new(Failure::Fingerprint, "model records no device fingerprint")),
    }
    if m.input_dim() != data.dim() {
        return Err(CliError::new(
            Failure::Usage,
            format!("model takes {} features, dataset has {}", m.input_dim(), data.dim()),
        ));
    }
    let accuracy = evaluate(&m, &data)?;
    println!("accuracy {accuracy:.4} on {} rows", data.len());
    if let Some(out) = &a.out {
        let spec = spec(
            ExperimentId::Eval,
            json!({"device_fingerprint": data.meta.device_fingerprint, "rows": data.len()}),
            data.meta.root_seed,
        )?;
        write_text(out, &to_json_rounded(&json!({"accuracy": accuracy, "rows": data.len()}))?)?;
        let mut manifest = RunManifest::new("eval", spec, t.elapsed().as_secs_f64());
        manifest.add("summary", out)?;
        manifest.write(&beside(out))?;
    }
    Ok(())
}

fn convention(c: Convention) -> NoiseConvention {
    match c {
        Convention::Noise => NoiseConvention::NoiseWeight,
        Convention::State => NoiseConvention::StateWeight,
    }
}

fn scan(a: Scan) -> CliResult<()> {
    let t = Instant::now();
    let family = WernerFamily::from_name(&a.family.to_lowercase()).map_err(|e| CliError::new(Failure::Usage, e))?;
    let conv = a.convention.map(convention).unwrap_or(family.default_convention());
    let m = model(&a.model)?;
    let ds = devices(&a.devices)?;
    let fm = feature_map(&ds, &m)?;
    let spec = spec(
        ExperimentId::ScanWerner,
        json!({
            "device_fingerprint": fm.fingerprint(),
            "family": family.name(),
            "convention": match conv { NoiseConvention::NoiseWeight => "noise", NoiseConvention::StateWeight => "state" },
            "step": a.step,
        }),
        0,
    )?;
    check_model_devices(&m, &fm)?;
    let report = scan_werner(&m, &fm, family, conv, a.step)?;
    out_dir(&a.out)?;
    let csv = a.out.join(format!("scan_{}.csv", family.name()));
    let summary = a.out.join(format!("scan_{}.json", family.name()));
    write_text(&csv, &scan_csv(&report))?;
    write_text(
        &summary,
        &to_json_rounded(&json!({
            "family": family.name(),
            "convention": conv,
            "reported_threshold": report.reported_threshold,
            "reference_threshold": report.reference_threshold,
            "wrong_interval": report.wrong_interval,
            "accuracy_on_known": report.accuracy_on_known,
            "known_points": report.known_points,
            "grid_points": report.grid.len(),
        }))?,
    )?;
    let mut manifest = RunManifest::new("scan", spec, t.elapsed().as_secs_f64());
    manifest.add("scan_csv", &csv)?;
    manifest.add("summary", &summary)?;
    manifest.write(&a.out.join(format!("scan_{}.run.json", family.name())))?;
    println!("family {} ({conv:?})", family.name());
    println!("reported threshold {:.3} (reference {:.3})", report.reported_threshold, report.reference_threshold);
    match report.wrong_interval {
        Some((lo, hi)) => println!("wrong predictions in [{lo:.3}, {hi:.3}]"),
        None => println!("no wrong predictions on known points"),
    }
    println!("accuracy on {} known points {:.4}", report.known_points, report.accuracy_on_known);
    Ok(())
}

fn alpha_beta(a: AlphaBeta) -> CliResult<()> {
    let t = Instant::now();
    let m = model(&a.model)?;
    let ds = devices(&a.devices)?;
    let fm = FeatureMap::full(&ds);
    let spec = spec(ExperimentId::ScanAlphaBeta, json!({"device_fingerprint": fm.fingerprint(), "step": a.step}), 0)?;
    check_model_devices(&m, &fm)?;
    let report = scan_alpha_beta(&m, &fm, a.step)?;
    out_dir(&a.out)?;
    let csv = a.out.join("alpha_beta.csv");
    let summary = a.out.join("alpha_beta.json");
    write_text(&csv, &alpha_beta_csv(&report))?;
    write_text(
        &summary,
        &to_json_rounded(&json!({
            "step": report.step,
            "boundary": report.boundary,
            "subset_violations": report.subset_violations,
            "vrho_points": report.vrho_points,
        }))?,
    )?;
    let mut manifest = RunManifest::new("alpha-beta", spec, t.elapsed().as_secs_f64());
    manifest.add("map_csv", &csv)?;
    manifest.add("summary", &summary)?;
    manifest.write(&a.out.join("alpha_beta.run.json"))?;
    match report.boundary_at(0.0) {
        Some(b) => println!("boundary at alpha = 0: beta = {b:.3}"),
        None => println!("no GME region at alpha = 0"),
    }
    println!(
        "{} grid points, {} detected by the entropic criterion, {} of those predicted biseparable",
        report.points.len(),
        report.vrho_points,
        report.subset_violations
    );
    Ok(())
}

fn graph(a: Graph) -> CliResult<()> {
    let t = Instant::now();
    let spec = spec(ExperimentId::GraphExp, json!({"n": a.n, "k": a.k, "train": a.train, "test": a.test}), a.seed)?;
    let params = GraphParams { n: a.n, k: a.k, train: a.train, test: a.test, seed: a.seed };
    let report = graph_experiment(&params)?;
    out_dir(&a.out)?;
    let summary = a.out.join("graph.json");
    write_text(&summary, &to_json_rounded(&report)?)?;
    let mut manifest = RunManifest::new("graph", spec, t.elapsed().as_secs_f64());
    manifest.add("summary", &summary)?;
    manifest.write(&a.out.join("graph.run.json"))?;
    println!(
        "graph states n = {}, k = {}: test accuracy {:.4} ({} of {} test graphs connected)",
        a.n, a.k, report.test_accuracy, report.test_connected, a.test
    );
    Ok(())
}

fn print_run(r: &gme_core::pipeline::RunReport) {
    println!("{}: test accuracy {:.4}", r.label, r.test_accuracy);
    for f in &r.families {
        println!(
            "  {:<5} accuracy {:.4}  threshold {:.3} (reference {:.3})",
            f.family.name(),
            f.accuracy_on_known,
            f.reported_threshold,
            f.reference_threshold
        );
    }
}

fn kcorr(a: Kcorr) -> CliResult<()> {
    let t = Instant::now();
    let spec = spec(ExperimentId::Kcorr4q, json!({"k": a.k, "scale": a.scale, "step": a.step}), a.seed)?;
    let train = sample_states(DatasetKind::Train4q, derive_seed(a.seed, 1), a.scale)?;
    let test = sample_states(DatasetKind::Test4q, derive_seed(a.seed, 2), 1.0)?;
    let report = kcorr_experiment(a.k, &train, &test, derive_seed(a.seed, 3), derive_seed(a.seed, 4), a.step)?;
    out_dir(&a.out)?;
    let summary = a.out.join(format!("kcorr{}.json", a.k));
    write_text(&summary, &to_json_rounded(&report)?)?;
    let mut manifest = RunManifest::new("kcorr", spec, t.elapsed().as_secs_f64());
    manifest.add("summary", &summary)?;
    manifest.write(&a.out.join(format!("kcorr{}.run.json", a.k)))?;
    print_run(&report);
    Ok(())
}

fn robustness(a: Robustness) -> CliResult<()> {
    let t = Instant::now();
    let seeds: Vec<u64> = if a.device_seeds.is_empty() {
        (0..5).map(|i| derive_seed(a.seed, 0xde00 + i)).collect()
    } else {
        a.device_seeds.clone()
    };
    let spec =
        spec(ExperimentId::Robustness, json!({"scale": a.scale, "step": a.step, "device_seeds": seeds}), a.seed)?;
    let train = sample_states(DatasetKind::Train4q, derive_seed(a.seed, 1), a.scale)?;
    let test = sample_states(DatasetKind::Test4q, derive_seed(a.seed, 2), 1.0)?;
    let report = robustness_experiment(&train, &test, &seeds, derive_seed(a.seed, 4), a.step)?;
    out_dir(&a.out)?;
    let summary = a.out.join("robustness.json");
    write_text(&summary, &to_json_rounded(&report)?)?;
    let mut manifest = RunManifest::new("robustness", spec, t.elapsed().as_secs_f64());
    manifest.add("summary", &summary)?;
    manifest.write(&a.out.join("robustness.run.json"))?;
    for r in &report.random_runs {
        print_run(r);
    }
    print_run(&report.fixed_run);
    println!(
        "test accuracy spread over random devices {:.4} (min {:.4}, max {:.4})",
        report.test_spread.width(),
        report.test_spread.min,
        report.test_spread.max
    );
    Ok(())
}

fn bisep(a: BisepSearch) -> CliResult<()> {
    let t = Instant::now();
    let spec = spec(
        ExperimentId::BisepSearch,
        json!({
            "alpha": a.alpha,
            "beta": a.beta,
            "restarts": a.restarts,
            "iterations": a.iterations,
            "tolerance": a.tolerance,
        }),
        a.seed,
    )?;
    let rho = qutrit_family::<f64>(a.alpha, a.beta)?;
    let budget = BisepBudget { restarts: a.restarts, iterations: a.iterations, tolerance: a.tolerance };
    let result = bisep_search(&rho, &budget, a.seed)?;
    if let Some(cert) = &result.certificate {
        let check = verify_certificate(&rho, cert)?;
        if result.found && !check.passed(a.tolerance) {
            return Err(CliError::new(Failure::Validation, format!("certificate failed verification: {check:?}")));
        }
    }
    if result.found {
        println!("found: distance {:.3e} after {} iterations", result.distance, result.iterations);
    } else {
        println!("not found: distance {:.3e} after {} iterations (inconclusive)", result.distance, result.iterations);
    }
    if let Some(dir) = &a.out {
        out_dir(dir)?;
        let summary = dir.join("bisep.json");
        write_text(
            &summary,
            &to_json_rounded(&json!({
                "alpha": a.alpha,
                "beta": a.beta,
                "found": result.found,
                "distance": result.distance,
                "iterations": result.iterations,
            }))?,
        )?;
        let mut manifest = RunManifest::new("bisep-search", spec, t.elapsed().as_secs_f64());
        manifest.add("summary", &summary)?;
        if let (true, Some(cert)) = (result.found, &result.certificate) {
            let path = dir.join("bisep_certificate.json");
            write_text(&path, &to_json_rounded(cert)?)?;
            manifest.add("certificate", &path)?;
            println!("certificate {}", path.display());
        }
        manifest.write(&dir.join("bisep.run.json"))?;
    }
    Ok(())
}

fn verify_manifest(a: VerifyManifest) -> CliResult<()> {
    let m = RunManifest::load(&a.manifest)?;
    m.verify().map_err(|e| CliError::new(Failure::Fingerprint, format!("{e:#}")))?;
    println!("manifest {} ok: {} artifacts", m.fingerprint, m.artifacts.len());
    Ok(())
}
