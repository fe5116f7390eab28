use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::values::parse_values;
use super::*;
use crate::data::{
    default_parents, derive_modality, parse_ntu_name, parse_ntu_skeleton, read_canonical, resample_center,
    synth_confusable, write_canonical, xsub_is_train, Dataset, Modality, Sample, Split, SynthSpec,
};
use crate::error::Result;
use crate::model::{kv_lines, parameter_count, FreqMixFormer, ModelConfig};
use crate::numerics::{load_checkpoint, Rng, Tensor};
use crate::pipeline::{
    config_hash, difficulty_report, ensemble, evaluate, grad_check, run_experiment, train, Metrics, RunConfig,
    ScoreFile, TrainOutput,
};
use crate::spectral::spectral_residuals;

pub(super) fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Ensemble(a) => ensemble_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Parse(a) => parse_cmd(a),
        Command::AttnExport(a) => attn_export_cmd(a),
        Command::SpectralCheck(a) => spectral_check_cmd(a),
        Command::GradCheck(a) => grad_check_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// First 8 bytes of the SHA-256 of a file, as hex.
fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..8]))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Applies `--set key=value` flags; unknown keys and bad values are usage errors.
fn apply_sets(sets: &[String], mut set: impl FnMut(&str, &str) -> Result<bool>) -> CliResult<()> {
    for item in sets {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        match set(key.trim(), value.trim()) {
            Ok(true) => {}
            Ok(false) => return Err(usage(format!("unknown key {:?} in --set", key.trim()))),
            Err(e) => return Err(usage(format!("--set {item}: {e}"))),
        }
    }
    Ok(())
}

/// Applies a `key=value` file; unknown keys are parse errors.
fn apply_file(path: &Path, mut set: impl FnMut(&str, &str) -> Result<bool>) -> Result<()> {
    let text = read_text(path)?;
    for (key, value, line) in kv_lines(&text)? {
        let known = set(key, value).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if !known {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key {key:?} in {}", path.display()),
            });
        }
    }
    Ok(())
}

/// Defaults, then the dataset's shape, then the config file, then flags.
fn resolve(ds: &Dataset, args: &ConfigArgs) -> CliResult<RunConfig> {
    let mut rc = RunConfig::default();
    rc.model.joints = ds.joints;
    rc.model.in_channels = ds.in_channels;
    rc.model.frames = ds.frames;
    rc.model.num_classes = ds.num_classes;
    rc.model.num_enhanced = rc.model.num_enhanced.min(ds.frames);
    if let Some(path) = &args.config {
        apply_file(path, |k, v| rc.set(k, v))?;
    }
    apply_sets(&args.set, |k, v| rc.set(k, v))?;
    if let Some(seed) = args.seed {
        rc.schedule.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        rc.schedule.epochs = epochs;
    }
    rc.validate().map_err(|e| usage(e.to_string()))?;
    check_fit(&rc.model, ds)?;
    Ok(rc)
}

fn check_fit(cfg: &ModelConfig, ds: &Dataset) -> CliResult<()> {
    if ds.sample_shape() != [cfg.joints, cfg.in_channels, cfg.frames] || ds.num_classes != cfg.num_classes {
        return Err(usage(format!(
            "dataset samples {:?} with {} classes do not fit the configured model {:?} with {} classes",
            ds.sample_shape(),
            ds.num_classes,
            [cfg.joints, cfg.in_channels, cfg.frames],
            cfg.num_classes
        )));
    }
    Ok(())
}

fn metrics_text(m: &Metrics) -> String {
    let mut out = format!("top1={:.6}\n", m.top1);
    if m.loss.is_finite() {
        let _ = writeln!(out, "loss={:.6}", m.loss);
    }
    for (k, acc) in m.per_class.iter().enumerate() {
        let _ = writeln!(out, "class {k}: {acc:.4}");
    }
    let r = difficulty_report(&m.per_class);
    let list = |v: &[usize]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
    let _ = writeln!(out, "hard={}", list(&r.hard));
    let _ = writeln!(out, "medium={}", list(&r.medium));
    let _ = writeln!(out, "easy={}", list(&r.easy));
    out
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let ds = read_canonical(&a.data)?;
    let rc = resolve(&ds, &a.cfg)?;
    let digest = file_digest(&a.data)?;
    let text = rc.to_text();
    let dir = a.out.join(config_hash(&format!("{text}data_sha256={digest}\n")));
    create_dir(&dir)?;
    let replay = dir.join("replay.cfg");
    write_file(
        &replay,
        format!(
            "# fmx train --data {} --config <this file>\n# data_sha256={digest}\n{text}",
            a.data.display()
        ),
    )?;
    info!("training into {}", dir.display());
    let mut model = FreqMixFormer::new(rc.model.clone(), rc.schedule.seed)?;
    let output = TrainOutput {
        dir: Some(dir.clone()),
        every_epoch: a.every_epoch,
    };
    let report = train(&mut model, &ds, &rc.schedule, &output)?;
    println!("run_dir={}", dir.display());
    println!("best_epoch={}", report.best_epoch);
    if ds.count(Split::Test) > 0 {
        let (metrics, scores) = evaluate(&model, &ds, Split::Test)?;
        scores.save(&dir.join("scores.csv"))?;
        let text = metrics_text(&metrics);
        write_file(&dir.join("metrics.txt"), &text)?;
        print!("{text}");
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CliResult<()> {
    let ds = read_canonical(&a.data)?;
    let rc = RunConfig::load(&a.config)?;
    check_fit(&rc.model, &ds)?;
    let mut model = FreqMixFormer::new(rc.model, rc.schedule.seed)?;
    load_checkpoint(model.store_mut(), &a.checkpoint)?;
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let (metrics, scores) = evaluate(&model, &ds, split)?;
    if let Some(path) = &a.scores {
        scores.save(path)?;
    }
    print!("{}", metrics_text(&metrics));
    Ok(())
}

fn ensemble_cmd(a: EnsembleArgs) -> CliResult<()> {
    let files = a.scores.iter().map(|p| ScoreFile::load(p)).collect::<Result<Vec<_>>>()?;
    let weights = match &a.weights {
        Some(w) => w
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| usage(format!("bad weight {v:?}"))))
            .collect::<CliResult<Vec<_>>>()?,
        None => vec![1.0; files.len()],
    };
    if weights.len() != files.len() {
        return Err(usage(format!("{} weights for {} score files", weights.len(), files.len())));
    }
    let ds = read_canonical(&a.data)?;
    let labels = files[0]
        .ids
        .iter()
        .map(|id| {
            id.parse::<usize>()
                .ok()
                .and_then(|i| ds.samples.get(i))
                .map(|s| s.label)
                .ok_or_else(|| Error::invalid(format!("score id {id:?} is not a sample of {}", a.data.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let metrics = ensemble(&files, &weights, &labels)?;
    print!("{}", metrics_text(&metrics));
    Ok(())
}

fn synth_cmd(a: SynthArgs) -> CliResult<()> {
    let mut spec = SynthSpec::default();
    let mut seed = 0u64;
    let set = |spec: &mut SynthSpec, seed: &mut u64, k: &str, v: &str| -> Result<bool> {
        if k == "seed" {
            *seed = v.parse().map_err(|_| Error::invalid(format!("bad value {v:?} for seed")))?;
            return Ok(true);
        }
        spec.set(k, v)
    };
    if let Some(path) = &a.config {
        apply_file(path, |k, v| set(&mut spec, &mut seed, k, v))?;
    }
    apply_sets(&a.set, |k, v| set(&mut spec, &mut seed, k, v))?;
    if let Some(classes) = a.classes {
        spec.classes = classes;
    }
    if let Some(s) = a.seed {
        seed = s;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let ds = synth_confusable(&spec, seed)?;
    write_canonical(&a.out, &ds)?;
    let replay = sibling(&a.out, ".replay");
    let mut text = format!("# fmx synth --out {} --config {}\nseed={seed}\n", a.out.display(), replay.display());
    for (k, v) in spec.entries() {
        let _ = writeln!(text, "{k}={v}");
    }
    write_file(&replay, text)?;
    println!(
        "wrote {} ({} train, {} test, {} classes)",
        a.out.display(),
        ds.count(Split::Train),
        ds.count(Split::Test),
        ds.num_classes
    );
    Ok(())
}

fn skeleton_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "skeleton"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn parse_cmd(a: ParseArgs) -> CliResult<()> {
    let modality: Modality = a.modality.parse().map_err(|e: Error| usage(e.to_string()))?;
    let files = skeleton_files(&a.input)?;
    if files.is_empty() {
        return Err(usage("no .skeleton files found"));
    }
    let samples = files
        .par_iter()
        .map(|path| -> Result<Sample> {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let meta = parse_ntu_name(name)
                .filter(|m| m.action > 0)
                .ok_or_else(|| Error::invalid(format!("{}: not an NTU file name", path.display())))?;
            let text = read_text(path)?;
            let seq = parse_ntu_skeleton(&text).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Format(format!("{} line {line}: {msg}", path.display())),
                other => other,
            })?;
            let x = resample_center(&seq.joints, a.frames, a.center)?;
            let x = derive_modality(&x, modality, &default_parents(x.shape()[0]))?;
            let train = match a.protocol {
                Protocol::Xsub => xsub_is_train(meta.performer),
                Protocol::Xview => meta.camera != 1,
            };
            Ok(Sample {
                data: x,
                label: meta.action as usize - 1,
                split: if train { Split::Train } else { Split::Test },
                source: path.display().to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_label = samples.iter().map(|s| s.label).max().unwrap_or(0);
    let classes = a.classes.unwrap_or(max_label + 1);
    if max_label >= classes {
        return Err(usage(format!("action {} exceeds --classes {classes}", max_label + 1)));
    }
    let joints = samples[0].data.shape()[0];
    let mut ds = Dataset::new(joints, 3, a.frames, classes);
    for s in samples {
        ds.push(s)?;
    }
    write_canonical(&a.out, &ds)?;
    let protocol = match a.protocol {
        Protocol::Xsub => "xsub",
        Protocol::Xview => "xview",
    };
    let inputs: Vec<String> = a.input.iter().map(|p| format!("--input {}", p.display())).collect();
    write_file(
        &sibling(&a.out, ".replay"),
        format!(
            "# fmx parse {} --out {} --frames {} --protocol {protocol} --modality {modality} --center {} --classes {classes}\n",
            inputs.join(" "),
            a.out.display(),
            a.frames,
            a.center
        ),
    )?;
    println!(
        "wrote {} ({} train, {} test, {classes} classes)",
        a.out.display(),
        ds.count(Split::Train),
        ds.count(Split::Test)
    );
    Ok(())
}

/// CSV with full-precision values plus an 8-bit PGM scaled to `[min(0, lo), hi]`.
fn write_map(dir: &Path, name: &str, m: &Tensor) -> Result<()> {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    let mut csv = String::new();
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| m.get(&[r, c]).to_string()).collect();
        let _ = writeln!(csv, "{}", line.join(","));
    }
    write_file(&dir.join(format!("{name}.csv")), csv)?;
    let lo = m.data().iter().fold(0.0f64, |a, &v| a.min(v));
    let hi = m.data().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let range = hi - lo;
    let mut pgm = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    pgm.extend(m.data().iter().map(|&v| {
        if range > 0.0 {
            (255.0 * (v - lo) / range).round() as u8
        } else {
            0
        }
    }));
    write_file(&dir.join(format!("{name}.pgm")), pgm)
}

fn attn_export_cmd(a: AttnExportArgs) -> CliResult<()> {
    let ds = read_canonical(&a.data)?;
    let rc = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => resolve(&ds, &ConfigArgs::default())?,
    };
    check_fit(&rc.model, &ds)?;
    let mut model = FreqMixFormer::new(rc.model.clone(), rc.schedule.seed)?;
    if let Some(path) = &a.checkpoint {
        load_checkpoint(model.store_mut(), path)?;
    }
    let sample = ds
        .samples
        .get(a.sample)
        .ok_or_else(|| usage(format!("sample {} out of range for {} samples", a.sample, ds.samples.len())))?;
    if a.frame >= ds.frames {
        return Err(usage(format!("frame {} out of range for {} frames", a.frame, ds.frames)));
    }
    let maps = model.attention_maps(&sample.data)?;
    create_dir(&a.out)?;
    let j = ds.joints;
    let mut written = 0;
    for (b, bm) in maps.iter().enumerate() {
        for (i, ms) in bm.spatial.iter().enumerate() {
            write_map(&a.out, &format!("ms_b{b}_g{i}"), ms)?;
            written += 1;
        }
        for (i, mf) in bm.frequency.iter().enumerate() {
            write_map(&a.out, &format!("mf_b{b}_g{i}"), &mf.map(f64::abs).mean_axis(0)?)?;
            let frame = mf.slice_axis(0, a.frame, 1)?.reshape(&[j, j])?;
            write_map(&a.out, &format!("mf_b{b}_g{i}_f{}", a.frame), &frame)?;
            written += 2;
        }
        for (i, mfs) in bm.fused.iter().enumerate() {
            write_map(&a.out, &format!("mfs_b{b}_g{i}"), &mfs.mean_axis(0)?)?;
            let frame = mfs.slice_axis(0, a.frame, 1)?.reshape(&[j, j])?;
            write_map(&a.out, &format!("mfs_b{b}_g{i}_f{}", a.frame), &frame)?;
            written += 2;
        }
        if let Some(t) = &bm.temporal {
            write_map(&a.out, &format!("tab_b{b}"), t)?;
            written += 1;
        }
    }
    println!("wrote {written} maps to {}", a.out.display());
    Ok(())
}

fn spectral_check_cmd(a: SpectralCheckArgs) -> CliResult<()> {
    println!("frames,orthonormality,round_trip,parseval");
    for &f in &a.frames {
        let r = spectral_residuals(f, a.trials, a.seed).map_err(|e| usage(e.to_string()))?;
        println!("{},{:e},{:e},{:e}", r.frames, r.orthonormality, r.round_trip, r.parseval);
    }
    Ok(())
}

fn grad_check_cmd(a: GradCheckArgs) -> CliResult<()> {
    let mut cfg = ModelConfig::tiny();
    if let Some(path) = &a.config {
        apply_file(path, |k, v| cfg.set(k, v))?;
    }
    apply_sets(&a.set, |k, v| cfg.set(k, v))?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let model = FreqMixFormer::new(cfg.clone(), a.seed)?;
    let mut rng = Rng::with_stream(a.seed, 7);
    let x = Tensor::from_fn(&[cfg.joints, cfg.in_channels, cfg.frames], |_| rng.normal());
    let label = (a.seed % cfg.num_classes as u64) as usize;
    let r = grad_check(&model, &x, label, a.epsilon)?;
    println!("checked={}", r.checked);
    println!("kinks={}", r.kinks);
    println!("max_rel_err={:e}", r.max_rel_err);
    println!("worst={}[{}]", r.worst_param, r.worst_index);
    if !(r.max_rel_err < a.tol) {
        return Err(Error::invalid(format!("max relative error {:e} exceeds {:e}", r.max_rel_err, a.tol)).into());
    }
    Ok(())
}

fn sweep_rows(a: &SweepArgs, base: &RunConfig) -> CliResult<(&'static str, Vec<(String, RunConfig)>)> {
    if a.param == SweepParam::Ablation {
        if a.values.is_some() {
            return Err(usage("--values does not apply to the ablation sweep"));
        }
        let row = |name: &str, fab, fo, tab| {
            let mut c = base.clone();
            c.model.fab = fab;
            c.model.fo = fo;
            c.model.tab = tab;
            (name.to_string(), c)
        };
        return Ok((
            "variant",
            vec![
                row("baseline", false, false, false),
                row("+FAB", true, false, false),
                row("+FO", true, true, false),
                row("+TAB", true, true, true),
            ],
        ));
    }
    let (column, key) = match a.param {
        SweepParam::Phi => ("phi", "phi"),
        SweepParam::N => ("n", "groups"),
        _ => ("nc", "num_enhanced"),
    };
    let spec = a.values.as_deref().ok_or_else(|| usage("--values is required"))?;
    let values = parse_values(spec, a.step).map_err(|e| usage(e.to_string()))?;
    let rows = values
        .into_iter()
        .map(|v| {
            let text = if key == "phi" {
                v.to_string()
            } else if v >= 0.0 && v.fract() == 0.0 {
                (v as usize).to_string()
            } else {
                return Err(usage(format!("{column} takes whole numbers, got {v}")));
            };
            let mut c = base.clone();
            c.set(key, &text)?;
            c.validate().map_err(|e| usage(format!("{column}={text}: {e}")))?;
            Ok((text, c))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((column, rows))
}

fn sweep_cmd(a: SweepArgs) -> CliResult<()> {
    let ds = read_canonical(&a.data)?;
    let base = resolve(&ds, &a.cfg)?;
    let (column, rows) = sweep_rows(&a, &base)?;
    let digest = file_digest(&a.data)?;
    let labels: Vec<&str> = rows.iter().map(|(l, _)| l.as_str()).collect();
    let text = base.to_text();
    let id = config_hash(&format!("{text}sweep={column}\nvalues={}\ndata_sha256={digest}\n", labels.join(",")));
    let dir = a.out.join(format!("sweep-{id}"));
    create_dir(&dir)?;
    let values_flag = a.values.as_ref().map(|v| format!(" --values {v}")).unwrap_or_default();
    let step_flag = a.step.map(|s| format!(" --step {s}")).unwrap_or_default();
    write_file(
        &dir.join("replay.cfg"),
        format!(
            "# fmx sweep --param {column}{values_flag}{step_flag} --data {} --config <this file>\n# data_sha256={digest}\n{text}",
            a.data.display()
        ),
    )?;
    let mut csv = format!("{column},top1,best_val_acc,final_loss,params\n");
    for (label, c) in &rows {
        info!("sweep {column}={label}");
        let run = run_experiment(&c.model, &c.schedule, &ds)?;
        let loss = run.report.log.last().map_or(f64::NAN, |l| l.loss);
        let _ = writeln!(
            csv,
            "{label},{:.6},{:.6},{:.6},{}",
            run.metrics.top1,
            run.report.best_val_acc,
            loss,
            parameter_count(&c.model)
        );
    }
    let path = dir.join("sweep.csv");
    write_file(&path, &csv)?;
    print!("{csv}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn csv_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for entry in entries {
            if entry.is_dir() || entry.extension().is_some_and(|ext| ext == "csv") {
                csv_files(&entry, out)?;
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Long decimals are cut to four places; labels such as `0.1` are kept.
fn cell(v: &str) -> String {
    let long = v.split_once('.').is_some_and(|(_, frac)| frac.len() > 4) || v.contains('e');
    match v.parse::<f64>() {
        Ok(x) if long => format!("{x:.4}"),
        _ => v.to_string(),
    }
}

/// One Markdown table per CSV, titled by its path.
pub(super) fn markdown(path: &Path, text: &str) -> String {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(header) = lines.next() else {
        return String::new();
    };
    let cols: Vec<&str> = header.split(',').collect();
    let mut out = format!("## {}\n\n| {} |\n|", path.display(), cols.join(" | "));
    out.push_str(&"---|".repeat(cols.len()));
    out.push('\n');
    for line in lines {
        let cells: Vec<String> = line.split(',').map(cell).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out.push('\n');
    out
}

fn report_cmd(a: ReportArgs) -> CliResult<()> {
    let mut files = Vec::new();
    for input in &a.input {
        if !input.exists() {
            return Err(Error::io(input, std::io::ErrorKind::NotFound.into()).into());
        }
        csv_files(input, &mut files)?;
    }
    if files.is_empty() {
        return Err(usage("no CSV files found"));
    }
    let mut md = String::new();
    for path in &files {
        md.push_str(&markdown(path, &read_text(path)?));
    }
    match &a.out {
        Some(path) => write_file(path, md)?,
        None => print!("{md}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_tables_keep_rows() {
        let md = markdown(Path::new("a.csv"), "variant,top1\nbaseline,0.5\n+FAB,0.750000\n");
        assert_eq!(
            md,
            "## a.csv\n\n| variant | top1 |\n|---|---|\n| baseline | 0.5 |\n| +FAB | 0.7500 |\n\n"
        );
    }

    #[test]
    fn set_flags_reject_unknown_keys() {
        let mut rc = RunConfig::default();
        let err = apply_sets(&["bogus=1".into()], |k, v| rc.set(k, v)).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
        let err = apply_sets(&["phi".into()], |k, v| rc.set(k, v)).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
        apply_sets(&["phi=0.25".into(), "epochs=3".into()], |k, v| rc.set(k, v)).unwrap();
        assert_eq!((rc.model.phi, rc.schedule.epochs), (0.25, 3));
    }

    #[test]
    fn exit_codes_follow_error_kinds() {
        let io = CliError::from(Error::io("x", std::io::ErrorKind::NotFound.into()));
        assert_eq!(io.exit_code(), EXIT_IO);
        let div = CliError::from(Error::Diverged {
            epoch: 0,
            batch: 0,
            loss: f64::NAN,
        });
        assert_eq!(div.exit_code(), EXIT_DIVERGED);
        assert_eq!(CliError::from(Error::invalid("x")).exit_code(), EXIT_FAILURE);
    }
}
