//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use multinex::analysis::{descriptor_importance, lra, magnitude_correlation};
use multinex::guidance::{
    all_descriptors, chroma_candidate_pool, dump_stack, extended_candidates, luminance_candidate_pool,
    luminance_stack, rec709_gray, reflectance_stack, GuidanceStack,
};
use multinex::io::{load_image, save_image};
use multinex::metrics::evaluate;
use multinex::nn::{checkpoint, count_gflops, count_params, enhance, ModelParams, VariantConfig};
use multinex::train::{synthetic_pairs, train_from, write_dataset, DarkenConfig, PairedDataset, TrainConfig};
use multinex::Tensor;

use crate::files;
use crate::Failure;
use crate::{
    AnalyzeCommand, Command, CorrArgs, DiaArgs, EnhanceArgs, EvalArgs, LraArgs, ParamsArgs, StackChoice,
    StacksArgs, SynthArgs, TrainArgs,
};

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Enhance(a) => cmd_enhance(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Stacks(a) => cmd_stacks(&a),
        Command::Analyze(AnalyzeCommand::Dia(a)) => cmd_dia(&a),
        Command::Analyze(AnalyzeCommand::Lra(a)) => cmd_lra(&a),
        Command::Analyze(AnalyzeCommand::Corr(a)) => cmd_corr(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Params(a) => cmd_params(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{} is not a readable file", path.display())))
    }
}

fn stem(name: &str) -> &str {
    Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name)
}

fn cmd_enhance(a: &EnhanceArgs) -> Result<(), Failure> {
    let cfg = VariantConfig::by_name(&a.variant)?;
    let inputs = files::inputs(&a.input)?;
    let params = match &a.weights {
        Some(w) => checkpoint::load_for(w, &cfg)?,
        None => ModelParams::<f32>::init(&cfg, a.seed)?,
    };
    let single = a.input.is_file();
    let out_dir = if single {
        a.output.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        a.output.clone()
    };
    if !out_dir.as_os_str().is_empty() {
        files::ensure_dir(&out_dir)?;
    }
    let notes = files::par_map(&inputs, |(name, path)| {
        let img = load_image(path)?;
        let out = enhance(&img, &params, &cfg)?;
        let target = if single { a.output.clone() } else { out_dir.join(name) };
        save_image(&out.output, &target)?;
        let mut note = format!("{} -> {}", path.display(), target.display());
        if a.dump_deltas {
            for (label, delta) in [("delta_l", &out.delta_l), ("delta_r", &out.delta_r)] {
                let Some(d) = delta else { continue };
                let (mapped, lo, hi) = files::to_unit_range(d);
                let p = out_dir.join(format!("{}_{label}.png", stem(name)));
                save_image(&mapped, &p)?;
                let _ = write!(note, "\n  {label}: [{lo:.6}, {hi:.6}] -> [0, 1], {}", p.display());
            }
        }
        Ok(note)
    })?;
    for n in notes {
        println!("{n}");
    }
    Ok(())
}

/// File values first, then flags.
fn train_config(a: &TrainArgs) -> Result<(TrainConfig, VariantConfig), Failure> {
    let mut variant = None;
    let mut cfg = match &a.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?;
            let obj = value
                .as_object_mut()
                .ok_or_else(|| Failure::Domain(format!("{}: expected a JSON object", p.display())))?;
            if let Some(v) = obj.remove("variant") {
                let name = v
                    .as_str()
                    .ok_or_else(|| Failure::Domain("config key 'variant' must be a string".into()))?;
                variant = Some(name.to_string());
            }
            serde_json::from_value(value).map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = &a.variant {
        variant = Some(v.clone());
    }
    let variant = VariantConfig::by_name(variant.as_deref().unwrap_or("lightweight"))?;
    if let Some(v) = a.iters {
        cfg.iterations = v;
    }
    if let Some(v) = a.batch {
        cfg.batch = v;
    }
    if let Some(v) = a.patch {
        cfg.patch = v;
    }
    if let Some(v) = a.lr_start {
        cfg.lr_start = v;
    }
    if let Some(v) = a.lr_end {
        cfg.lr_end = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.log_every {
        cfg.log_every = v;
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    if a.no_augment {
        cfg.random_crop = false;
        cfg.flip = false;
        cfg.rotate = false;
    }
    cfg.validate()?;
    Ok((cfg, variant))
}

fn cmd_train(a: &TrainArgs) -> Result<(), Failure> {
    let (cfg, variant) = train_config(a)?;
    if !a.data.is_dir() {
        return Err(Failure::Usage(format!("{} is not a directory", a.data.display())));
    }
    let ds = PairedDataset::open(&a.data)?;
    let params = match &a.resume {
        Some(p) => checkpoint::load_for(p, &variant)?,
        None => ModelParams::init(&variant, cfg.seed)?,
    };
    let outcome = train_from(&ds, &variant, &cfg, params, Some(&a.out), None)?;
    println!(
        "{} pairs, {} iterations, {} parameters",
        ds.len(),
        cfg.iterations,
        outcome.params.num_params()
    );
    if let Some(last) = outcome.trace.last() {
        println!(
            "final loss {:.6} (mse {:.6}, ms-ssim {:.6}, perc {:.6})",
            last.total, last.mse, last.msssim, last.perc
        );
    }
    println!("wrote {}", a.out.join("final.mnx").display());
    Ok(())
}

fn build_stack(img: &Tensor<f64>, choice: StackChoice) -> Result<GuidanceStack<f64>, Failure> {
    Ok(match choice {
        StackChoice::Luminance => luminance_stack(img)?,
        StackChoice::Reflectance => reflectance_stack(img)?,
        StackChoice::Both => GuidanceStack::concat(&[&luminance_stack(img)?, &reflectance_stack(img)?])?,
        StackChoice::Extended => extended_candidates(img)?,
        StackChoice::All => all_descriptors(img)?,
        StackChoice::LuminancePool => luminance_candidate_pool(img)?,
        StackChoice::ChromaPool => chroma_candidate_pool(img)?,
    })
}

fn load_f64(path: &Path) -> Result<Tensor<f64>, Failure> {
    require_file(path)?;
    Ok(load_image(path)?.cast::<f64>())
}

fn cmd_stacks(a: &StacksArgs) -> Result<(), Failure> {
    let stack = build_stack(&load_f64(&a.input)?, a.stack)?;
    for p in dump_stack(&stack, &a.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_dia(a: &DiaArgs) -> Result<(), Failure> {
    let pool = build_stack(&load_f64(&a.input)?, a.pool)?;
    let rep = descriptor_importance(&pool)?;
    files::ensure_dir(&a.out)?;
    files::write_text(&a.out.join("importance.csv"), &rep.to_csv())?;
    print!("{rep}");
    let peak = |f: fn(&multinex::analysis::DescriptorImportance) -> &Tensor<f64>| {
        rep.rows.iter().map(|r| f(r).max_value()).fold(0.0f64, f64::max)
    };
    let (pe, pg) = (peak(|r| &r.delta_e_map), peak(|r| &r.delta_g_map));
    for r in &rep.rows {
        for (tag, map, p) in [("deltaE", &r.delta_e_map, pe), ("deltaG", &r.delta_g_map, pg)] {
            let scaled = if p > 0.0 { map.map(|v| v / p) } else { map.clone() };
            save_image(&scaled, a.out.join(format!("{}_{tag}.png", r.name)))?;
        }
    }
    println!("maps divided by their common peak: deltaE {pe:.6}, deltaG {pg:.6}");
    Ok(())
}

fn cmd_lra(a: &LraArgs) -> Result<(), Failure> {
    let img = load_f64(&a.input)?;
    let stack = build_stack(&img, a.stack)?;
    let target = match a.target.as_str() {
        "rgb" => img.clone(),
        "luma" => rec709_gray(&img)?,
        "self" => stack.tensor.clone(),
        path => {
            let t = load_f64(Path::new(path))?;
            if (t.height(), t.width()) != (img.height(), img.width()) {
                return Err(Failure::Domain(format!(
                    "target {} is {}x{}, input is {}x{}",
                    path,
                    t.width(),
                    t.height(),
                    img.width(),
                    img.height()
                )));
            }
            t
        }
    };
    let out = lra(&stack.tensor, &target, a.d, a.lambda)?;
    let picture = match out.reconstruction.channels() {
        1 | 3 => out.reconstruction.clone(),
        _ => files::tile_channels(&out.reconstruction),
    };
    if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        files::ensure_dir(parent)?;
    }
    save_image(&picture, &a.output)?;
    let mut json = serde_json::to_value(&out.report).map_err(|e| Failure::Domain(e.to_string()))?;
    json["stack"] = serde_json::json!(stack.names);
    json["target"] = serde_json::json!(a.target);
    let report_path = a.report.clone().unwrap_or_else(|| a.output.with_extension("json"));
    let text = serde_json::to_string_pretty(&json).map_err(|e| Failure::Domain(e.to_string()))?;
    files::write_text(&report_path, &(text + "\n"))?;
    println!("stack: {}", stack.names.join(","));
    println!("mse: {:.6e}", out.report.mse);
    println!("wrote {} and {}", a.output.display(), report_path.display());
    Ok(())
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), Failure> {
    match output {
        Some(p) => files::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_corr(a: &CorrArgs) -> Result<(), Failure> {
    let stack = build_stack(&load_f64(&a.input)?, a.stack)?;
    let groups = stack
        .names
        .iter()
        .map(|n| Ok((n.clone(), stack.descriptor(n)?)))
        .collect::<Result<Vec<_>, multinex::Error>>()?;
    emit(&magnitude_correlation(&groups)?.to_csv(), a.output.as_ref())
}

/// `(name, prediction, reference)` triples sorted by name.
fn eval_pairs(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>, Failure> {
    let preds = files::inputs(pred)?;
    if gt.is_dir() {
        preds
            .into_iter()
            .map(|(name, p)| {
                let g = gt.join(&name);
                if g.is_file() {
                    Ok((name, p, g))
                } else {
                    Err(Failure::Domain(format!("{} has no reference in {}", p.display(), gt.display())))
                }
            })
            .collect()
    } else if pred.is_dir() {
        Err(Failure::Usage(format!("{} must be a directory when --pred is one", gt.display())))
    } else {
        require_file(gt)?;
        Ok(preds.into_iter().map(|(n, p)| (n, p, gt.to_path_buf())).collect())
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let pairs = eval_pairs(&a.pred, &a.gt)?;
    let rows = files::par_map(&pairs, |(name, p, g)| {
        let (pred, gt) = (load_image(p)?, load_image(g)?);
        let base = evaluate(&pred, &gt, false)?;
        let mut row = format!("{name},{:.6},{:.6},{:.6}", base.psnr, base.ssim, base.msssim);
        if a.gt_mean {
            let gm = evaluate(&pred, &gt, true)?;
            let _ = write!(row, ",{:.6},{:.6},{:.6}", gm.psnr, gm.ssim, gm.q.unwrap_or(1.0));
        }
        Ok(row)
    })?;
    let mut csv = String::from("file,psnr,ssim,msssim");
    if a.gt_mean {
        csv.push_str(",psnr_gtmean,ssim_gtmean,q");
    }
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    emit(&csv, a.output.as_ref())
}

fn cmd_params(a: &ParamsArgs) -> Result<(), Failure> {
    let cfg = VariantConfig::by_name(&a.variant)?;
    let (w, h) = files::parse_resolution(&a.resolution)?;
    let table = count_params(&cfg)?;
    println!("{table}");
    println!("total parameters: {}", table.total);
    println!("GFLOPs at {w}x{h}: {:.4}", count_gflops(&cfg, h, w)?);
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<(), Failure> {
    if a.count == 0 || a.size == 0 {
        return Err(Failure::Usage("--count and --size must be positive".into()));
    }
    let cfg = DarkenConfig {
        noise: a.noise,
        ..DarkenConfig::default()
    };
    let pairs = synthetic_pairs(a.count, a.size, a.size, a.seed, &cfg);
    write_dataset(&a.out, &pairs)?;
    println!("wrote {} pairs under {}", pairs.len(), a.out.display());
    Ok(())
}
