use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use swab_core::config::{Branch, RunConfig};
use swab_core::data::format::{read_bundle, read_matrix_file, MatrixEncoding};
use swab_core::data::{validate_bundle, AssetBundle, ModelZoo};
use swab_core::eval::{
    generate_synthetic_universe, read_universe, run_lodo_benchmark, write_universe, SynthConfig, TargetContext,
};
use swab_core::transport::{build_cost_matrix, solve_ot, solve_partial_ot, uniform};

/// Outcome of `validate`: the process exits nonzero iff `ok` is false.
pub struct Outcome {
    pub ok: bool,
}

pub fn echo_config(cfg: &RunConfig) -> Result<()> {
    eprintln!("resolved config: {}", serde_json::to_string(cfg)?);
    Ok(())
}

fn bundle_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.join("manifest.json").exists() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        anyhow::bail!("no bundle (manifest.json) found under {}", path.display());
    }
    Ok(dirs)
}

pub fn validate(path: &Path) -> Result<Outcome> {
    let mut ok = true;
    let mut bundles = Vec::new();
    for dir in bundle_dirs(path)? {
        match read_bundle::<f64>(&dir) {
            Ok((b, info)) => {
                println!("read {} ({} format)", dir.display(), info.format_note());
                bundles.push(b);
            }
            Err(e) => {
                println!("error {}: {e}", dir.display());
                ok = false;
            }
        }
    }
    if let Some(first) = bundles.first() {
        let zoo = ModelZoo::from_bundle(first)?;
        for b in &bundles {
            let report = validate_bundle(b, &zoo);
            if report.is_ok() {
                println!("ok {}", b.dataset_id);
            } else {
                ok = false;
                for v in &report.violations {
                    println!("violation {}: {v}", b.dataset_id);
                }
            }
        }
    }
    Ok(Outcome { ok })
}

#[derive(Serialize)]
struct RankedModel {
    model_id: String,
    rank: f64,
    /// Learning branch prediction on gap-corrected texts.
    learning_gap: f64,
    learning_plain: f64,
    /// Transferred mean class rank (lower is better).
    capability: f64,
    average_rank: f64,
    imagenet: f64,
    branch_ranks: BTreeMap<Branch, f64>,
}

#[derive(Serialize)]
struct RankOutput {
    config: RunConfig,
    target: String,
    sources: Vec<String>,
    seed: u64,
    branch: Branch,
    /// Best first.
    models: Vec<RankedModel>,
}

fn load(dir: &Path) -> Result<AssetBundle<f64>> {
    Ok(read_bundle::<f64>(dir).with_context(|| format!("reading bundle {}", dir.display()))?.0)
}

pub fn rank(target: &Path, sources: &[PathBuf], out: Option<&Path>, cfg: &RunConfig) -> Result<()> {
    let target = load(target)?;
    let sources = sources.iter().map(|s| load(s)).collect::<Result<Vec<_>>>()?;
    let zoo = ModelZoo::from_bundle(&target)?;
    let refs: Vec<&AssetBundle<f64>> = sources.iter().collect();
    let ctx = TargetContext::new(&target, &refs, &zoo, cfg)?;
    let seed = cfg.seeds[0];
    let pred = ctx.predict(&target, &zoo, cfg, seed)?;
    let chosen = &pred.rankings[&cfg.branch];
    let models: Vec<RankedModel> = chosen
        .order()
        .into_iter()
        .map(|m| RankedModel {
            model_id: zoo.model_ids[m].clone(),
            rank: chosen.ranks[m],
            learning_gap: pred.learning_gap[m],
            learning_plain: pred.learning_plain[m],
            capability: pred.capability[m],
            average_rank: pred.average_rank[m],
            imagenet: pred.imagenet[m],
            branch_ranks: pred.rankings.iter().map(|(&b, r)| (b, r.ranks[m])).collect(),
        })
        .collect();

    println!("{:<4} {:<20} {:>8} {:>12} {:>12}", "#", "model", "rank", "learning", "capability");
    for (i, m) in models.iter().enumerate() {
        println!("{:<4} {:<20} {:>8.2} {:>12.5} {:>12.5}", i + 1, m.model_id, m.rank, m.learning_gap, m.capability);
    }
    let output = RankOutput {
        config: cfg.clone(),
        target: target.dataset_id.clone(),
        sources: sources.iter().map(|b| b.dataset_id.clone()).collect(),
        seed,
        branch: cfg.branch,
        models,
    };
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&output)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn bench(universe: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let (bundles, zoo) = read_universe(universe).with_context(|| format!("reading universe {}", universe.display()))?;
    let report = run_lodo_benchmark(&bundles, &zoo, cfg)?;
    report.write(out)?;
    print!("{}", report.summary_table());
    println!("report written to {}", out.join("report.json").display());
    Ok(())
}

pub fn synth(out: &Path, seed: u64, config: Option<&Path>, heterogeneous: bool, csv: bool) -> Result<()> {
    let base = if heterogeneous { SynthConfig::heterogeneous() } else { SynthConfig::default() };
    let cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => base,
    };
    eprintln!("synth config: {}", serde_json::to_string(&cfg)?);
    let u = generate_synthetic_universe(&cfg, seed)?;
    let encoding = if csv { MatrixEncoding::Csv } else { MatrixEncoding::SwabMat };
    write_universe(out, &u, encoding)?;
    println!("wrote {} datasets x {} models to {}", u.bundles.len(), u.zoo.len(), out.display());
    Ok(())
}

pub fn ot(source: &Path, target: &Path, partial: bool, out: Option<&Path>, cfg: &RunConfig) -> Result<()> {
    let (_, src) = read_matrix_file::<f64>(source).with_context(|| format!("reading {}", source.display()))?;
    let (_, tgt) = read_matrix_file::<f64>(target).with_context(|| format!("reading {}", target.display()))?;
    let cost = build_cost_matrix(&src, &tgt, cfg.exponentiate_cost)?;
    let u = uniform::<f64>(src.rows());
    let v = uniform::<f64>(tgt.rows());
    let plan = if partial {
        solve_partial_ot(&cost, &u, &v, cfg.mass_fraction)?
    } else {
        solve_ot(&cost, &u, &v, cfg.ot_method, &cfg.sinkhorn)?
    };
    println!("{}", serde_json::to_string(&plan.sidecar())?);
    for row in plan.plan.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
        println!("{}", cells.join(" "));
    }
    if let Some(path) = out {
        plan.write(path, "ot")?;
    }
    Ok(())
}
