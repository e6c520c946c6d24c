use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{
    BenchArgs, ClassifyArgs, Cli, Command, EmbedArgs, FitArgs, FitOptArgs, GenToyArgs, GramArgs,
    KernelArgs, KernelKind, SpikeToyArgs, StructureDumpArgs, SymbolKind, ToyKind,
};
use crate::cv::{format_table, kernel_grid, median_symbol_distance, nested_cv, CvOptions, GridFamily};
use crate::data::{gen_sine_cosine, gen_sine_square_spike, parse_dataset, write_dataset, write_seqt, Dataset};
use crate::error::{Error, Result};
use crate::gram::{build_gram, export_csv, save_gram, write_matrix_csv, DEFAULT_PSD_TOL};
use crate::kernels::{
    log_global_alignment_kernel, sequence_kernel, KernelConfig, SequenceKernel, StructureKernel,
    StructureMatrix, SymbolKernel,
};
use crate::learn::{class_separation, fit_hyperparameters, kernel_pca, FitOptions, FitResult};
use crate::sequence::Sequence;

/// The five structure-matrix panels: one exponential and four path kernels
/// with (C_d, C_hv) = (0.3, 0.3), (0.35, 0.33), (0.35, 0.37), (0.3, 0.37).
pub const STRUCTURE_PANELS: [(&str, StructureKernel); 5] = [
    ("panel1-exponential", StructureKernel::Exponential { alpha: 16.0 }),
    ("panel2-path-cd0.30-chv0.30", StructureKernel::Path { chv: 0.3, cd: 0.3 }),
    ("panel3-path-cd0.35-chv0.33", StructureKernel::Path { chv: 0.33, cd: 0.35 }),
    ("panel4-path-cd0.35-chv0.37", StructureKernel::Path { chv: 0.37, cd: 0.35 }),
    ("panel5-path-cd0.30-chv0.37", StructureKernel::Path { chv: 0.37, cd: 0.3 }),
];

pub(super) fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gram(a) => cmd_gram(cli, a),
        Command::StructureDump(a) => cmd_structure_dump(cli, a),
        Command::Classify(a) => cmd_classify(cli, a),
        Command::Embed(a) => cmd_embed(cli, a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::GenToy(a) => cmd_gen_toy(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
    }
}

/// Buffered writer to `path`, or stdout.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn build_kernel(cli: &Cli, args: &KernelArgs, data: &Dataset) -> Result<SequenceKernel> {
    let k = args.build(cli.normalize(), || median_symbol_distance(data, cli.seed))?;
    warn_growth(&k);
    Ok(k)
}

fn warn_growth(kernel: &SequenceKernel) {
    if let Some(w) = kernel.as_decomposable().and_then(|c| c.structure.growth_warning()) {
        log::warn!("{w}");
    }
}

fn cmd_gram(cli: &Cli, a: &GramArgs) -> Result<i32> {
    let data = parse_dataset(&a.dataset)?;
    let kernel = build_kernel(cli, &a.kernel, &data)?;
    let g = build_gram(&data.sequences, &kernel)?;
    let psd = g.check_psd(DEFAULT_PSD_TOL)?;
    let csv = a.csv || cli.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "csv"));
    match (&cli.out, csv) {
        (Some(p), false) => save_gram(&g, p)?,
        (p, _) => {
            let mut w = output(p.as_deref())?;
            export_csv(&g, &mut w)?;
            w.flush()?;
        }
    }
    eprintln!("{n}x{n} Gram, kernel {}", kernel.describe(), n = g.len());
    eprintln!(
        "psd: min eigenvalue {:.6e}, max eigenvalue {:.6e}: {}",
        psd.min_eig,
        psd.max_eig,
        if psd.pass { "pass" } else { "FAIL" }
    );
    Ok(if psd.pass { 0 } else { 1 })
}

fn structure_csv(kernel: StructureKernel, max_len: usize, path: Option<&Path>) -> Result<()> {
    let m = StructureMatrix::new(kernel, max_len)?;
    let mat = DMatrix::from_row_slice(max_len, max_len, m.values());
    let mut w = output(path)?;
    write_matrix_csv(&mat, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_structure_dump(cli: &Cli, a: &StructureDumpArgs) -> Result<i32> {
    let max_len = a.max_len as usize;
    if a.panels {
        let dir = cli
            .out
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("--panels needs --out <directory>".into()))?;
        fs::create_dir_all(dir)?;
        for (name, kernel) in STRUCTURE_PANELS {
            let path = dir.join(format!("{name}.csv"));
            if let Some(w) = kernel.growth_warning() {
                log::warn!("{name}: {w}");
            }
            structure_csv(kernel, max_len, Some(&path))?;
            eprintln!("wrote {}", path.display());
        }
        return Ok(0);
    }
    let kernel = a.kernel.structure()?;
    if let Some(w) = kernel.growth_warning() {
        log::warn!("{w}");
    }
    structure_csv(kernel, max_len, cli.out.as_deref())?;
    Ok(0)
}

fn cmd_classify(cli: &Cli, a: &ClassifyArgs) -> Result<i32> {
    let data = parse_dataset(&a.dataset)?;
    let normalize = cli.normalize();
    let family = match (a.fixed, a.kernel.kernel, a.kernel.symbol) {
        (false, KernelKind::Path, SymbolKind::Rbf) => Some(GridFamily::Path),
        (false, KernelKind::Exponential, SymbolKind::Rbf) => Some(GridFamily::Exponential),
        (false, KernelKind::Ga, _) => Some(GridFamily::GlobalAlignment),
        _ => None,
    };
    let candidates = match family {
        Some(f) => {
            let base = match a.kernel.sigma {
                Some(s) => s,
                None => median_symbol_distance(&data, cli.seed)?,
            };
            kernel_grid(f, base, normalize)
        }
        None => kernel_grid(GridFamily::Fixed(build_kernel(cli, &a.kernel, &data)?), 1.0, normalize),
    };
    let opts = CvOptions {
        outer_folds: a.outer_folds as usize,
        inner_folds: a.inner_folds as usize,
        outer_reps: a.outer_reps as usize,
        inner_reps: a.inner_reps as usize,
        c_grid: a.c_grid.clone(),
        svm_tol: a.tol,
        seed: cli.seed,
        record_timings: a.record_timings,
    };
    let report = nested_cv(&data, &candidates, &opts)?;
    print!("{}", format_table(&report));
    if let Some(p) = &cli.out {
        write_json(Some(p), &report)?;
    }
    Ok(0)
}

fn fit_options(a: &FitOptArgs) -> FitOptions {
    FitOptions { budget: a.budget, noise: a.noise, fit_noise: !a.fixed_noise, ..Default::default() }
}

fn cmd_embed(cli: &Cli, a: &EmbedArgs) -> Result<i32> {
    let data = parse_dataset(&a.dataset)?;
    let mut kernel = build_kernel(cli, &a.kernel, &data)?;
    if a.fit {
        let cfg = kernel
            .as_decomposable()
            .ok_or_else(|| Error::Unsupported("--fit needs a decomposable kernel".into()))?;
        let r = fit_hyperparameters(&data.sequences, &data.labels()?, cfg, &fit_options(&a.fit_opts))?;
        eprintln!("fitted {} ({:?}, lml {:.6})", SequenceKernel::from(r.config).describe(), r.status, r.lml);
        kernel = r.config.into();
    }
    let g = build_gram(&data.sequences, &kernel)?;
    let p = a.p as usize;
    let e = kernel_pca(&g.values, p)?;

    let mut w = output(cli.out.as_deref())?;
    let header: Vec<String> = (1..=p).map(|c| format!("pc{c}")).collect();
    writeln!(w, "id,label,{}", header.join(","))?;
    for (i, s) in data.sequences.iter().enumerate() {
        let row: Vec<String> = e.coordinates.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{},{}", s.id(), s.label().unwrap_or(""), row.join(","))?;
    }
    w.flush()?;
    eprintln!("eigenvalues: {:?}", e.eigenvalues);
    if let Ok(labels) = data.labels() {
        if let Ok(s) = class_separation(&e.coordinates, &labels) {
            eprintln!(
                "class centroids {:.4} apart, mean within-class spread {:.4} (ratio {:.2})",
                s.between, s.within, s.ratio
            );
        }
    }
    Ok(0)
}

/// Path-weight diagnostics of a fitted configuration.
#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub chv: Option<f64>,
    pub cd: Option<f64>,
    pub cd_over_chv: Option<f64>,
}

impl FitDiagnostics {
    fn of(cfg: &KernelConfig) -> Self {
        match cfg.structure {
            StructureKernel::Path { chv, cd } => Self { chv: Some(chv), cd: Some(cd), cd_over_chv: Some(cd / chv) },
            _ => Self { chv: None, cd: None, cd_over_chv: None },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub version: String,
    pub seed: u64,
    pub labeling: String,
    pub start: KernelConfig,
    pub options: FitOptions,
    pub result: FitResult,
    pub diagnostics: FitDiagnostics,
}

fn fit_report(data: &Dataset, labeling: &str, cfg0: &KernelConfig, opts: &FitOptions, seed: u64) -> Result<FitReport> {
    let result = fit_hyperparameters(&data.sequences, &data.labels()?, cfg0, opts)?;
    Ok(FitReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        labeling: labeling.to_string(),
        start: *cfg0,
        options: opts.clone(),
        diagnostics: FitDiagnostics::of(&result.config),
        result,
    })
}

/// Fits on both labelings of the sine/square spike data, starting both runs
/// from the same configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SpikeComparison {
    pub version: String,
    pub seed: u64,
    pub n_per_class: usize,
    pub len: usize,
    pub noise_sd: f64,
    pub waveform: FitReport,
    pub spike: FitReport,
    /// Whether C_d/C_hv came out higher for the waveform task. Expected
    /// direction only; not a pass/fail criterion.
    pub ratio_higher_for_waveform: Option<bool>,
}

/// Generates the spike dataset and fits `cfg0` (default: rbf with the
/// median symbol distance x path(0.3, 0.3), normalized) to both labelings.
pub fn spike_comparison(
    toy: &SpikeToyArgs,
    seed: u64,
    cfg0: Option<KernelConfig>,
    opts: &FitOptions,
) -> Result<SpikeComparison> {
    let d = gen_sine_square_spike(toy.n_per_class, toy.len, toy.noise_sd, seed)?;
    let cfg0 = match cfg0 {
        Some(c) => c,
        None => KernelConfig::new(
            SymbolKernel::Rbf { sigma: median_symbol_distance(&d.waveform, seed)? },
            StructureKernel::Path { chv: 0.3, cd: 0.3 },
        ),
    };
    let waveform = fit_report(&d.waveform, "waveform", &cfg0, opts, seed)?;
    let spike = fit_report(&d.spike, "spike", &cfg0, opts, seed)?;
    let ratio_higher_for_waveform = match (waveform.diagnostics.cd_over_chv, spike.diagnostics.cd_over_chv) {
        (Some(w), Some(s)) => Some(w > s),
        _ => None,
    };
    Ok(SpikeComparison {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        n_per_class: toy.n_per_class,
        len: toy.len,
        noise_sd: toy.noise_sd,
        waveform,
        spike,
        ratio_higher_for_waveform,
    })
}

fn describe_fit(r: &FitReport) -> String {
    let d = &r.diagnostics;
    let mut s = format!(
        "{}: {} after {} iterations ({:?}), lml {:.6}, noise {:.4e}",
        r.labeling,
        SequenceKernel::from(r.result.config).describe(),
        r.result.iterations,
        r.result.status,
        r.result.lml,
        r.result.noise
    );
    if let (Some(cd), Some(chv), Some(ratio)) = (d.cd, d.chv, d.cd_over_chv) {
        s.push_str(&format!("; C_d = {cd:.4}, C_hv = {chv:.4}, C_d/C_hv = {ratio:.4}"));
    }
    s
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<i32> {
    let opts = fit_options(&a.fit_opts);
    if a.spike_experiment {
        let cfg0 = match a.kernel.sigma {
            Some(_) => a.kernel.build(cli.normalize(), || Ok(1.0))?.as_decomposable().copied(),
            None => None,
        };
        let cmp = spike_comparison(&a.toy, cli.seed, cfg0, &opts)?;
        eprintln!("{}", describe_fit(&cmp.waveform));
        eprintln!("{}", describe_fit(&cmp.spike));
        match cmp.ratio_higher_for_waveform {
            Some(true) => eprintln!("C_d/C_hv is higher for the waveform task (expected direction)"),
            Some(false) => eprintln!("C_d/C_hv is not higher for the waveform task (expected: higher)"),
            None => {}
        }
        write_json(cli.out.as_deref(), &cmp)?;
        return Ok(0);
    }
    let path = a.dataset.as_ref().expect("clap requires a dataset");
    let data = parse_dataset(path)?;
    let kernel = build_kernel(cli, &a.kernel, &data)?;
    let cfg0 = kernel
        .as_decomposable()
        .ok_or_else(|| Error::Unsupported("fitting needs a decomposable kernel".into()))?;
    let report = fit_report(&data, "labels", cfg0, &opts, cli.seed)?;
    eprintln!("{}", describe_fit(&report));
    write_json(cli.out.as_deref(), &report)?;
    Ok(0)
}

fn cmd_gen_toy(cli: &Cli, a: &GenToyArgs) -> Result<i32> {
    match a.kind {
        ToyKind::SineCosine => {
            let d = gen_sine_cosine(a.toy.n_per_class, (a.len_min, a.len_max), a.toy.noise_sd, cli.seed)?;
            write_seqt_to(&d, cli.out.as_deref())?;
        }
        ToyKind::SineSquareSpike => {
            let d = gen_sine_square_spike(a.toy.n_per_class, a.toy.len, a.toy.noise_sd, cli.seed)?;
            write_seqt_to(&d.waveform, cli.out.as_deref())?;
            let spike_path: Option<PathBuf> =
                a.spike_out.clone().or_else(|| cli.out.as_ref().map(|p| p.with_extension("spike.seqt")));
            match spike_path {
                Some(p) => {
                    write_dataset(&d.spike, &p)?;
                    eprintln!("spike labeling written to {}", p.display());
                }
                None => eprintln!("waveform labeling only; pass --out or --spike-out for the spike labeling"),
            }
        }
    }
    Ok(0)
}

fn write_seqt_to(d: &Dataset, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    write_seqt(d, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub len: usize,
    pub kernel_seconds: f64,
    pub kernel_ratio: Option<f64>,
    pub ga_seconds: f64,
    pub ga_ratio: Option<f64>,
}

fn random_sequence(id: &str, len: usize, rng: &mut ChaCha8Rng) -> Result<Sequence> {
    Sequence::univariate(id, (0..len).map(|_| StandardNormal.sample(rng)).collect())
}

/// Median seconds per evaluation of `kernel` on one random pair of
/// length-`len` sequences. Decomposable kernels use a prebuilt structure
/// matrix, as in Gram computation. Each timing sample repeats the
/// evaluation until it spans at least a millisecond.
pub fn bench_pair(kernel: &SequenceKernel, len: usize, reps: usize, seed: u64) -> Result<f64> {
    if len == 0 || len > 4096 {
        return Err(Error::domain(format!("bench lengths must be in 1..=4096, got {len}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = random_sequence("s", len, &mut rng)?;
    let t = random_sequence("t", len, &mut rng)?;
    let eval: Box<dyn Fn() -> Result<f64>> = match kernel {
        SequenceKernel::Decomposable(cfg) => {
            let m = StructureMatrix::new(cfg.structure, len)?;
            let cfg = *cfg;
            Box::new(move || sequence_kernel(&s, &t, &cfg, Some(&m)))
        }
        SequenceKernel::GlobalAlignment { sigma, .. } => {
            let sigma = *sigma;
            Box::new(move || log_global_alignment_kernel(&s, &t, sigma))
        }
    };
    let v = eval()?;
    if !v.is_finite() {
        return Err(Error::Numerical(format!("kernel value {v} at length {len}")));
    }
    let mut inner = 1usize;
    loop {
        let t0 = Instant::now();
        for _ in 0..inner {
            std::hint::black_box(eval()?);
        }
        if t0.elapsed().as_secs_f64() >= 1e-3 || inner >= 1 << 20 {
            break;
        }
        inner *= 2;
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        for _ in 0..inner {
            std::hint::black_box(eval()?);
        }
        samples.push(t0.elapsed().as_secs_f64() / inner as f64);
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}

/// Timing rows for `kernel` next to the global alignment kernel.
pub fn bench_table(kernel: &SequenceKernel, ga_sigma: f64, lengths: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let ga = SequenceKernel::GlobalAlignment { sigma: ga_sigma, normalize: false };
    let mut rows: Vec<BenchRow> = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let k = bench_pair(kernel, len, reps, seed)?;
        let g = bench_pair(&ga, len, reps, seed)?;
        let prev = rows.last();
        rows.push(BenchRow {
            len,
            kernel_seconds: k,
            kernel_ratio: prev.map(|p| k / p.kernel_seconds),
            ga_seconds: g,
            ga_ratio: prev.map(|p| g / p.ga_seconds),
        });
    }
    Ok(rows)
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<i32> {
    let kernel = a.kernel.build(cli.normalize(), || Ok(1.0))?;
    let ga_sigma = a.kernel.sigma.unwrap_or(1.0);
    let rows = bench_table(&kernel, ga_sigma, &a.lengths, a.reps as usize, cli.seed)?;
    let mut w = output(cli.out.as_deref())?;
    writeln!(w, "kernel: {} vs global_alignment(sigma={ga_sigma})", kernel.describe())?;
    writeln!(w, "{:>6} {:>14} {:>8} {:>14} {:>8}", "len", "kernel_us", "ratio", "ga_us", "ratio")?;
    let ratio = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{r:.2}"));
    for r in &rows {
        writeln!(
            w,
            "{:>6} {:>14.3} {:>8} {:>14.3} {:>8}",
            r.len,
            r.kernel_seconds * 1e6,
            ratio(r.kernel_ratio),
            r.ga_seconds * 1e6,
            ratio(r.ga_ratio)
        )?;
    }
    w.flush()?;
    Ok(0)
}
