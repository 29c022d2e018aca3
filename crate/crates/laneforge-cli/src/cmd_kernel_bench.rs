//! Kernel throughput: times each forward kernel on the requested sizes and
//! emits CSV with a deterministic multiply-accumulate count per row, so runs
//! on different machines stay comparable.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use laneforge::config::RunConfig;
use laneforge::kernels::{
    conv3x3, deformable_sample, depthwise_conv, lka_forward, msa_forward, offset_channels,
    reference, Conv3x3Weights, DeformParams, DepthwiseKernel, LkaWeights, MsaVariant, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{io_err, BenchVariant, CliError};

fn parse_sizes(s: &str) -> Result<Vec<(usize, usize, usize)>, CliError> {
    let bad = |part: &str| CliError::Usage(format!("size \"{part}\" is not CxHxW"));
    let mut out = Vec::new();
    for part in s.split(',') {
        let dims: Vec<&str> = part.trim().split(['x', 'X']).collect();
        if dims.len() != 3 {
            return Err(bad(part));
        }
        let parse = |d: &str| d.trim().parse::<usize>().map_err(|_| bad(part));
        let (c, h, w) = (parse(dims[0])?, parse(dims[1])?, parse(dims[2])?);
        if c == 0 || h == 0 || w == 0 {
            return Err(bad(part));
        }
        out.push((c, h, w));
    }
    Ok(out)
}

fn msa_variant(v: BenchVariant) -> MsaVariant {
    match v {
        BenchVariant::Baseline => MsaVariant::Baseline,
        BenchVariant::A => MsaVariant::A,
        BenchVariant::B => MsaVariant::B,
        BenchVariant::C => MsaVariant::C,
    }
}

fn variant_name(v: BenchVariant) -> &'static str {
    match v {
        BenchVariant::Baseline => "msa-baseline",
        BenchVariant::A => "msa-a",
        BenchVariant::B => "msa-b",
        BenchVariant::C => "msa-c",
    }
}

/// Multiply-accumulates per full output map, by construction of each kernel.
/// Strip pairs contribute 2k per cell; 1x1 mixes contribute c per cell.
fn op_count(kernel: &str, c: usize, h: usize, w: usize) -> u64 {
    let cells = (c * h * w) as u64;
    let c = c as u64;
    let strips: u64 = [7u64, 11, 21].iter().map(|k| 2 * k).sum();
    let msa = |pre: u64, agg: u64| pre + agg + c; // ... + w1 mix
    let per_cell = match kernel {
        "dconv5" => 25,
        "msa-baseline" => msa(c, 121),
        "msa-a" => msa(c, strips),
        "msa-b" => msa(c, strips + 1),
        "msa-c" => msa(25, strips + 1),
        // attention (variant C) + w2 mix + hadamard + residual + 2-layer FFN
        "lka" => msa(25, strips + 1) + c + 2 + 2 * c + 1,
        // 9 taps: 4-corner sampling per input channel + c-wide accumulation
        "deform" => 36 + 9 * c,
        other => unreachable!("unknown kernel row {other}"),
    };
    cells * per_cell
}

/// Times `f` adaptively: doubles repetitions until the batch takes at least
/// 10 ms or 64 repetitions, then reports nanoseconds per output cell.
fn time_per_cell<T>(cells: usize, mut f: impl FnMut() -> T) -> f64 {
    black_box(f()); // warmup
    let mut reps = 1u32;
    loop {
        let t0 = Instant::now();
        for _ in 0..reps {
            black_box(f());
        }
        let dt = t0.elapsed();
        if dt.as_millis() >= 10 || reps >= 64 {
            return dt.as_nanos() as f64 / (reps as u64 * cells as u64) as f64;
        }
        reps *= 2;
    }
}

fn check_oracles(seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variants = [
        MsaVariant::Baseline,
        MsaVariant::A,
        MsaVariant::B,
        MsaVariant::C,
    ];
    for _ in 0..10 {
        let c = rng.random_range(1..=4usize);
        let h = rng.random_range(3..=8usize);
        let w = rng.random_range(3..=8usize);
        let x = Tensor::random(c, h, w, &mut rng);
        let weights = LkaWeights::random(c, &mut rng);
        for &v in &variants {
            let diff = msa_forward(&x, &weights, v)
                .expect("shapes agree by construction")
                .max_abs_diff(&reference::naive_msa(&x, &weights, v))
                .expect("same shape");
            if diff > 1e-6 {
                return Err(CliError::Data(format!("msa oracle mismatch: {diff}")));
            }
        }
        let diff = lka_forward(&x, &weights)
            .expect("shapes agree by construction")
            .max_abs_diff(&reference::naive_lka(&x, &weights))
            .expect("same shape");
        if diff > 1e-6 {
            return Err(CliError::Data(format!("lka oracle mismatch: {diff}")));
        }

        let mut offsets = Tensor::random(offset_channels(1), h, w, &mut rng);
        for v in &mut offsets.data {
            *v *= 2.0;
        }
        let d = DeformParams {
            deform_groups: 1,
            weights: Conv3x3Weights::random(c, c, &mut rng),
        };
        let diff = deformable_sample(&x, &offsets, &d)
            .expect("shapes agree by construction")
            .max_abs_diff(&reference::naive_deformable(&x, &offsets, &d))
            .expect("same shape");
        if diff > 1e-6 {
            return Err(CliError::Data(format!(
                "deformable oracle mismatch: {diff}"
            )));
        }
        let zero = Tensor::zeros(offset_channels(1), h, w);
        let diff = deformable_sample(&x, &zero, &d)
            .expect("shapes agree by construction")
            .max_abs_diff(&conv3x3(&x, &d.weights).expect("shapes agree"))
            .expect("same shape");
        if diff > 1e-12 {
            return Err(CliError::Data(format!(
                "zero-offset deformable departs from conv3x3: {diff}"
            )));
        }
    }
    eprintln!("oracle check: ok (10 instances per kernel)");
    Ok(())
}

pub fn run(
    sizes: &str,
    variant: BenchVariant,
    check_oracle: bool,
    out: Option<&Path>,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    let sizes = parse_sizes(sizes)?;
    if check_oracle {
        check_oracles(cfg.seed)?;
    }

    let mut csv = String::from("kernel,size,cells,ops,ns_per_cell\n");
    for (row, &(c, h, w)) in sizes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(row as u64));
        let x = Tensor::random(c, h, w, &mut rng);
        let k5 = DepthwiseKernel::random(c, 5, 5, &mut rng);
        let weights = LkaWeights::random(c, &mut rng);
        let mut offsets = Tensor::random(offset_channels(1), h, w, &mut rng);
        for v in &mut offsets.data {
            *v *= 2.0;
        }
        let d = DeformParams {
            deform_groups: 1,
            weights: Conv3x3Weights::random(c, c, &mut rng),
        };

        let cells = c * h * w;
        let size = format!("{c}x{h}x{w}");
        let mv = msa_variant(variant);
        let rows: Vec<(&str, f64)> = vec![
            ("dconv5", time_per_cell(cells, || depthwise_conv(&x, &k5))),
            (
                variant_name(variant),
                time_per_cell(cells, || msa_forward(&x, &weights, mv)),
            ),
            ("lka", time_per_cell(cells, || lka_forward(&x, &weights))),
            (
                "deform",
                time_per_cell(cells, || deformable_sample(&x, &offsets, &d)),
            ),
        ];
        for (kernel, ns) in rows {
            csv.push_str(&format!(
                "{kernel},{size},{cells},{},{ns:.2}\n",
                op_count(kernel, c, h, w)
            ));
        }
    }

    match out {
        Some(path) => std::fs::write(path, csv).map_err(|e| io_err("writing table", e))?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| io_err("writing table", e))?,
    }
    Ok(())
}
