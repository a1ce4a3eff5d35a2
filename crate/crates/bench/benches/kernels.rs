use burnscope::cae::{downsample_to_bands, train, TrainConfig, REFERENCE_BANDS_NM};
use burnscope::cluster::{subsample_and_extend, tsne_embed};
use burnscope::lsci::{spatial_contrast, temporal_contrast, FlowMap, SpeckleSim};
use burnscope::physio::{absorbance, sto2, ExtinctionTable};
use burnscope::preprocess::smooth_spectra;
use burnscope_bench::phantom;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn preprocessing(c: &mut Criterion) {
    let (cube, _) = phantom(16);
    c.bench_function("smooth_spectra 16x16x1757", |b| b.iter(|| smooth_spectra(black_box(&cube), 7, 2).unwrap()));
    let a = absorbance(&cube).unwrap();
    let table = ExtinctionTable::builtin();
    c.bench_function("sto2 16x16", |b| b.iter(|| sto2(black_box(&a), &table, (500.0, 800.0)).unwrap()));
}

fn speckle(c: &mut Criterion) {
    let flow = FlowMap::bands(32, 32, &[100.0, 1000.0]).unwrap();
    let stack = SpeckleSim::default().simulate(&flow, 32, 0).unwrap();
    c.bench_function("simulate speckle 32x32x32", |b| {
        b.iter(|| SpeckleSim::default().simulate(black_box(&flow), 32, 0).unwrap())
    });
    c.bench_function("temporal contrast 32x32x32", |b| b.iter(|| temporal_contrast(black_box(&stack)).unwrap()));
    c.bench_function("spatial contrast 7x7", |b| b.iter(|| spatial_contrast(black_box(&stack), 7).unwrap()));
}

fn learning(c: &mut Criterion) {
    let (cube, _) = phantom(32);
    let bands = downsample_to_bands(&cube, &REFERENCE_BANDS_NM).unwrap();
    let mut g = c.benchmark_group("learning");
    g.sample_size(10);
    g.bench_function("spectral clustering 32x32, 10 bands", |b| {
        b.iter(|| subsample_and_extend(black_box(&bands), 4096, 4, 0).unwrap())
    });
    let px: Vec<Vec<f64>> = bands.tissue_matrix().into_iter().take(300).collect();
    g.bench_function("t-SNE 300 points", |b| b.iter(|| tsne_embed(black_box(&px), 30.0, 300, 0).unwrap()));
    let spectra = cube.tissue_matrix();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    g.bench_function("CAE 5 epochs, 1757 bands", |b| b.iter(|| train(black_box(&spectra), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, preprocessing, speckle, learning);
criterion_main!(benches);
